#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "cutaneous/pivot.hpp"

using namespace cutaneous;

TEST(Fixture, ZeroAtBoundary) {
  FixtureParams p;
  EXPECT_EQ(virtual_fixture_force(p.engage_at, 0.0, p), 0.0);
  EXPECT_EQ(virtual_fixture_force(p.engage_at + 0.002, -0.1, p), 0.0);
}

TEST(Fixture, ThreeMillimetrePenetration) {
  FixtureParams p;
  p.stiffness = 1000.0;
  EXPECT_NEAR(std::abs(virtual_fixture_force(p.engage_at - 0.003, 0.0, p)), 3.0, 1e-12);
}

TEST(Fixture, Bilinear) {
  FixtureParams p;
  const double f1 = virtual_fixture_force(p.engage_at - 0.001, 0.0, p);
  p.stiffness *= 2.0;
  const double f4 = virtual_fixture_force(p.engage_at - 0.002, 0.0, p);
  EXPECT_NEAR(f4, 4.0 * f1, 1e-12);
}

TEST(Fixture, ContinuousAtBoundary) {
  FixtureParams p;
  for (double pen : {1e-3, 1e-5, 1e-7, 1e-9})
    EXPECT_LE(std::abs(virtual_fixture_force(p.engage_at - pen, 0.0, p)), p.stiffness * pen * 1.0000001);
}

TEST(Fixture, ResistsClosure) {
  // Device pushes with -F; squeezing and closing both push the fingers apart.
  FixtureParams p;
  EXPECT_GT(-virtual_fixture_force(p.engage_at - 0.002, 0.0, p), 0.0);
  EXPECT_GT(-virtual_fixture_force(p.engage_at - 0.002, -0.05, p),
            -virtual_fixture_force(p.engage_at - 0.002, 0.0, p));
}

TEST(GripContact, Examples) {
  ObjectSpec o;
  EXPECT_EQ(grip_contact_force(o.diameter, o, 2000.0), 0.0);
  EXPECT_NEAR(grip_contact_force(o.diameter - 0.001, o, 2000.0), 2.0, 1e-9);
  EXPECT_EQ(grip_contact_force(o.diameter + 0.001, o, 2000.0), 0.0);
  EXPECT_THROW(grip_contact_force(-1e-3, o, 2000.0), Error);
}

TEST(FrictionCapacity, Examples) {
  EXPECT_EQ(friction_torque_capacity(0.0, 0.6, 0.002), 0.0);
  EXPECT_NEAR(friction_torque_capacity(1.635, 0.6, 0.002), 3.924e-3, 1e-9);
  EXPECT_DOUBLE_EQ(friction_torque_capacity(2.4, 0.6, 0.002), 2.0 * friction_torque_capacity(1.2, 0.6, 0.002));
}

namespace {

bool holds(const ObjectSpec& o, double theta0, double fn, double seconds) {
  PivotState s;
  s.theta = theta0;
  for (int k = 0; k < static_cast<int>(seconds / 1e-3); ++k) s = pivot_step(s, o, fn, 1e-3);
  return s.theta == theta0 && s.omega == 0.0 && s.mode == PivotMode::kStick;
}

}  // namespace

TEST(Pivot, HoldingThresholdByBisection) {
  ObjectSpec o;
  o.mass = 0.01;
  o.grasp_offset = 0.04;
  const double oracle = 0.01 * 9.81 * 0.04 / (2 * 0.6 * 0.002);
  double lo = 0.0, hi = 10.0;
  ASSERT_FALSE(holds(o, 0.0, lo, 0.2));
  ASSERT_TRUE(holds(o, 0.0, hi, 0.2));
  for (int i = 0; i < 40; ++i) {
    const double mid = 0.5 * (lo + hi);
    (holds(o, 0.0, mid, 0.2) ? hi : lo) = mid;
  }
  EXPECT_NEAR(hi, 1.635, 1.635 * 0.02);
  EXPECT_NEAR(hi, oracle, oracle * 1e-6);
}

TEST(Pivot, FirmGripSticksForTenSeconds) {
  for (double m : {0.005, 0.01, 0.02}) {
    ObjectSpec o;
    o.mass = m;
    const double fn = 2.0 * holding_force(o, 0.0);
    for (double deg : {0.0, 25.0, 45.0, 75.0}) EXPECT_TRUE(holds(o, deg_to_rad(deg), fn, 10.0));
  }
}

namespace {

// Reference: classical RK4 at 1 us on theta'' = k cos(theta).
double reference_time_to_90(double k) {
  const double h = 1e-6;
  double th = 0.0, w = 0.0, t = 0.0;
  auto acc = [k](double x) { return k * std::cos(x); };
  while (true) {
    const double k1t = w, k1w = acc(th);
    const double k2t = w + 0.5 * h * k1w, k2w = acc(th + 0.5 * h * k1t);
    const double k3t = w + 0.5 * h * k2w, k3w = acc(th + 0.5 * h * k2t);
    const double k4t = w + h * k3w, k4w = acc(th + h * k3t);
    const double th_new = th + h / 6 * (k1t + 2 * k2t + 2 * k3t + k4t);
    const double w_new = w + h / 6 * (k1w + 2 * k2w + 2 * k3w + k4w);
    if (th_new >= kPi / 2) return t + h * (kPi / 2 - th) / (th_new - th);
    th = th_new;
    w = w_new;
    t += h;
  }
}

}  // namespace

TEST(Pivot, FreeFallMatchesReferenceIntegrator) {
  for (double m : {0.005, 0.01, 0.02}) {
    ObjectSpec o;
    o.mass = m;
    PivotParams p;
    p.viscous = 0.0;
    const double r = o.diameter / 2;
    const double k = p.gravity * o.grasp_offset /
                     (o.length * o.length / 12 + r * r / 4 + o.grasp_offset * o.grasp_offset);
    const double t_ref = reference_time_to_90(k);

    PivotState s;
    double t = 0.0;
    while (true) {
      const PivotState next = pivot_step(s, o, 0.0, 1e-3, p);
      if (next.theta >= kPi / 2) {
        t += 1e-3 * (kPi / 2 - s.theta) / (next.theta - s.theta);
        break;
      }
      s = next;
      t += 1e-3;
    }
    EXPECT_NEAR(t, t_ref, 0.01 * t_ref) << m;
  }
}

TEST(Pivot, OpenGripperMeansSlip) {
  ObjectSpec o;
  PivotState s;
  s.theta = deg_to_rad(30);
  const double fn = grip_contact_force(o.diameter + 0.002, o, 2000.0);
  s = pivot_step(s, o, fn, 1e-3);
  EXPECT_EQ(s.mode, PivotMode::kSlip);
  EXPECT_GT(s.theta, deg_to_rad(30));
}

TEST(Pivot, RandomForceProfilesKeepInvariants) {
  std::mt19937_64 rng(5);
  for (int run = 0; run < 50; ++run) {
    ObjectSpec o;
    o.mass = std::array{0.005, 0.01, 0.02}[run % 3];
    const double hold = holding_force(o, 0.0);
    std::uniform_real_distribution<double> uf(0.0, 2.5 * hold);
    PivotState s;
    double fn = uf(rng);
    for (int k = 0; k < 5000; ++k) {
      if (k % 37 == 0) fn = uf(rng);
      const PivotState next = pivot_step(s, o, fn, 1e-3);
      ASSERT_GE(next.friction_work, 0.0);
      const double bound = std::abs(s.omega) * 1e-3 +
                           0.5 * std::abs(gravity_torque(o, s.theta)) / o.inertia() * 1e-6;
      ASSERT_LE(std::abs(next.theta - s.theta), bound * (1 + 1e-12));
      if (next.mode == PivotMode::kStick) {
        ASSERT_EQ(next.omega, 0.0);
        if (s.mode == PivotMode::kStick) {
          ASSERT_EQ(next.theta, s.theta);
        }
      }
      s = next;
    }
  }
}

TEST(Pivot, SlipEnergyNonIncreasingWithFriction) {
  // Potential measured from the horizontal pose: -m g d sin(theta).
  ObjectSpec o;
  PivotState s;
  const double fn = 0.8 * holding_force(o, 0.0);
  auto energy = [&](const PivotState& x) {
    return -o.mass * 9.81 * o.grasp_offset * std::sin(x.theta) + 0.5 * o.inertia() * x.omega * x.omega;
  };
  double e = energy(s);
  for (int k = 0; k < 3000; ++k) {
    s = pivot_step(s, o, fn, 1e-4);
    const double e2 = energy(s);
    ASSERT_LE(e2, e + 1e-9);
    e = e2;
  }
}

TEST(Gripper, EquilibriumUnchanged) {
  EXPECT_EQ(gripper_track(0.012, 0.012, 1e-3), 0.012);
  const auto s = gripper_track(0.012, GripperState{0.012, 0.0}, 1e-3);
  EXPECT_EQ(s.aperture, 0.012);
  EXPECT_EQ(s.velocity, 0.0);
}

TEST(Gripper, StepReaches98PercentWithin5OverOmega) {
  GripperParams g;
  GripperState s{0.010, 0.0};
  const double t_end = 5.0 / g.bandwidth;
  for (double t = 0.0; t < t_end - 1e-12; t += 1e-3) s = gripper_track(0.015, s, 1e-3, g);
  EXPECT_GE((s.aperture - 0.010) / 0.005, 0.98);
  for (int k = 0; k < 2000; ++k) s = gripper_track(0.015, s, 1e-3, g);
  EXPECT_NEAR(s.aperture, 0.015, 1e-12);
}

TEST(Gripper, RampLagWithinBound) {
  GripperParams g;
  const double rate = 0.01;  // m/s, well below bandwidth
  GripperState s{0.0, 0.0};
  double cmd = 0.0, lag = 0.0;
  for (int k = 0; k < 2000; ++k) {
    cmd += rate * 1e-3;
    s = gripper_track(cmd, s, 1e-3, g);
    lag = cmd - s.aperture;
  }
  EXPECT_LE(lag, rate / g.bandwidth * 1.05);
  EXPECT_GT(lag, 0.0);
}

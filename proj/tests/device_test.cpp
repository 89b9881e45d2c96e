#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "cutaneous/collision.hpp"
#include "cutaneous/device.hpp"
#include "cutaneous/motor.hpp"
#include "support/segment_oracle.hpp"

using namespace cutaneous;

TEST(MotorPlant, EquilibriumAtZeroVoltage) {
  MotorPlant p;
  p.angle = 0.3;
  for (int k = 0; k < 100; ++k) motor_plant_step(p, 0.0, 0.001);
  EXPECT_EQ(p.angle, 0.3);
  EXPECT_EQ(p.velocity, 0.0);
}

TEST(MotorPlant, FirstOrderSteadyState) {
  MotorPlant p;
  for (int k = 0; k < 1000; ++k) motor_plant_step(p, 2.0, 0.001);  // 50 time constants
  EXPECT_NEAR(p.velocity, 70.0, 0.7);
}

TEST(MotorPlant, SaturatesVoltage) {
  MotorPlant a, b;
  motor_plant_step(a, 100.0, 0.001);
  motor_plant_step(b, 6.0, 0.001);
  EXPECT_EQ(a.velocity, b.velocity);
}

TEST(MotorPlant, QuantizationBound) {
  MotorPlant p;
  p.sensor_center = kPi / 2;
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(kPi / 2 - 2.3, kPi / 2 + 2.3);
  const double q = p.params.sensor_range / 4096.0;
  for (int k = 0; k < 10000; ++k) {
    p.angle = u(rng);
    EXPECT_LE(std::abs(p.read() - p.angle), q);
  }
}

TEST(MotorPlant, RejectsBadDt) {
  MotorPlant p;
  EXPECT_THROW(motor_plant_step(p, 1.0, 0.0), Error);
}

TEST(Pid, ZeroErrorZeroOutput) {
  PidController pid({}, 0.001);
  EXPECT_EQ(pid.step(0.4, 0.4), 0.0);
}

TEST(Pid, ProportionalOnly) {
  PidGains g;
  g.ki = 0.0;
  PidController pid(g, 0.001);
  const double e = 0.1;
  EXPECT_DOUBLE_EQ(pid.step(e, 0.0), g.kp * e);
  EXPECT_DOUBLE_EQ(pid.step(e, 0.0), g.kp * e);  // derivative of a constant error is zero
}

TEST(Pid, IntegralIsClamped) {
  PidController pid({}, 0.001);
  for (int k = 0; k < 100000; ++k) pid.step(1.0, 0.0);
  EXPECT_LE(std::abs(pid.integral()), 1.0);
  EXPECT_LE(pid.step(100.0, 0.0), 6.0);
}

// Golden closed-loop run: default gains on the default plant, 1 kHz servo.
TEST(Pid, StepSettlesWithinHalfDegreeIn50ms) {
  for (double step_deg : {1.0, 5.0, 10.0, 20.0, 30.0}) {
    MotorPlant p;
    PidController pid({}, 0.001);
    const double target = deg_to_rad(step_deg);
    double reading = p.read();
    double last_outside = 0.0;
    for (int k = 1; k <= 1000; ++k) {
      reading = motor_plant_step(p, pid.step(target, reading), 0.001);
      if (std::abs(p.angle - target) > deg_to_rad(0.5)) last_outside = k * 0.001;
    }
    EXPECT_LE(last_outside, 0.050) << step_deg;
  }
}

namespace {

const Station kIndex = index_station();

}  // namespace

TEST(Arbitration, ClearTargetsPassThrough) {
  const Point2 c = kIndex.target.center;
  const Point2 up = c + Point2{0, 5}, lo = c - Point2{0, 5};
  const auto r = arbitrate_collision(up, lo, kIndex.upper, kIndex.lower);
  EXPECT_FALSE(r.active);
  EXPECT_EQ(r.upper, up);
  EXPECT_EQ(r.lower, lo);
}

TEST(Arbitration, CoincidentTargetsMoveLowerMinimally) {
  const Point2 c = kIndex.target.center;
  const ArbitrationParams params;
  const auto r = arbitrate_collision(c, c, kIndex.upper, kIndex.lower, params);
  EXPECT_TRUE(r.active);
  EXPECT_EQ(r.upper, c);
  const auto clearance = target_clearance(kIndex.upper, r.upper, kIndex.lower, r.lower);
  ASSERT_TRUE(clearance);
  EXPECT_GE(*clearance, params.clearance_min);

  // Oracle: exhaustive scan of every candidate of the same radial grid.
  double best = 1e300;
  for (int k = 1; k <= 160; ++k)
    for (int j = 0; j < 36; ++j) {
      const Point2 cand = c + unit_vector(2 * kPi * j / 36) * (k * 0.25);
      if (!is_reachable(kIndex.lower, cand)) continue;
      const auto cl = target_clearance(kIndex.upper, c, kIndex.lower, cand);
      if (cl && *cl >= params.clearance_min) best = std::min(best, distance(c, cand));
    }
  EXPECT_LE(distance(c, r.lower), best + 0.1);
}

TEST(Arbitration, RandomConflictsRestoreClearance) {
  std::mt19937_64 rng(99);
  for (const auto& st : {index_station(), thumb_station()}) {
    const Ellipse& e = st.target;
    std::uniform_real_distribution<double> ux(e.center.x - e.semi_x, e.center.x + e.semi_x),
        uy(e.center.y - e.semi_y, e.center.y + e.semi_y);
    int n = 0;
    while (n < 300) {
      const Point2 up{ux(rng), uy(rng)}, lo{ux(rng), uy(rng)};
      if (!e.contains(up) || !e.contains(lo)) continue;
      const auto c0 = target_clearance(st.upper, up, st.lower, lo);
      if (!c0 || *c0 >= 1.5) continue;
      ++n;
      const auto r = arbitrate_collision(up, lo, st.upper, st.lower);
      ASSERT_EQ(r.upper, up);
      const auto qu = inverse_kinematics(st.upper, r.upper);
      const auto ql = inverse_kinematics(st.lower, r.lower);
      const double brute = test_support::sampled_link_clearance(st.upper, qu, st.lower, ql);
      EXPECT_GE(brute, 1.5);
      EXPECT_NEAR(brute, r.clearance, 0.05);
    }
  }
}

TEST(Arbitration, HomePoseIsReachable) {
  for (const auto& st : {index_station(), thumb_station()}) {
    const Point2 h = retracted_home(st.lower);
    EXPECT_TRUE(is_reachable(st.lower, h));
    EXPECT_NO_THROW(inverse_kinematics(st.lower, h));
  }
}

namespace {

Device make_device(double theta = 0.0) {
  const auto stations = default_stations();
  return Device(DeviceParams{}, stations, sync_targets(stations, theta));
}

double tactor_error(const StationState& st, const TactorPair& target) {
  return std::max(distance(st.upper_tactor, target.upper), distance(st.lower_tactor, target.lower));
}

}  // namespace

TEST(Device, RegulatesAtSetpoint) {
  Device dev = make_device();
  StationTargets hold;
  for (std::size_t s = 0; s < 2; ++s)
    hold[s] = {dev.state().stations[s].upper_tactor, dev.state().stations[s].lower_tactor, 0.0};
  for (int k = 0; k < 50; ++k) dev.tick(hold);
  for (const auto& st : dev.state().stations) {
    for (double v : st.voltages) EXPECT_LT(std::abs(v), 0.05);
    EXPECT_LT(distance(st.upper_tactor, hold[0].upper) + 0.0, 100.0);
  }
  for (std::size_t s = 0; s < 2; ++s) EXPECT_LT(tactor_error(dev.state().stations[s], hold[s]), 0.02);
}

TEST(Device, StepOf3mmConvergesWithin200ms) {
  Device dev = make_device();
  auto targets = sync_targets(default_stations(), 0.0);
  for (auto& t : targets) {
    t.upper = t.upper + Point2{3.0, 0.0};
    t.lower = t.lower + Point2{3.0, 0.0};
  }
  for (int k = 0; k < 20; ++k) dev.tick(targets);
  for (std::size_t s = 0; s < 2; ++s) EXPECT_LT(tactor_error(dev.state().stations[s], targets[s]), 0.1);
}

TEST(Device, TwistTrackingRms) {
  const auto stations = default_stations();
  std::array<PatternSpec, 2> specs;
  for (std::size_t s = 0; s < 2; ++s)
    specs[s] = PatternSpec::defaults(PatternKind::kTwisting, stations[s].target.center);
  auto at = [&](int k) {
    // Ping-pong over the pattern so 10 s covers repeated sweeps.
    const double period = specs[0].duration;
    const double t = std::fmod(k * 0.01, 2 * period);
    const double tp = t <= period ? t : 2 * period - t;
    StationTargets out;
    for (std::size_t s = 0; s < 2; ++s) out[s] = generate_pattern(specs[s], tp, stations[s].target);
    return out;
  };
  Device dev(DeviceParams{}, stations, at(0));
  double sum2 = 0.0;
  int n = 0;
  for (int k = 1; k <= 1000; ++k) {
    const auto tgt = at(k);
    dev.tick(tgt);
    for (std::size_t s = 0; s < 2; ++s) {
      const auto& st = dev.state().stations[s];
      EXPECT_FALSE(st.arbitration_active);
      sum2 += std::pow(distance(st.upper_tactor, tgt[s].upper), 2) +
              std::pow(distance(st.lower_tactor, tgt[s].lower), 2);
      n += 2;
    }
  }
  EXPECT_LE(std::sqrt(sum2 / n), 0.3);
}

TEST(Device, PublishedTactorsEqualFkOfSensedAngles) {
  Device dev = make_device();
  for (int k = 0; k < 100; ++k) {
    dev.tick(sync_targets(default_stations(), deg_to_rad(0.9 * k)));
    for (std::size_t s = 0; s < 2; ++s) {
      const auto& st = dev.state().stations[s];
      EXPECT_EQ(st.upper_tactor, forward_kinematics(dev.station(s).upper, st.upper_joint_actual));
      EXPECT_EQ(st.lower_tactor, forward_kinematics(dev.station(s).lower, st.lower_joint_actual));
      EXPECT_GE(st.clearance, 0.0);
    }
  }
}

TEST(Device, TimeAccounting) {
  Device dev = make_device();
  const auto targets = sync_targets(default_stations(), 0.0);
  for (int k = 1; k <= 1234; ++k) {
    dev.tick(targets);
    ASSERT_EQ(dev.state().tick, static_cast<std::uint64_t>(k));
    ASSERT_EQ(dev.state().t, k * 0.01);
  }
}

TEST(Device, DeterministicWithNoise) {
  DeviceParams params;
  params.sensor_noise = 1e-3;
  const auto stations = default_stations();
  auto run = [&](std::uint64_t seed) {
    Device dev(params, stations, sync_targets(stations, 0.0), seed);
    std::ostringstream log;
    for (int k = 0; k < 300; ++k) {
      dev.tick(sync_targets(stations, deg_to_rad(0.25 * k)));
      dev.write_log_row(log);
    }
    return log.str();
  };
  EXPECT_EQ(run(7), run(7));
  EXPECT_NE(run(7), run(8));
}

TEST(Device, UnreachableTargetIsRejectedAndHeld) {
  Device dev = make_device();
  auto targets = sync_targets(default_stations(), 0.0);
  const Point2 held = targets[0].upper;
  targets[0].upper = {6.25, 200.0};
  dev.tick(targets);
  EXPECT_TRUE(dev.state().stations[0].target_rejected);
  EXPECT_EQ(dev.state().stations[0].upper_target, held);
}

TEST(Device, StretchStartTriggersArbitrationAndRestores) {
  const auto stations = default_stations();
  Device dev = make_device();
  StationTargets coincident;
  for (std::size_t s = 0; s < 2; ++s)
    coincident[s] = {stations[s].target.center, stations[s].target.center, 0.0};
  dev.tick(coincident);
  for (const auto& st : dev.state().stations) {
    EXPECT_TRUE(st.arbitration_active);
    EXPECT_NE(st.lower_target, st.requested.lower);
  }
  const auto clear = sync_targets(stations, 0.0);
  dev.tick(clear);
  for (std::size_t s = 0; s < 2; ++s) {
    EXPECT_FALSE(dev.state().stations[s].arbitration_active);
    EXPECT_EQ(dev.state().stations[s].lower_target, clear[s].lower);
  }
}

TEST(Device, LogHasOneColumnPerField) {
  Device dev = make_device();
  std::ostringstream os;
  Device::write_log_header(os);
  dev.write_log_row(os);
  std::istringstream is(os.str());
  std::string header, row;
  std::getline(is, header);
  std::getline(is, row);
  EXPECT_EQ(std::count(header.begin(), header.end(), ','), std::count(row.begin(), row.end(), ','));
}

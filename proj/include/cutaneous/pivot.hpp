#pragma once

// Passive pivoting of a gripped cylinder: gravity turns it about the grasp
// axis, torsional Coulomb friction at the two fingertip patches resists.
// Also the grasp-force fixture rendered to the operator and the gripper's
// position servo.

#include <cmath>
#include <string_view>

#include "cutaneous/error.hpp"
#include "cutaneous/geometry.hpp"

namespace cutaneous {

struct ObjectSpec {
  double mass = 0.01;          // kg
  double diameter = 0.015;     // m
  double length = 0.10;        // m
  double grasp_offset = 0.04;  // m, grasp axis to centre of mass

  void validate() const {
    if (!(mass > 0.0) || !(diameter > 0.0) || !(length > 0.0))
      throw Error(ErrorCode::kInvalidArgument, "mass, diameter and length must be > 0");
    if (!(grasp_offset >= 0.0 && grasp_offset <= length / 2.0))
      throw Error(ErrorCode::kInvalidArgument, "grasp_offset must be in [0, length/2]");
  }

  /// About the grasp axis: rod about its centre (solid cylinder, transverse
  /// axis) plus the parallel-axis shift.
  double inertia() const {
    return mass * (length * length / 12.0 + diameter * diameter / 16.0 + grasp_offset * grasp_offset);
  }
};

struct PivotParams {
  double gravity = 9.81;             // m/s^2
  double mu_s = 0.6;
  double mu_k = 0.45;
  double r_patch = 0.002;            // m
  double viscous = 1e-5;             // N m s
  double omega_eps = 1e-3;           // rad/s
  double contact_stiffness = 2000.0; // N/m
  double dt = 0.001;                 // s, physics substep
};

enum class PivotMode { kStick, kSlip };

constexpr std::string_view to_string(PivotMode m) { return m == PivotMode::kStick ? "stick" : "slip"; }

struct PivotState {
  double theta = 0.0;   // rad, 0 horizontal, pi/2 hanging
  double omega = 0.0;   // rad/s
  PivotMode mode = PivotMode::kStick;
  double normal_force = 0.0;   // N
  double aperture = 0.0;       // m
  double friction_work = 0.0;  // J dissipated during the last step
};

struct FixtureParams {
  double stiffness = 1000.0;  // N/m
  double damping = 5.0;       // N s/m
  double engage_at = 0.015;   // m, leader aperture where the fixture starts
};

/// F = K (x - X) + D xdot inside the fixture (x < X), 0 outside. The value is
/// the leader-side reaction, so the device pushes the fingers with -F: apart
/// when squeezing, and harder while still closing.
inline double virtual_fixture_force(double x_leader, double xdot_leader, const FixtureParams& p) {
  if (!(x_leader < p.engage_at)) return 0.0;
  return p.stiffness * (x_leader - p.engage_at) + p.damping * xdot_leader;
}

/// Penalty contact between the jaws and the cylinder.
inline double grip_contact_force(double aperture, const ObjectSpec& spec, double contact_stiffness) {
  if (aperture < 0.0) throw Error(ErrorCode::kInvalidArgument, "aperture must be >= 0");
  return aperture < spec.diameter ? contact_stiffness * (spec.diameter - aperture) : 0.0;
}

inline double friction_torque_capacity(double normal_force, double mu_s, double r_patch) {
  if (normal_force < 0.0) throw Error(ErrorCode::kInvalidArgument, "normal force must be >= 0");
  return 2.0 * mu_s * normal_force * r_patch;
}

inline double gravity_torque(const ObjectSpec& spec, double theta, const PivotParams& p = {}) {
  return spec.mass * p.gravity * spec.grasp_offset * std::cos(theta);
}

/// Smallest normal force that keeps the object stuck at theta.
inline double holding_force(const ObjectSpec& spec, double theta, const PivotParams& p = {}) {
  return std::abs(gravity_torque(spec, theta, p)) / (2.0 * p.mu_s * p.r_patch);
}

/// Gripper aperture that squeezes the object with `force`.
inline double aperture_for_force(const ObjectSpec& spec, double force, const PivotParams& p = {}) {
  return spec.diameter - force / p.contact_stiffness;
}

namespace detail {

inline double sign(double x) { return (x > 0.0) - (x < 0.0); }

}  // namespace detail

/// One physics substep. Velocity is explicit Euler, position uses the mean of
/// old and new velocity, and a velocity that friction would flip is stopped
/// at zero instead.
inline PivotState pivot_step(const PivotState& state, const ObjectSpec& spec, double normal_force,
                             double dt, const PivotParams& p = {}) {
  if (!(dt > 0.0)) throw Error(ErrorCode::kInvalidArgument, "dt must be > 0");
  if (normal_force < 0.0) throw Error(ErrorCode::kInvalidArgument, "normal force must be >= 0");
  PivotState s = state;
  s.normal_force = normal_force;
  s.friction_work = 0.0;

  const double tau_g = gravity_torque(spec, s.theta, p);
  const double cap = friction_torque_capacity(normal_force, p.mu_s, p.r_patch);
  if (s.mode == PivotMode::kStick) {
    if (std::abs(tau_g) <= cap) {
      s.omega = 0.0;
      return s;
    }
    s.mode = PivotMode::kSlip;
    s.omega = 0.0;
  }

  const double inertia = spec.inertia();
  const double tau_k = 2.0 * p.mu_k * normal_force * p.r_patch;
  const double dir = s.omega != 0.0 ? detail::sign(s.omega) : detail::sign(tau_g);
  const double alpha = (tau_g - tau_k * dir - p.viscous * s.omega) / inertia;
  double omega_new = s.omega + alpha * dt;
  if (s.omega != 0.0 && omega_new * s.omega < 0.0) omega_new = 0.0;
  if (s.omega == 0.0 && omega_new * dir < 0.0) omega_new = 0.0;  // friction alone never starts motion

  const double dtheta = 0.5 * (s.omega + omega_new) * dt;
  s.friction_work = tau_k * dir * dtheta + p.viscous * dtheta * dtheta / dt;
  s.theta += dtheta;
  s.omega = omega_new;

  if (std::abs(s.omega) < p.omega_eps && std::abs(gravity_torque(spec, s.theta, p)) <= cap) {
    s.mode = PivotMode::kStick;
    s.omega = 0.0;
  }
  return s;
}

struct GripperParams {
  double bandwidth = 40.0;  // rad/s
};

struct GripperState {
  double aperture = 0.0;  // m
  double velocity = 0.0;  // m/s
};

/// Critically damped position servo, integrated exactly for a command held
/// over dt. The double pole sits at 2x the bandwidth, which gives a ramp lag
/// of rate/bandwidth.
inline GripperState gripper_track(double aperture_cmd, const GripperState& s, double dt,
                                  const GripperParams& g = {}) {
  if (!(dt > 0.0)) throw Error(ErrorCode::kInvalidArgument, "dt must be > 0");
  const double pole = 2.0 * g.bandwidth;
  const double e0 = s.aperture - aperture_cmd;
  const double c = s.velocity + pole * e0;
  const double decay = std::exp(-pole * dt);
  return {aperture_cmd + (e0 + c * dt) * decay, (s.velocity - pole * c * dt) * decay};
}

/// Stateless form: starts from rest at `aperture`.
inline double gripper_track(double aperture_cmd, double aperture, double dt, const GripperParams& g = {}) {
  return gripper_track(aperture_cmd, GripperState{aperture, 0.0}, dt, g).aperture;
}

}  // namespace cutaneous

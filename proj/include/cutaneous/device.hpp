#pragma once

// The 100 Hz control loop of the two-station cutaneous device:
// IK on requested tactor targets -> upper-priority collision arbitration ->
// joint PID -> motor plants (1 kHz substeps) -> FK from the sensed angles.

#include <array>
#include <cstdint>
#include <ostream>
#include <random>

#include "cutaneous/collision.hpp"
#include "cutaneous/linkage.hpp"
#include "cutaneous/motor.hpp"
#include "cutaneous/patterns.hpp"
#include "cutaneous/station.hpp"

namespace cutaneous {

struct DeviceParams {
  MotorParams motor;
  PidGains pid;
  ArbitrationParams arbitration;
  double control_dt = 0.01;  // s
  int substeps = 10;         // plant/PID steps per control tick
  double sensor_noise = 0.0; // rad, std of potentiometer noise before the ADC
};

struct StationState {
  TactorPair requested;
  Point2 upper_target;       // after IK acceptance
  Point2 lower_target;       // after arbitration
  JointAngles upper_joint_target;
  JointAngles lower_joint_target;
  JointAngles upper_joint_actual;  // sensed
  JointAngles lower_joint_actual;  // sensed
  Point2 upper_tactor;       // FK of the sensed upper angles
  Point2 lower_tactor;       // FK of the sensed lower angles
  bool arbitration_active = false;
  bool parked = false;
  bool target_rejected = false;
  double clearance = 0.0;    // mm, link clearance at the sensed configuration
  std::array<double, 4> voltages{};  // last substep: theta1, theta2 (lower), theta3, theta4 (upper)
};

struct DeviceState {
  std::uint64_t tick = 0;
  double t = 0.0;
  std::array<StationState, 2> stations;  // index, thumb
};

using StationTargets = std::array<TactorPair, 2>;

class Device {
 public:
  Device(const DeviceParams& params, std::array<Station, 2> stations, const StationTargets& initial,
         std::uint64_t seed = 0)
      : params_(params), stations_(std::move(stations)), rng_(seed) {
    params_.motor.validate();
    if (!(params_.control_dt > 0.0) || params_.substeps < 1)
      throw Error(ErrorCode::kInvalidArgument, "control_dt and substeps must be positive");
    const double sub_dt = params_.control_dt / params_.substeps;
    for (std::size_t s = 0; s < 2; ++s) {
      auto& st = state_.stations[s];
      st.requested = initial[s];
      st.upper_target = initial[s].upper;
      st.lower_target = initial[s].lower;
      lower_accepted_[s] = initial[s].lower;
      st.upper_joint_target = inverse_kinematics(stations_[s].upper, st.upper_target);
      st.lower_joint_target = inverse_kinematics(stations_[s].lower, st.lower_target);
      const std::array<double, 4> q0{st.lower_joint_target.theta1, st.lower_joint_target.theta2,
                                     st.upper_joint_target.theta1, st.upper_joint_target.theta2};
      for (std::size_t m = 0; m < 4; ++m) {
        auto& ch = channels_[s * 4 + m];
        ch.plant.params = params_.motor;
        ch.plant.angle = q0[m];
        ch.plant.sensor_center = m < 2 ? kPi / 2 : -kPi / 2;
        ch.pid = PidController(params_.pid, sub_dt);
        ch.reading = ch.plant.read();
      }
      publish(s);
    }
  }

  const DeviceState& state() const { return state_; }
  const Station& station(std::size_t s) const { return stations_.at(s); }
  const DeviceParams& params() const { return params_; }

  const DeviceState& tick(const StationTargets& targets) {
    for (std::size_t s = 0; s < 2; ++s) plan(s, targets[s]);

    const double sub_dt = params_.control_dt / params_.substeps;
    std::normal_distribution<double> noise(0.0, params_.sensor_noise);
    for (int k = 0; k < params_.substeps; ++k) {
      for (std::size_t s = 0; s < 2; ++s) {
        const auto& st = state_.stations[s];
        const std::array<double, 4> target{st.lower_joint_target.theta1, st.lower_joint_target.theta2,
                                           st.upper_joint_target.theta1, st.upper_joint_target.theta2};
        for (std::size_t m = 0; m < 4; ++m) {
          auto& ch = channels_[s * 4 + m];
          ch.voltage = ch.pid.step(target[m], ch.reading);
          motor_plant_step(ch.plant, ch.voltage, sub_dt);
          ch.reading = ch.plant.read(params_.sensor_noise > 0.0 ? noise(rng_) : 0.0);
        }
      }
    }

    ++state_.tick;
    state_.t = static_cast<double>(state_.tick) * params_.control_dt;
    for (std::size_t s = 0; s < 2; ++s) publish(s);
    return state_;
  }

  static void write_log_header(std::ostream& os) {
    os << "t_s";
    for (const char* f : {"index", "thumb"}) {
      for (int j = 1; j <= 4; ++j) os << ',' << f << "_theta" << j << "_target_deg";
      for (int j = 1; j <= 4; ++j) os << ',' << f << "_theta" << j << "_act_deg";
      os << ',' << f << "_up_x_mm," << f << "_up_y_mm," << f << "_lo_x_mm," << f << "_lo_y_mm";
      os << ',' << f << "_arbitration_active," << f << "_clearance_mm";
    }
    os << '\n';
  }

  void write_log_row(std::ostream& os) const {
    os << state_.t;
    for (const auto& st : state_.stations) {
      for (double a : {st.lower_joint_target.theta1, st.lower_joint_target.theta2,
                       st.upper_joint_target.theta1, st.upper_joint_target.theta2})
        os << ',' << rad_to_deg(a);
      for (double a : {st.lower_joint_actual.theta1, st.lower_joint_actual.theta2,
                       st.upper_joint_actual.theta1, st.upper_joint_actual.theta2})
        os << ',' << rad_to_deg(a);
      os << ',' << st.upper_tactor.x << ',' << st.upper_tactor.y << ',' << st.lower_tactor.x << ','
         << st.lower_tactor.y << ',' << int(st.arbitration_active) << ',' << st.clearance;
    }
    os << '\n';
  }

 private:
  struct Channel {
    MotorPlant plant;
    PidController pid{PidGains{}, 0.001};
    double reading = 0.0;
    double voltage = 0.0;
  };

  void plan(std::size_t s, const TactorPair& requested) {
    auto& st = state_.stations[s];
    const auto& geo = stations_[s];
    st.requested = requested;
    st.target_rejected = false;

    // Unreachable targets are rejected and the previous target is held.
    auto accept = [&](const LinkageGeometry& g, Point2 p, Point2& held) {
      try {
        inverse_kinematics(g, p);
        held = p;
      } catch (const Error&) {
        st.target_rejected = true;
      }
    };
    accept(geo.upper, requested.upper, st.upper_target);
    // Arbitration always starts from the last accepted request, so a moved
    // lower target returns to the request once the conflict clears.
    Point2& lower = lower_accepted_[s];
    accept(geo.lower, requested.lower, lower);

    st.parked = false;
    try {
      const auto arb = arbitrate_collision(st.upper_target, lower, geo.upper, geo.lower,
                                           params_.arbitration);
      st.arbitration_active = arb.active;
      st.lower_target = arb.lower;
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kNoFeasibleLowerTarget) throw;
      st.arbitration_active = true;
      st.parked = true;
      st.lower_target = retracted_home(geo.lower);
    }
    st.upper_joint_target = inverse_kinematics(geo.upper, st.upper_target);
    st.lower_joint_target = inverse_kinematics(geo.lower, st.lower_target);
  }

  void publish(std::size_t s) {
    auto& st = state_.stations[s];
    const auto& geo = stations_[s];
    const auto* ch = &channels_[s * 4];
    st.lower_joint_actual = {ch[0].reading, ch[1].reading};
    st.upper_joint_actual = {ch[2].reading, ch[3].reading};
    st.lower_tactor = forward_kinematics(geo.lower, st.lower_joint_actual);
    st.upper_tactor = forward_kinematics(geo.upper, st.upper_joint_actual);
    st.clearance = link_clearance(geo.upper, st.upper_joint_actual, geo.lower, st.lower_joint_actual);
    for (std::size_t m = 0; m < 4; ++m) st.voltages[m] = ch[m].voltage;
  }

  DeviceParams params_;
  std::array<Station, 2> stations_;
  std::array<Channel, 8> channels_;
  std::array<Point2, 2> lower_accepted_;
  DeviceState state_;
  std::mt19937_64 rng_;
};

/// Both stations tracking the grasped object's rotation.
inline StationTargets sync_targets(const std::array<Station, 2>& stations, double theta_obj,
                                   const SyncMapping& map = {}) {
  StationTargets out;
  for (std::size_t s = 0; s < 2; ++s)
    out[s] = object_sync_targets(theta_obj, map, stations[s].target.center, stations[s].target).pair;
  return out;
}

inline std::array<Station, 2> default_stations() { return {index_station(), thumb_station()}; }

}  // namespace cutaneous

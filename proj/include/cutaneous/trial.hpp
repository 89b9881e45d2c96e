#pragma once

// One pivoting trial: gripper servo -> contact -> pivot physics at 1 kHz,
// the tactile device tracking the object angle at 100 Hz, and the history
// the operator's delayed observations are drawn from.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "cutaneous/device.hpp"
#include "cutaneous/error.hpp"
#include "cutaneous/pivot.hpp"

namespace cutaneous {

/// Visual feedback is always on; grasp-force (GF) and tactile (TF) feedback
/// are toggled.
struct Condition {
  bool visual = true;
  bool grasp_force = false;
  bool tactile = false;

  friend bool operator==(const Condition&, const Condition&) = default;
};

inline std::string to_string(const Condition& c) {
  std::string s = "VF";
  if (c.grasp_force) s += "+GF";
  if (c.tactile) s += "+TF";
  return s;
}

inline Condition parse_condition(std::string_view s) {
  if (s == "VF") return {true, false, false};
  if (s == "VF+GF") return {true, true, false};
  if (s == "VF+TF") return {true, false, true};
  if (s == "VF+GF+TF") return {true, true, true};
  throw Error(ErrorCode::kInvalidArgument, "unknown condition '" + std::string(s) + "'");
}

inline std::vector<Condition> all_conditions() {
  return {{true, false, false}, {true, true, false}, {true, false, true}, {true, true, true}};
}

inline int condition_index(const Condition& c) { return int(c.grasp_force) + 2 * int(c.tactile); }

struct TrialConfig {
  double mass = 0.01;         // kg
  double target_deg = 45.0;
  Condition condition;
  int trial_index = 0;
  std::uint64_t seed = 0;
};

struct TrialResult {
  TrialConfig config;
  double final_deg = 0.0;
  double error_deg = 0.0;  // final - target
  double completion_time = 0.0;  // s
  bool success = false;
  bool timeout = false;
  bool dropped = false;
};

/// The success rule, kept separate so logs can be re-checked against it.
inline bool trial_success(double error_deg, bool timeout) { return std::abs(error_deg) < 10.0 && !timeout; }

struct Latencies {
  double visual = 0.100;   // s
  double force = 0.020;
  double tactile = 0.020;
};

struct TrialParams {
  std::array<Station, 2> stations = default_stations();  // index, thumb
  ObjectSpec object;  // mass is overridden per trial
  PivotParams pivot;
  GripperParams gripper;
  FixtureParams fixture;
  DeviceParams device;
  SyncMapping sync;
  Latencies latency;
  double control_dt = 0.01;   // s
  int substeps = 10;          // physics steps per control tick
  double timeout = 30.0;      // s
  double stick_hold = 0.5;    // s of sustained stick that completes a trial
  double drop_margin = 0.005; // m of opening beyond the diameter that drops the object
  double initial_grip = 2.0;  // x holding force at theta = 0
  double max_aperture = 0.030;
};

/// Per-tick record, also the per-tick CSV log.
struct TrialRecord {
  std::uint64_t tick = 0;
  double t = 0.0;
  double theta = 0.0;          // rad
  double omega = 0.0;          // rad/s
  double normal_force = 0.0;   // N
  PivotMode mode = PivotMode::kStick;
  double aperture = 0.0;       // m, gripper
  double aperture_cmd = 0.0;   // m, leader
  double fixture_force = 0.0;  // N
  double friction_work = 0.0;  // J over the tick
  double tactile_theta = 0.0;  // rad, decoded from the index station tactors
};

class Trial {
 public:
  Trial(const TrialConfig& cfg, const TrialParams& params)
      : cfg_(cfg), params_(params), device_(params.device, params.stations,
                                            sync_targets(params.stations, 0.0, params.sync)) {
    params_.object.mass = cfg.mass;
    params_.object.validate();
    if (!(params_.control_dt > 0.0) || params_.substeps < 1)
      throw Error(ErrorCode::kInvalidArgument, "control_dt and substeps must be positive");
    params_.fixture.engage_at = params_.object.diameter;
    const double firm = aperture_for_force(
        params_.object, params_.initial_grip * holding_force(params_.object, 0.0, params_.pivot),
        params_.pivot);
    gripper_ = {firm, 0.0};
    last_cmd_ = firm;
    pivot_.aperture = firm;
    pivot_.normal_force = grip_contact_force(firm, params_.object, params_.pivot.contact_stiffness);
    TrialRecord r;
    r.aperture = r.aperture_cmd = firm;
    r.normal_force = pivot_.normal_force;
    r.tactile_theta = decode_sync_angle(tactors(), params_.sync);
    history_.push_back(r);
  }

  const TrialConfig& config() const { return cfg_; }
  const TrialParams& params() const { return params_; }
  const std::vector<TrialRecord>& history() const { return history_; }
  const TrialRecord& current() const { return history_.back(); }
  const Device& device() const { return device_; }
  bool finished() const { return finished_; }
  std::uint64_t ticks() const { return tick_; }
  double t() const { return static_cast<double>(tick_) * params_.control_dt; }

  /// Advances one control tick with the leader aperture held over it.
  /// `done` is the operator's stop signal; the trial completes once it is set
  /// and the object has stuck for stick_hold since the later of stick onset
  /// and the last command change.
  const TrialRecord& tick(double aperture_cmd, bool done) {
    if (finished_) throw Error(ErrorCode::kIllegalTransition, "trial already finished");
    if (!std::isfinite(aperture_cmd)) throw Error(ErrorCode::kInvalidArgument, "aperture must be finite");
    const double cmd = std::clamp(aperture_cmd, 0.0, params_.max_aperture);
    const double dt = params_.control_dt / params_.substeps;

    TrialRecord r;
    for (int k = 0; k < params_.substeps; ++k) {
      gripper_ = gripper_track(cmd, gripper_, dt, params_.gripper);
      const double ap = std::max(0.0, gripper_.aperture);
      const double fn = grip_contact_force(ap, params_.object, params_.pivot.contact_stiffness);
      const bool was_stick = pivot_.mode == PivotMode::kStick;
      pivot_ = pivot_step(pivot_, params_.object, fn, dt, params_.pivot);
      pivot_.aperture = ap;
      r.friction_work += pivot_.friction_work;
      if (pivot_.mode == PivotMode::kStick && !was_stick) stick_since_ = t() + (k + 1) * dt;
    }
    device_.tick(sync_targets(params_.stations, pivot_.theta, params_.sync));

    const double cmd_rate = (cmd - last_cmd_) / params_.control_dt;
    if (cmd != last_cmd_) last_change_ = t() + params_.control_dt;
    last_cmd_ = cmd;
    ++tick_;

    r.tick = tick_;
    r.t = t();
    r.theta = pivot_.theta;
    r.omega = pivot_.omega;
    r.normal_force = pivot_.normal_force;
    r.mode = pivot_.mode;
    r.aperture = pivot_.aperture;
    r.aperture_cmd = cmd;
    r.fixture_force = virtual_fixture_force(cmd, cmd_rate, params_.fixture);
    r.tactile_theta = decode_sync_angle(tactors(), params_.sync);
    history_.push_back(r);

    if (pivot_.aperture > params_.object.diameter + params_.drop_margin) {
      finish(false, true);
    } else if (done && pivot_.mode == PivotMode::kStick &&
               r.t - std::max(stick_since_, last_change_) >= params_.stick_hold - 1e-9) {
      finish(false, false);
    } else if (r.t >= params_.timeout - 1e-9) {
      finish(true, false);
    }
    return history_.back();
  }

  /// Valid once finished().
  const TrialResult& result() const {
    if (!finished_) throw Error(ErrorCode::kIllegalTransition, "trial still running");
    return result_;
  }

  /// Ends the trial early (abort): recorded as a timeout at the current angle.
  void abort() {
    if (!finished_) finish(true, false);
  }

  static void write_log_header(std::ostream& os) {
    os << "t_s,theta_deg,omega_rad_s,normal_force_n,mode,aperture_m,aperture_cmd_m,fixture_force_n,"
          "friction_work_j\n";
  }

  static void write_log_row(std::ostream& os, const TrialRecord& r) {
    os << r.t << ',' << rad_to_deg(r.theta) << ',' << r.omega << ',' << r.normal_force << ','
       << to_string(r.mode) << ',' << r.aperture << ',' << r.aperture_cmd << ',' << r.fixture_force << ','
       << r.friction_work << '\n';
  }

 private:
  TactorPair tactors() const {
    const auto& st = device_.state().stations[0];
    return {st.upper_tactor, st.lower_tactor, 0.0};
  }

  void finish(bool timeout, bool dropped) {
    finished_ = true;
    result_.config = cfg_;
    result_.timeout = timeout;
    result_.dropped = dropped;
    // A dropped object ends hanging at its gravity equilibrium. Angles are
    // kept at the 1e-4 deg the results log carries, so success can be
    // recomputed from the log exactly.
    auto logged = [](double deg) { return std::round(deg * 1e4) / 1e4; };
    result_.final_deg = logged(dropped ? 90.0 : rad_to_deg(pivot_.theta));
    result_.error_deg = logged(result_.final_deg - cfg_.target_deg);
    result_.completion_time = t();
    result_.success = trial_success(result_.error_deg, timeout);
  }

  TrialConfig cfg_;
  TrialParams params_;
  Device device_;
  GripperState gripper_;
  PivotState pivot_;
  std::vector<TrialRecord> history_;
  std::uint64_t tick_ = 0;
  double last_cmd_ = 0.0;
  double last_change_ = 0.0;
  double stick_since_ = 0.0;
  bool finished_ = false;
  TrialResult result_;
};

}  // namespace cutaneous

#pragma once

// Trial protocol: randomized mass x angle schedules, the scripted operator
// standing in for a person, and summary statistics.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <iomanip>
#include <map>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "cutaneous/trial.hpp"

namespace cutaneous {

struct ProtocolParams {
  std::vector<double> masses{0.005, 0.01, 0.02};  // kg
  std::vector<double> targets{25.0, 45.0, 75.0};  // deg
  int repetitions = 5;
};

/// Stable per-purpose seed derivation.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(b)};
  std::array<std::uint32_t, 2> out;
  seq.generate(out.begin(), out.end());
  return (std::uint64_t(out[0]) << 32) | out[1];
}

/// Seeded permutation of every (mass, target) case repeated `repetitions`
/// times. Trial seeds are derived from the schedule seed and the position.
inline std::vector<TrialConfig> build_trial_schedule(const Condition& condition, std::uint64_t seed,
                                                     const ProtocolParams& proto = {}) {
  std::vector<TrialConfig> out;
  for (int r = 0; r < proto.repetitions; ++r)
    for (double m : proto.masses)
      for (double a : proto.targets) out.push_back({m, a, condition, 0, 0});
  std::mt19937_64 rng(seed);
  std::shuffle(out.begin(), out.end(), rng);
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i].trial_index = static_cast<int>(i);
    out[i].seed = derive_seed(seed, i, 1);
  }
  return out;
}

struct OperatorParams {
  double reaction_delay = 0.150;     // s
  double gain = 2e-4;                // m of opening past the holding threshold per degree of error
  double observation_noise = 1.0;    // deg std
  double stop_band = 3.0;            // deg
  double firm_factor = 2.0;          // regrip at this multiple of the holding force
  double max_release = 0.5;          // opening cap, fraction of the holding squeeze
  double step_fraction = 0.5;        // aim for this fraction of the remaining error per pulse
  double max_step = 15.0;            // deg per pulse
  int max_pulse_ticks = 20;
  int settle_samples = 15;
  double settle_slope = 3.0;         // deg/s
  double settle_margin = 0.08;       // s waited beyond the observation delay
  double dead_time = 0.025;          // s before a release pulse starts to move the object
  double initial_rate = 15000.0;     // deg/s^2, deliberately high first guess
  double hold_bias = 0.3;            // max relative error of the holding estimate without GF
};

/// What the operator sees at one control tick.
struct Observation {
  double t = 0.0;
  double theta_deg = 0.0;        // delayed and noisy
  double target_deg = 0.0;
  double hold_aperture = 0.0;    // m, believed holding threshold at theta_deg
  double contact_aperture = 0.0; // m, where the jaws touch the object
  double latency = 0.0;          // s, total delay of theta_deg
  double dt = 0.01;
};

struct OperatorCommand {
  double aperture = 0.0;  // m
  bool done = false;
};

/// Pulse-and-wait release: open a little past the holding threshold for a
/// short pulse, regrip firmly, wait until the delayed view settles, then
/// size the next pulse from the rotation the last one produced.
class ScriptedOperator {
 public:
  explicit ScriptedOperator(const OperatorParams& p = {}) : p_(p), rate_(p.initial_rate), dead_(p.dead_time) {
    if (p.reaction_delay < 0.0 || !(p.stop_band > 0.0))
      throw Error(ErrorCode::kInvalidArgument, "reaction_delay must be >= 0 and stop_band > 0");
  }

  const OperatorParams& params() const { return p_; }
  bool done() const { return phase_ == Phase::kDone; }

  OperatorCommand step(const Observation& obs) {
    switch (phase_) {
      case Phase::kDecide:
        return decide(obs, obs.theta_deg);
      case Phase::kPulse:
        if (--pulse_left_ > 0) return {release_, false};
        phase_ = Phase::kWait;
        wait_left_ = static_cast<int>(std::ceil((obs.latency + p_.settle_margin) / obs.dt));
        samples_.clear();
        return {firm_, false};
      case Phase::kWait: {
        if (wait_left_ > 0) {
          --wait_left_;
          return {firm_, false};
        }
        samples_.push_back(obs.theta_deg);
        const auto n = static_cast<std::size_t>(p_.settle_samples);
        if (samples_.size() < n) return {firm_, false};
        const std::vector<double> last(samples_.end() - n, samples_.end());
        if (std::abs(slope(last, obs.dt)) > p_.settle_slope) return {firm_, false};
        double mean = 0.0;
        for (double v : last) mean += v;
        mean /= static_cast<double>(n);
        learn(mean);
        return decide(obs, mean);
      }
      case Phase::kDone:
        return {firm_, true};
    }
    return {firm_, false};
  }

 private:
  enum class Phase { kDecide, kPulse, kWait, kDone };

  static double slope(const std::vector<double>& y, double dt) {
    const double n = static_cast<double>(y.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < y.size(); ++i) {
      const double x = i * dt;
      sx += x;
      sy += y[i];
      sxx += x * x;
      sxy += x * y[i];
    }
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
  }

  double firm_aperture(const Observation& obs) const {
    return obs.contact_aperture - p_.firm_factor * (obs.contact_aperture - obs.hold_aperture);
  }

  OperatorCommand decide(const Observation& obs, double theta_est) {
    theta_est_ = theta_est;
    firm_ = firm_aperture(obs);
    const double error = obs.target_deg - theta_est;
    if (error < p_.stop_band) {
      phase_ = Phase::kDone;
      return {firm_, true};
    }
    const double squeeze = std::max(0.0, obs.contact_aperture - obs.hold_aperture);
    release_ = obs.hold_aperture + std::min(p_.gain * error, p_.max_release * squeeze);
    // Rotation per pulse is modelled as rate * cos(theta) * (T - dead_time)^2.
    const double desired = std::min(p_.step_fraction * error, p_.max_step);
    const double span = dead_ + std::sqrt(desired / (rate_ * tilt(theta_est)));
    pulse_ticks_ = std::clamp(static_cast<int>(std::lround(span / obs.dt)), 1, p_.max_pulse_ticks);
    pulse_dt_ = obs.dt;
    pulse_left_ = pulse_ticks_;
    phase_ = Phase::kPulse;
    return {release_, false};
  }

  static double tilt(double theta_deg) { return std::max(std::cos(deg_to_rad(theta_deg)), 0.05); }

  void learn(double theta_new) {
    const double moved = theta_new - theta_est_;
    const double active = pulse_ticks_ * pulse_dt_ - dead_;
    if (moved < 0.5 || active <= 0.0) {
      // Nothing happened: the jaws never got past the threshold in time.
      dead_ = std::max(dead_, pulse_ticks_ * pulse_dt_) + pulse_dt_;
      return;
    }
    rate_ = moved / (tilt(theta_est_) * active * active);
  }

  OperatorParams p_;
  Phase phase_ = Phase::kDecide;
  double rate_;
  double dead_ = 0.0;
  double pulse_dt_ = 0.01;
  double theta_est_ = 0.0;
  double firm_ = 0.0;
  double release_ = 0.0;
  int pulse_ticks_ = 1;
  int pulse_left_ = 0;
  int wait_left_ = 0;
  std::vector<double> samples_;
};

/// Builds the operator's view of a trial: angle from the fastest available
/// channel plus the reaction delay, Gaussian noise, and a holding threshold
/// that is exact with grasp-force feedback and biased without it.
class ObservationModel {
 public:
  ObservationModel(const Trial& trial, const OperatorParams& op, std::uint64_t seed)
      : trial_(trial), op_(op), rng_(seed) {
    const Condition& c = trial.config().condition;
    const Latencies& l = trial.params().latency;
    channel_latency_ = c.tactile ? std::min(l.visual, l.tactile) : l.visual;
    use_tactile_ = c.tactile && l.tactile <= l.visual;
    std::uniform_real_distribution<double> u(-op.hold_bias, op.hold_bias);
    const double b = u(rng_);
    bias_ = c.grasp_force ? 0.0 : b;
  }

  double latency() const { return op_.reaction_delay + channel_latency_; }

  Observation observe() {
    const auto& h = trial_.history();
    const double dt = trial_.params().control_dt;
    const auto lag = static_cast<std::size_t>(std::lround(latency() / dt));
    const TrialRecord& r = h[h.size() > lag ? h.size() - 1 - lag : 0];
    std::normal_distribution<double> noise(0.0, op_.observation_noise);
    const double n = op_.observation_noise > 0.0 ? noise(rng_) : 0.0;

    Observation o;
    o.t = trial_.t();
    o.theta_deg = rad_to_deg(use_tactile_ ? r.tactile_theta : r.theta) + n;
    o.target_deg = trial_.config().target_deg;
    const ObjectSpec& spec = trial_.params().object;
    const PivotParams& pp = trial_.params().pivot;
    const double hold = holding_force(spec, deg_to_rad(std::clamp(o.theta_deg, 0.0, 90.0)), pp);
    o.contact_aperture = spec.diameter;
    o.hold_aperture = aperture_for_force(spec, hold * (1.0 + bias_), pp);
    o.latency = latency();
    o.dt = dt;
    return o;
  }

 private:
  const Trial& trial_;
  OperatorParams op_;
  std::mt19937_64 rng_;
  double channel_latency_ = 0.0;
  bool use_tactile_ = false;
  double bias_ = 0.0;
};

struct CommandRecord {
  std::uint64_t tick = 0;  // tick the command was applied on (0-based)
  double aperture = 0.0;
  bool done = false;
};

/// Runs one trial to completion with the scripted operator. The applied
/// command stream is appended to `commands` when given; `on_tick` sees the
/// trial after every tick.
inline TrialResult run_trial(const TrialConfig& cfg, const OperatorParams& op, const TrialParams& params = {},
                             std::vector<CommandRecord>* commands = nullptr,
                             std::vector<TrialRecord>* log = nullptr,
                             const std::function<void(const Trial&)>& on_tick = {}) {
  Trial trial(cfg, params);
  ObservationModel view(trial, op, derive_seed(cfg.seed, 2));
  ScriptedOperator oper(op);
  while (!trial.finished()) {
    const auto cmd = oper.step(view.observe());
    if (commands) commands->push_back({trial.ticks(), cmd.aperture, cmd.done});
    trial.tick(cmd.aperture, cmd.done);
    if (on_tick) on_tick(trial);
  }
  if (log) *log = trial.history();
  return trial.result();
}

/// Feeds a recorded command stream into a fresh trial.
inline TrialResult replay_trial(const TrialConfig& cfg, const std::vector<CommandRecord>& commands,
                                const TrialParams& params = {}, std::vector<TrialRecord>* log = nullptr) {
  Trial trial(cfg, params);
  for (const auto& c : commands) {
    if (trial.finished()) break;
    if (c.tick != trial.ticks()) throw Error(ErrorCode::kInvalidArgument, "command log out of order");
    trial.tick(c.aperture, c.done);
  }
  if (!trial.finished()) throw Error(ErrorCode::kInvalidArgument, "command log ends before the trial");
  if (log) *log = trial.history();
  return trial.result();
}

/// Full protocol for each condition. The schedule seed per condition is
/// derived from the master seed.
inline std::vector<TrialResult> run_protocol(const std::vector<Condition>& conditions, std::uint64_t seed,
                                             const OperatorParams& op = {}, const TrialParams& params = {},
                                             const ProtocolParams& proto = {}) {
  std::vector<TrialResult> out;
  for (const auto& c : conditions)
    for (const auto& cfg : build_trial_schedule(c, derive_seed(seed, condition_index(c)), proto))
      out.push_back(run_trial(cfg, op, params));
  return out;
}

// ---- results I/O and statistics ----

inline void write_results_header(std::ostream& os) {
  os << "condition,trial_index,mass_kg,target_deg,final_deg,error_deg,time_s,success,timeout\n";
}

inline void write_result_row(std::ostream& os, const TrialResult& r) {
  std::ostringstream s;
  s << std::fixed << to_string(r.config.condition) << ',' << r.config.trial_index << ','
    << std::setprecision(3) << r.config.mass << ',' << std::setprecision(1) << r.config.target_deg << ','
    << std::setprecision(4) << r.final_deg << ',' << r.error_deg << ',' << std::setprecision(2)
    << r.completion_time << ',' << int(r.success) << ',' << int(r.timeout) << '\n';
  os << s.str();
}

inline void write_results_csv(std::ostream& os, const std::vector<TrialResult>& results) {
  write_results_header(os);
  for (const auto& r : results) write_result_row(os, r);
}

struct GroupStats {
  std::string key;
  int trials = 0;
  int successes = 0;
  int timeouts = 0;
  double success_pct = 0.0;
  double mean_abs_error = 0.0;  // deg
  double std_abs_error = 0.0;   // deg, sample std
  double mean_time = 0.0;       // s
  std::map<double, double> mean_time_by_target;  // deg -> s
};

enum class Grouping { kCondition, kCase, kConditionCase };

inline std::string group_key(const TrialResult& r, Grouping by) {
  std::ostringstream s;
  s << std::fixed;
  if (by != Grouping::kCase) s << to_string(r.config.condition);
  if (by == Grouping::kConditionCase) s << '/';
  if (by != Grouping::kCondition)
    s << std::setprecision(3) << r.config.mass << "kg@" << std::setprecision(0) << r.config.target_deg << "deg";
  return s.str();
}

inline std::vector<GroupStats> aggregate(const std::vector<TrialResult>& results, Grouping by) {
  if (results.empty()) throw Error(ErrorCode::kEmptyInput, "no trial results");
  std::map<std::string, std::vector<const TrialResult*>> groups;
  std::vector<std::string> order;
  for (const auto& r : results) {
    auto key = group_key(r, by);
    if (!groups.count(key)) order.push_back(key);
    groups[key].push_back(&r);
  }
  std::vector<GroupStats> out;
  for (const auto& key : order) {
    const auto& g = groups[key];
    GroupStats s;
    s.key = key;
    s.trials = static_cast<int>(g.size());
    double sum = 0.0, sum_t = 0.0;
    std::map<double, std::pair<double, int>> by_target;
    for (const auto* r : g) {
      s.successes += r->success;
      s.timeouts += r->timeout;
      sum += std::abs(r->error_deg);
      sum_t += r->completion_time;
      auto& bt = by_target[r->config.target_deg];
      bt.first += r->completion_time;
      ++bt.second;
    }
    const double n = s.trials;
    s.success_pct = 100.0 * s.successes / n;
    s.mean_abs_error = sum / n;
    s.mean_time = sum_t / n;
    double ss = 0.0;
    for (const auto* r : g) ss += std::pow(std::abs(r->error_deg) - s.mean_abs_error, 2);
    s.std_abs_error = s.trials > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
    for (const auto& [target, acc] : by_target) s.mean_time_by_target[target] = acc.first / acc.second;
    out.push_back(std::move(s));
  }
  return out;
}

inline nlohmann::json to_json(const GroupStats& s) {
  nlohmann::json by_target = nlohmann::json::object();
  for (const auto& [target, t] : s.mean_time_by_target) {
    std::ostringstream k;
    k << target;
    by_target[k.str()] = t;
  }
  return {{"group", s.key},
          {"trials", s.trials},
          {"successes", s.successes},
          {"timeouts", s.timeouts},
          {"success_pct", s.success_pct},
          {"mean_abs_error_deg", s.mean_abs_error},
          {"std_abs_error_deg", s.std_abs_error},
          {"mean_time_s", s.mean_time},
          {"mean_time_s_by_target_deg", by_target}};
}

inline nlohmann::json summary_json(const std::vector<TrialResult>& results) {
  nlohmann::json j;
  for (auto [name, by] : {std::pair{"by_condition", Grouping::kCondition}, std::pair{"by_case", Grouping::kCase},
                          std::pair{"by_condition_case", Grouping::kConditionCase}}) {
    j[name] = nlohmann::json::array();
    for (const auto& s : aggregate(results, by)) j[name].push_back(to_json(s));
  }
  return j;
}

}  // namespace cutaneous

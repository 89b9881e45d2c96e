#pragma once

// Teleoperation session: owns the live trial, applies client commands at tick
// boundaries (last writer per kind), publishes state snapshots every
// `snapshot_every` ticks and records a command log that replays exactly.

#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <istream>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "cutaneous/experiment.hpp"

namespace cutaneous {

using nlohmann::json;

enum class TrialStatus { kIdle, kRunning, kDone };

constexpr std::string_view to_string(TrialStatus s) {
  switch (s) {
    case TrialStatus::kIdle: return "idle";
    case TrialStatus::kRunning: return "running";
    case TrialStatus::kDone: return "done";
  }
  return "?";
}

enum class CommandKind { kAperture, kStartTrial, kAbort, kSetCondition, kSetSeed };

constexpr std::string_view to_string(CommandKind k) {
  switch (k) {
    case CommandKind::kAperture: return "aperture";
    case CommandKind::kStartTrial: return "start_trial";
    case CommandKind::kAbort: return "abort";
    case CommandKind::kSetCondition: return "set_condition";
    case CommandKind::kSetSeed: return "set_seed";
  }
  return "?";
}

struct Command {
  CommandKind kind = CommandKind::kAperture;
  double aperture = 0.0;              // m
  Condition condition;
  std::uint64_t seed = 0;
  std::optional<double> mass;         // start_trial override, kg
  std::optional<double> target_deg;   // start_trial override
  std::optional<double> client_time;  // s
  json id;                            // echoed in the ack when present
};

namespace detail {

inline double number(const json& j, const char* key) {
  const auto it = j.find(key);
  if (it == j.end() || !it->is_number()) throw Error(ErrorCode::kMalformedMessage, std::string("missing number '") + key + "'");
  const double v = it->get<double>();
  if (!std::isfinite(v)) throw Error(ErrorCode::kMalformedMessage, std::string("non-finite '") + key + "'");
  return v;
}

inline std::optional<double> optional_number(const json& j, const char* key) {
  if (!j.contains(key)) return std::nullopt;
  return number(j, key);
}

}  // namespace detail

/// Parses one client message. Throws MalformedMessage.
inline Command command_from_json(const json& j) {
  if (!j.is_object()) throw Error(ErrorCode::kMalformedMessage, "message must be a JSON object");
  const auto kind = j.find("kind");
  if (kind == j.end() || !kind->is_string()) throw Error(ErrorCode::kMalformedMessage, "missing 'kind'");
  Command c;
  if (j.contains("id")) c.id = j["id"];
  c.client_time = detail::optional_number(j, "client_time");
  const std::string k = kind->get<std::string>();
  if (k == "aperture") {
    c.kind = CommandKind::kAperture;
    c.aperture = detail::number(j, "aperture_m");
    if (c.aperture < 0.0) throw Error(ErrorCode::kMalformedMessage, "aperture_m must be >= 0");
  } else if (k == "start_trial") {
    c.kind = CommandKind::kStartTrial;
    c.mass = detail::optional_number(j, "mass_kg");
    c.target_deg = detail::optional_number(j, "target_deg");
    if (c.mass && !(*c.mass > 0.0)) throw Error(ErrorCode::kMalformedMessage, "mass_kg must be > 0");
  } else if (k == "abort") {
    c.kind = CommandKind::kAbort;
  } else if (k == "set_condition") {
    c.kind = CommandKind::kSetCondition;
    const auto it = j.find("condition");
    if (it == j.end() || !it->is_string()) throw Error(ErrorCode::kMalformedMessage, "missing 'condition'");
    try {
      c.condition = parse_condition(it->get<std::string>());
    } catch (const Error& e) {
      throw Error(ErrorCode::kMalformedMessage, e.what());
    }
  } else if (k == "set_seed") {
    c.kind = CommandKind::kSetSeed;
    const auto it = j.find("seed");
    if (it == j.end() || !it->is_number_integer() || it->get<std::int64_t>() < 0)
      throw Error(ErrorCode::kMalformedMessage, "seed must be a non-negative integer");
    c.seed = it->get<std::uint64_t>();
  } else {
    throw Error(ErrorCode::kMalformedMessage, "unknown kind '" + k + "'");
  }
  return c;
}

inline Command parse_command(std::string_view text) {
  json j = json::parse(text.begin(), text.end(), nullptr, false);
  if (j.is_discarded()) throw Error(ErrorCode::kMalformedMessage, "invalid JSON");
  return command_from_json(j);
}

inline json to_json(const Command& c) {
  json j{{"kind", to_string(c.kind)}};
  switch (c.kind) {
    case CommandKind::kAperture: j["aperture_m"] = c.aperture; break;
    case CommandKind::kStartTrial:
      if (c.mass) j["mass_kg"] = *c.mass;
      if (c.target_deg) j["target_deg"] = *c.target_deg;
      break;
    case CommandKind::kSetCondition: j["condition"] = to_string(c.condition); break;
    case CommandKind::kSetSeed: j["seed"] = c.seed; break;
    case CommandKind::kAbort: break;
  }
  if (c.client_time) j["client_time"] = *c.client_time;
  if (!c.id.is_null()) j["id"] = c.id;
  return j;
}

inline json error_message(ErrorCode code, std::string_view what, const json& id = nullptr) {
  json j{{"type", "error"}, {"code", to_string(code)}, {"message", what}};
  if (!id.is_null()) j["id"] = id;
  return j;
}

inline json point_json(Point2 p) { return json::array({p.x, p.y}); }

inline json station_json(const Station& s) {
  auto geo = [](const LinkageGeometry& g) {
    return json{{"o1", point_json(g.o1)}, {"o2", point_json(g.o2)}, {"l1", g.l1}, {"l2", g.l2},
                {"l3", g.l3}, {"l4", g.l4}, {"elbow", g.elbow == Elbow::kPositive ? 1 : -1}};
  };
  return {{"lower", geo(s.lower)},
          {"upper", geo(s.upper)},
          {"target", {{"center", point_json(s.target.center)}, {"semi_x", s.target.semi_x}, {"semi_y", s.target.semi_y}}}};
}

inline json result_json(const TrialResult& r) {
  return {{"condition", to_string(r.config.condition)},
          {"trial_index", r.config.trial_index},
          {"mass_kg", r.config.mass},
          {"target_deg", r.config.target_deg},
          {"final_deg", r.final_deg},
          {"error_deg", r.error_deg},
          {"time_s", r.completion_time},
          {"success", r.success},
          {"timeout", r.timeout},
          {"dropped", r.dropped}};
}

struct SessionParams {
  TrialParams trial;
  ProtocolParams protocol;
  std::uint64_t seed = 0;
  Condition condition{true, true, true};
  int snapshot_every = 2;         // ticks; 50 Hz at the 100 Hz control tick
  double stale_after = 1.0;       // s of client_time regression
  double live_min_rotation = 1.0; // deg before a live trial may complete
};

/// Message addressed to one client (client 0 = broadcast).
struct Outgoing {
  std::uint64_t client = 0;
  json message;
};

class Session {
 public:
  using Logger = std::function<void(const std::string&)>;

  explicit Session(const SessionParams& p = {}, Logger log = {}) : p_(p), seed_(p.seed), condition_(p.condition), log_(std::move(log)) {
    if (p_.snapshot_every < 1) throw Error(ErrorCode::kInvalidArgument, "snapshot_every must be >= 1");
    preview_ = std::make_unique<Trial>(next_config(false), p_.trial);
    hold_ = preview_->current().aperture_cmd;
  }

  std::uint64_t tick_count() const { return tick_; }
  double t() const { return static_cast<double>(tick_) * p_.trial.control_dt; }
  TrialStatus status() const { return status_; }
  const Condition& condition() const { return condition_; }
  std::uint64_t seed() const { return seed_; }
  const std::vector<TrialResult>& results() const { return results_; }
  const Trial& trial() const { return *preview_; }
  const SessionParams& params() const { return p_; }

  /// Queues a command for the next tick. Later commands of the same kind
  /// replace earlier ones that have not been applied yet.
  void submit(const Command& c, std::uint64_t client = 0) {
    auto& slot = pending_[static_cast<int>(c.kind)];
    if (slot) {
      out_.push_back({slot->client, ack(slot->command, false, "superseded")});
    }
    slot = Pending{c, client};
  }

  /// Applies pending commands, advances the live trial one control tick and
  /// Advances one control tick and returns everything to send.
  std::vector<Outgoing> tick() {
    const std::uint64_t seq = tick_ + 1;
    for (auto kind : {CommandKind::kSetSeed, CommandKind::kSetCondition, CommandKind::kAbort,
                      CommandKind::kStartTrial, CommandKind::kAperture}) {
      auto& slot = pending_[static_cast<int>(kind)];
      if (!slot) continue;
      Pending pc = std::move(*slot);
      slot.reset();
      apply(pc, seq);
    }

    if (status_ == TrialStatus::kRunning) {
      const bool done = rad_to_deg(preview_->current().theta) >= p_.live_min_rotation;
      preview_->tick(hold_, done);
      if (preview_->finished()) finish_trial();
    }
    tick_ = seq;
    if (tick_ % static_cast<std::uint64_t>(p_.snapshot_every) == 0) out_.push_back({0, snapshot()});
    std::vector<Outgoing> out;
    out.swap(out_);
    return out;
  }

  json snapshot() const {
    const TrialRecord& r = preview_->current();
    const auto& dev = preview_->device().state();
    json tactors, joints;
    for (std::size_t s = 0; s < 2; ++s) {
      const auto& st = dev.stations[s];
      const std::string name(to_string(p_.trial.stations[s].finger));
      tactors[name] = {{"upper", point_json(st.upper_tactor)}, {"lower", point_json(st.lower_tactor)}};
      joints[name] = json::array({rad_to_deg(st.lower_joint_actual.theta1), rad_to_deg(st.lower_joint_actual.theta2),
                                  rad_to_deg(st.upper_joint_actual.theta1), rad_to_deg(st.upper_joint_actual.theta2)});
    }
    const auto& cfg = preview_->config();
    return {{"type", "state"},
            {"sequence", tick_},
            {"t_s", t()},
            {"trial_t_s", r.t},
            {"object_angle_deg", rad_to_deg(r.theta)},
            {"object_omega_rad_s", r.omega},
            {"pivot_mode", to_string(r.mode)},
            {"target_angle_deg", cfg.target_deg},
            {"mass_kg", cfg.mass},
            {"grip_force_n", r.normal_force},
            {"fixture_force_n", r.fixture_force},
            {"aperture_m", r.aperture},
            {"aperture_cmd_m", r.aperture_cmd},
            {"tactors_mm", tactors},
            {"joint_angles_deg", joints},
            {"condition", to_string(condition_)},
            {"trial_status", to_string(status_)},
            {"trial_index", cfg.trial_index}};
  }

  /// Sent to a client when it connects.
  json hello() const {
    json stations = json::object();
    for (const auto& s : p_.trial.stations) stations[std::string(to_string(s.finger))] = station_json(s);
    return {{"type", "hello"},
            {"state_rate_hz", 1.0 / (p_.trial.control_dt * p_.snapshot_every)},
            {"control_rate_hz", 1.0 / p_.trial.control_dt},
            {"seed", seed_},
            {"condition", to_string(condition_)},
            {"object_diameter_m", p_.trial.object.diameter},
            {"stations", stations}};
  }

  // ---- command log ----

  /// Applied commands as JSON lines: a header, one line per command with the
  /// tick it applied on, and an end marker with the final tick.
  void write_command_log(std::ostream& os) const {
    os << json{{"type", "session"}, {"seed", p_.seed}, {"condition", to_string(p_.condition)}}.dump() << '\n';
    for (const auto& [tick, c] : applied_) {
      json j = to_json(c);
      j.erase("id");
      j["tick"] = tick;
      os << j.dump() << '\n';
    }
    os << json{{"type", "end"}, {"tick", tick_}}.dump() << '\n';
  }

  /// Rebuilds a session from a command log, feeding every command on its
  /// recorded tick. The session parameters other than seed and condition
  /// must match the recording.
  static Session replay(std::istream& log, SessionParams p) {
    std::string line;
    if (!std::getline(log, line)) throw Error(ErrorCode::kMalformedMessage, "empty command log");
    const json head = json::parse(line, nullptr, false);
    if (head.is_discarded() || head.value("type", "") != "session")
      throw Error(ErrorCode::kMalformedMessage, "command log must start with a session header");
    p.seed = head.at("seed").get<std::uint64_t>();
    p.condition = parse_condition(head.at("condition").get<std::string>());
    Session s(p);
    std::uint64_t end = 0;
    std::map<std::uint64_t, std::vector<Command>> by_tick;
    while (std::getline(log, line)) {
      if (line.empty()) continue;
      const json j = json::parse(line, nullptr, false);
      if (j.is_discarded()) throw Error(ErrorCode::kMalformedMessage, "bad command log line");
      if (j.value("type", "") == "end") {
        end = j.at("tick").get<std::uint64_t>();
        continue;
      }
      by_tick[j.at("tick").get<std::uint64_t>()].push_back(command_from_json(j));
    }
    for (std::uint64_t k = 1; k <= end; ++k) {
      if (auto it = by_tick.find(k); it != by_tick.end())
        for (const auto& c : it->second) s.submit(c);
      s.tick();
    }
    return s;
  }

 private:
  struct Pending {
    Command command;
    std::uint64_t client = 0;
  };

  json ack(const Command& c, bool applied, const char* note = nullptr, std::uint64_t seq = 0) const {
    json j{{"type", "ack"}, {"kind", to_string(c.kind)}, {"applied", applied}};
    if (applied) j["sequence"] = seq;
    if (note) j["note"] = note;
    if (!c.id.is_null()) j["id"] = c.id;
    return j;
  }

  TrialConfig next_config(bool consume) {
    auto& schedule = schedules_[condition_index(condition_)];
    if (schedule.empty())
      schedule = build_trial_schedule(condition_, derive_seed(seed_, condition_index(condition_)), p_.protocol);
    auto& index = next_[condition_index(condition_)];
    TrialConfig cfg = schedule[index % schedule.size()];
    cfg.trial_index = static_cast<int>(index);
    if (consume) ++index;
    return cfg;
  }

  void apply(const Pending& pc, std::uint64_t seq) {
    const Command& c = pc.command;
    std::optional<std::string> warning;
    if (c.client_time) {
      auto& last = client_time_[pc.client];
      if (last && *c.client_time < *last - p_.stale_after) {
        warning = "StaleClient";
        if (log_) log_("StaleClient: client " + std::to_string(pc.client) + " time regressed");
      }
      if (!last || *c.client_time > *last) last = *c.client_time;
    }
    try {
      switch (c.kind) {
        case CommandKind::kSetSeed:
          if (status_ == TrialStatus::kRunning)
            throw Error(ErrorCode::kIllegalTransition, "set_seed while a trial is running");
          seed_ = c.seed;
          schedules_ = {};
          next_ = {};
          break;
        case CommandKind::kSetCondition:
          if (status_ == TrialStatus::kRunning)
            throw Error(ErrorCode::kIllegalTransition, "set_condition while a trial is running");
          condition_ = c.condition;
          break;
        case CommandKind::kAbort:
          if (status_ != TrialStatus::kRunning) throw Error(ErrorCode::kIllegalTransition, "no trial running");
          preview_->abort();
          finish_trial();
          status_ = TrialStatus::kIdle;
          break;
        case CommandKind::kStartTrial: {
          if (status_ == TrialStatus::kRunning)
            throw Error(ErrorCode::kIllegalTransition, "start_trial while a trial is running");
          TrialConfig cfg = next_config(true);
          if (c.mass) cfg.mass = *c.mass;
          if (c.target_deg) cfg.target_deg = *c.target_deg;
          preview_ = std::make_unique<Trial>(cfg, p_.trial);
          hold_ = preview_->current().aperture_cmd;
          status_ = TrialStatus::kRunning;
          break;
        }
        case CommandKind::kAperture:
          // Zero-order hold; only a running trial consumes it.
          hold_ = c.aperture;
          break;
      }
    } catch (const Error& e) {
      json err = error_message(e.code(), e.what(), c.id);
      err["kind"] = to_string(c.kind);
      err["sequence"] = seq;
      out_.push_back({pc.client, err});
      return;
    }
    applied_.push_back({seq, c});
    json a = ack(c, true, nullptr, seq);
    if (warning) a["warning"] = *warning;
    out_.push_back({pc.client, a});
  }

  void finish_trial() {
    results_.push_back(preview_->result());
    status_ = TrialStatus::kDone;
    json j = result_json(results_.back());
    j["type"] = "trial_result";
    out_.push_back({0, j});
  }

  SessionParams p_;
  std::uint64_t seed_;
  Condition condition_;
  Logger log_;
  std::unique_ptr<Trial> preview_;
  TrialStatus status_ = TrialStatus::kIdle;
  double hold_ = 0.0;
  std::uint64_t tick_ = 0;
  std::array<std::optional<Pending>, 5> pending_;
  std::array<std::vector<TrialConfig>, 4> schedules_;
  std::array<std::size_t, 4> next_{};
  std::map<std::uint64_t, std::optional<double>> client_time_;
  std::vector<std::pair<std::uint64_t, Command>> applied_;
  std::vector<TrialResult> results_;
  std::vector<Outgoing> out_;
};

}  // namespace cutaneous

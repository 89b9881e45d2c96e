#pragma once

// JSON configuration. Every section and key is optional and overrides the
// built-in default; unknown keys are rejected so typos do not pass silently.
//
//   {
//     "stations": {"index": {"o1": [0, 0], "o2": [12.5, 0], "o3": [0, 31], "o4": [12.5, 31],
//                            "l1": 9, "l2": 9, "l3": 15, "l4": 15, "ellipse": [15, 12]},
//                  "thumb": {...}},
//     "motor": {...}, "pid": {...}, "arbitration": {...}, "device": {...},
//     "object": {...}, "pivot": {...}, "fixture": {...}, "gripper": {...},
//     "sync": {...}, "latency": {...}, "trial": {...},
//     "operator": {...}, "protocol": {...}, "session": {...}
//   }
//
// Lengths in the station tables are mm, everything else SI unless the key
// says otherwise (_deg).

#include <fstream>
#include <set>
#include <string>

#include <json.hpp>

#include "cutaneous/error.hpp"
#include "cutaneous/experiment.hpp"
#include "cutaneous/teleop.hpp"

namespace cutaneous {

struct Config {
  SessionParams session;  // trial physics, protocol, snapshot rate
  OperatorParams op;
};

namespace detail {

class Section {
 public:
  Section(const json& j, std::string name) : j_(j), name_(std::move(name)) {
    if (!j_.is_object()) throw Error(ErrorCode::kInvalidArgument, "config: '" + name_ + "' must be an object");
  }

  template <class T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception&) {
      throw Error(ErrorCode::kInvalidArgument, "config: bad value for " + name_ + "." + key);
    }
  }

  void get_deg(const char* key, double& rad) {
    double deg = rad_to_deg(rad);
    get(key, deg);
    rad = deg_to_rad(deg);
  }

  void get_point(const char* key, Point2& p) {
    std::array<double, 2> xy{p.x, p.y};
    get(key, xy);
    p = {xy[0], xy[1]};
  }

  bool has(const char* key) {
    seen_.insert(key);
    return j_.contains(key);
  }

  Section sub(const char* key) {
    seen_.insert(key);
    return Section(j_.at(key), name_.empty() ? key : name_ + "." + key);
  }

  void done() const {
    for (const auto& [k, v] : j_.items())
      if (!seen_.count(k)) throw Error(ErrorCode::kInvalidArgument, "config: unknown key " + name_ + "." + k);
  }

 private:
  const json& j_;
  std::string name_;
  std::set<std::string> seen_;
};

inline Station read_station(Section s, const Station& base) {
  Point2 o1 = base.lower.o1, o2 = base.lower.o2, o3 = base.upper.o1, o4 = base.upper.o2;
  double l1 = base.lower.l1, l2 = base.lower.l2, l3 = base.lower.l3, l4 = base.lower.l4;
  std::array<double, 2> ellipse{2 * base.target.semi_x, 2 * base.target.semi_y};
  s.get_point("o1", o1);
  s.get_point("o2", o2);
  s.get_point("o3", o3);
  s.get_point("o4", o4);
  s.get("l1", l1);
  s.get("l2", l2);
  s.get("l3", l3);
  s.get("l4", l4);
  s.get("ellipse", ellipse);
  s.done();
  return make_station(base.finger, o1, o2, o3, o4, l1, l2, l3, l4, ellipse[0], ellipse[1]);
}

}  // namespace detail

inline Config config_from_json(const json& j) {
  Config c;
  TrialParams& t = c.session.trial;
  detail::Section root(j, "");

  if (root.has("stations")) {
    auto s = root.sub("stations");
    if (s.has("index")) t.stations[0] = detail::read_station(s.sub("index"), t.stations[0]);
    if (s.has("thumb")) t.stations[1] = detail::read_station(s.sub("thumb"), t.stations[1]);
    s.done();
  }
  if (root.has("motor")) {
    auto s = root.sub("motor");
    MotorParams& m = t.device.motor;
    s.get("time_constant", m.time_constant);
    s.get("gain", m.gain);
    s.get("voltage_limit", m.voltage_limit);
    s.get("sensor_bits", m.sensor_bits);
    s.get_deg("sensor_range_deg", m.sensor_range);
    s.done();
  }
  if (root.has("pid")) {
    auto s = root.sub("pid");
    PidGains& g = t.device.pid;
    s.get("kp", g.kp);
    s.get("ki", g.ki);
    s.get("kd", g.kd);
    s.get("integral_limit", g.integral_limit);
    s.get("output_limit", g.output_limit);
    s.done();
  }
  if (root.has("arbitration")) {
    auto s = root.sub("arbitration");
    ArbitrationParams& a = t.device.arbitration;
    s.get("clearance_min", a.clearance_min);
    s.get("directions", a.directions);
    s.get("step", a.step);
    s.get("max_radius", a.max_radius);
    s.done();
  }
  if (root.has("device")) {
    auto s = root.sub("device");
    s.get("substeps", t.device.substeps);
    s.get_deg("sensor_noise_deg", t.device.sensor_noise);
    s.done();
  }
  if (root.has("object")) {
    auto s = root.sub("object");
    s.get("diameter", t.object.diameter);
    s.get("length", t.object.length);
    s.get("grasp_offset", t.object.grasp_offset);
    s.done();
  }
  if (root.has("pivot")) {
    auto s = root.sub("pivot");
    PivotParams& p = t.pivot;
    s.get("gravity", p.gravity);
    s.get("mu_s", p.mu_s);
    s.get("mu_k", p.mu_k);
    s.get("r_patch", p.r_patch);
    s.get("viscous", p.viscous);
    s.get("omega_eps", p.omega_eps);
    s.get("contact_stiffness", p.contact_stiffness);
    s.done();
  }
  if (root.has("fixture")) {
    auto s = root.sub("fixture");
    s.get("stiffness", t.fixture.stiffness);
    s.get("damping", t.fixture.damping);
    s.done();
  }
  if (root.has("gripper")) {
    auto s = root.sub("gripper");
    s.get("bandwidth", t.gripper.bandwidth);
    s.done();
  }
  if (root.has("sync")) {
    auto s = root.sub("sync");
    s.get("radius", t.sync.radius);
    s.get("gain", t.sync.gain);
    s.get_deg("phase_offset_deg", t.sync.phase_offset);
    s.done();
  }
  if (root.has("latency")) {
    auto s = root.sub("latency");
    s.get("visual", t.latency.visual);
    s.get("force", t.latency.force);
    s.get("tactile", t.latency.tactile);
    s.done();
  }
  if (root.has("trial")) {
    auto s = root.sub("trial");
    s.get("substeps", t.substeps);
    s.get("timeout", t.timeout);
    s.get("stick_hold", t.stick_hold);
    s.get("drop_margin", t.drop_margin);
    s.get("initial_grip", t.initial_grip);
    s.get("max_aperture", t.max_aperture);
    s.done();
  }
  if (root.has("operator")) {
    auto s = root.sub("operator");
    OperatorParams& o = c.op;
    s.get("reaction_delay", o.reaction_delay);
    s.get("gain", o.gain);
    s.get("observation_noise", o.observation_noise);
    s.get("stop_band", o.stop_band);
    s.get("firm_factor", o.firm_factor);
    s.get("max_release", o.max_release);
    s.get("step_fraction", o.step_fraction);
    s.get("max_step", o.max_step);
    s.get("max_pulse_ticks", o.max_pulse_ticks);
    s.get("settle_samples", o.settle_samples);
    s.get("settle_slope", o.settle_slope);
    s.get("settle_margin", o.settle_margin);
    s.get("dead_time", o.dead_time);
    s.get("initial_rate", o.initial_rate);
    s.get("hold_bias", o.hold_bias);
    s.done();
  }
  if (root.has("protocol")) {
    auto s = root.sub("protocol");
    ProtocolParams& p = c.session.protocol;
    s.get("masses", p.masses);
    s.get("targets_deg", p.targets);
    s.get("repetitions", p.repetitions);
    s.done();
  }
  if (root.has("session")) {
    auto s = root.sub("session");
    s.get("snapshot_every", c.session.snapshot_every);
    s.get("stale_after", c.session.stale_after);
    s.get("live_min_rotation_deg", c.session.live_min_rotation);
    s.done();
  }
  root.done();

  if (t.substeps < 1 || t.device.substeps < 1 || c.session.snapshot_every < 1 || c.session.protocol.repetitions < 1)
    throw Error(ErrorCode::kInvalidArgument, "config: substeps, snapshot_every and repetitions must be >= 1");
  if (c.session.protocol.masses.empty() || c.session.protocol.targets.empty())
    throw Error(ErrorCode::kInvalidArgument, "config: protocol needs at least one mass and one target");
  ObjectSpec probe = t.object;
  for (double m : c.session.protocol.masses) {
    probe.mass = m;
    probe.validate();
  }
  return c;
}

inline Config load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kInvalidArgument, "cannot open config " + path);
  json j;
  try {
    j = json::parse(in, nullptr, true, true);  // comments allowed
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::kInvalidArgument, "config " + path + ": " + e.what());
  }
  return config_from_json(j);
}

}  // namespace cutaneous

#include <atomic>
#include <chrono>
#include <csignal>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

#include "cutaneous/config.hpp"
#include "cutaneous/server.hpp"
#include "cutaneous/workspace.hpp"

using namespace cutaneous;

namespace {

std::atomic<bool> g_stop{false};

Config config_or_default(const std::string& path) { return path.empty() ? Config{} : load_config(path); }

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::kInvalidArgument, "cannot write " + path);
  out << std::setprecision(10);
  return out;
}

std::vector<Condition> parse_conditions(const std::string& list) {
  std::vector<Condition> out;
  std::stringstream ss(list);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(parse_condition(item));
  if (out.empty()) throw Error(ErrorCode::kInvalidArgument, "no conditions given");
  return out;
}

std::string trial_stem(const TrialConfig& c) {
  std::string cond = to_string(c.condition);
  std::replace(cond.begin(), cond.end(), '+', '_');
  std::ostringstream os;
  os << cond << '_' << std::setw(2) << std::setfill('0') << c.trial_index;
  return os.str();
}

void print_summary(const std::vector<TrialResult>& results) {
  for (const auto& g : aggregate(results, Grouping::kCondition))
    std::cout << std::left << std::setw(10) << g.key << std::right << " success " << g.successes << '/' << g.trials
              << " (" << std::fixed << std::setprecision(1) << g.success_pct << "%)  |error| mean "
              << std::setprecision(2) << g.mean_abs_error << " deg\n";
}

int cmd_workspace(const std::string& config, const std::string& finger, double resolution, const std::string& out) {
  const Config c = config_or_default(config);
  const Station& st = c.session.trial.stations[parse_finger(finger) == Finger::kIndex ? 0 : 1];
  const WorkspaceGrid grid = compute_workspace(st, resolution);
  if (!out.empty()) {
    auto f = open_out(out);
    grid.write_csv(f);
  }
  std::cout << "intersection_area_mm2 " << std::fixed << std::setprecision(3) << grid.intersection_area()
            << "  target_cells " << grid.target_cells() << "  uncovered " << grid.uncovered_target_cells() << '\n';
  return grid.uncovered_target_cells() == 0 ? 0 : 2;
}

int cmd_patterns(const std::string& config, const std::string& kind, const std::string& finger, double rate,
                 double duration, double amplitude, const std::string& out) {
  const Config c = config_or_default(config);
  const Station& st = c.session.trial.stations[parse_finger(finger) == Finger::kIndex ? 0 : 1];
  PatternSpec spec = PatternSpec::defaults(parse_pattern_kind(kind), st.target.center);
  if (duration > 0) spec.duration = duration;
  if (amplitude > 0) spec.amplitude = amplitude;
  const auto samples = sample_pattern(spec, rate, st.target);
  std::ofstream file;
  if (!out.empty()) file = open_out(out);
  std::ostream& os = out.empty() ? std::cout : file;
  os << "t_s,up_x_mm,up_y_mm,lo_x_mm,lo_y_mm\n";
  for (const auto& s : samples)
    os << s.t << ',' << s.upper.x << ',' << s.upper.y << ',' << s.lower.x << ',' << s.lower.y << '\n';
  std::cerr << samples.size() << " samples, classified as " << to_string(classify_pattern(samples)) << '\n';
  return 0;
}

struct RunTrialsArgs {
  std::string config;
  std::string conditions = "VF,VF+GF,VF+TF,VF+GF+TF";
  std::string op = "scripted";
  std::uint64_t seed = 0;
  std::string out = "results.csv";
  std::string summary;
  std::string trial_log;
  std::string device_log;
};

int cmd_run_trials(const RunTrialsArgs& a) {
  const Config c = config_or_default(a.config);
  const auto conditions = parse_conditions(a.conditions);
  const std::string out_dir = std::filesystem::path(a.out).parent_path().string();
  for (const auto& dir : {a.trial_log, a.device_log, out_dir})
    if (!dir.empty()) std::filesystem::create_directories(dir);

  std::vector<TrialResult> results;
  for (const auto& cond : conditions) {
    for (const auto& cfg :
         build_trial_schedule(cond, derive_seed(a.seed, condition_index(cond)), c.session.protocol)) {
      std::ofstream dev;
      if (!a.device_log.empty()) {
        dev = open_out(a.device_log + "/" + trial_stem(cfg) + "_device.csv");
        Device::write_log_header(dev);
      }
      std::vector<TrialRecord> history;
      results.push_back(run_trial(cfg, c.op, c.session.trial, nullptr, a.trial_log.empty() ? nullptr : &history,
                                  [&](const Trial& t) {
                                    if (dev.is_open()) t.device().write_log_row(dev);
                                  }));
      if (!a.trial_log.empty()) {
        auto f = open_out(a.trial_log + "/" + trial_stem(cfg) + "_trial.csv");
        Trial::write_log_header(f);
        for (const auto& r : history) Trial::write_log_row(f, r);
      }
    }
  }

  {
    auto f = open_out(a.out);
    write_results_csv(f, results);
  }
  const std::string summary = !a.summary.empty() ? a.summary : (std::filesystem::path(out_dir) / "summary.json").string();
  open_out(summary) << summary_json(results).dump(2) << '\n';
  print_summary(results);
  std::cout << "wrote " << a.out << " and " << summary << '\n';
  return 0;
}

struct ServeArgs {
  std::string config;
  std::string address = "127.0.0.1";
  unsigned short port = 8765;
  std::uint64_t seed = 0;
  std::string condition = "VF+GF+TF";
  std::string ui_dir;
  std::string command_log;
  std::string results;
  double duration = 0.0;
};

int cmd_serve(const ServeArgs& a) {
  Config c = config_or_default(a.config);
  c.session.seed = a.seed;
  c.session.condition = parse_condition(a.condition);
  ServerParams sp;
  sp.address = a.address;
  sp.port = a.port;
  sp.ui_dir = a.ui_dir;
  TeleopServer server(c.session, sp, [](const std::string& m) { std::cerr << m << '\n'; });
  server.start();
  std::cout << "listening on " << a.address << ':' << server.port() << std::endl;

  std::signal(SIGINT, [](int) { g_stop = true; });
  std::signal(SIGTERM, [](int) { g_stop = true; });
  const auto start = std::chrono::steady_clock::now();
  while (!g_stop) {
    std::this_thread::sleep_for(std::chrono::milliseconds(100));
    if (a.duration > 0 && std::chrono::steady_clock::now() - start >= std::chrono::duration<double>(a.duration)) break;
  }
  server.stop();

  server.with_session([&](Session& s) {
    if (!a.command_log.empty()) {
      auto f = open_out(a.command_log);
      s.write_command_log(f);
    }
    if (!a.results.empty()) {
      auto f = open_out(a.results);
      write_results_csv(f, s.results());
    }
    std::cout << s.results().size() << " trials recorded\n";
  });
  return 0;
}

int cmd_replay(const std::string& config, const std::string& log, const std::string& out) {
  const Config c = config_or_default(config);
  std::ifstream in(log);
  if (!in) throw Error(ErrorCode::kInvalidArgument, "cannot open " + log);
  const Session s = Session::replay(in, c.session);
  std::ofstream file;
  if (!out.empty()) file = open_out(out);
  write_results_csv(out.empty() ? std::cout : file, s.results());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cutaneous-feedback teleoperation: linkage kinematics, tactile patterns, pivoting trials"};
  app.require_subcommand(1);
  std::string config;
  app.add_option("--config", config, "JSON configuration file")->check(CLI::ExistingFile);

  auto* ws = app.add_subcommand("workspace", "Rasterise a station's reachable workspace");
  std::string ws_finger = "index", ws_out;
  double ws_res = 0.25;
  ws->add_option("--finger", ws_finger)->check(CLI::IsMember({"index", "thumb"}));
  ws->add_option("--resolution", ws_res, "cell size in mm")->check(CLI::PositiveNumber);
  ws->add_option("--out", ws_out, "raster CSV");

  auto* pat = app.add_subcommand("patterns", "Sample a tactile pattern");
  std::string pat_kind = "stretch", pat_finger = "index", pat_out;
  double pat_rate = 100.0, pat_duration = 0.0, pat_amplitude = 0.0;
  pat->add_option("--kind", pat_kind)->check(CLI::IsMember({"stretch", "slip", "twist"}));
  pat->add_option("--finger", pat_finger)->check(CLI::IsMember({"index", "thumb"}));
  pat->add_option("--rate", pat_rate, "Hz")->check(CLI::PositiveNumber);
  pat->add_option("--duration", pat_duration, "s");
  pat->add_option("--amplitude", pat_amplitude, "mm");
  pat->add_option("--out", pat_out, "CSV, stdout when omitted");

  auto* run = app.add_subcommand("run-trials", "Run the protocol with the scripted operator");
  RunTrialsArgs ra;
  run->add_option("--conditions", ra.conditions, "comma-separated, e.g. VF,VF+GF+TF");
  run->add_option("--operator", ra.op)->check(CLI::IsMember({"scripted"}));
  run->add_option("--seed", ra.seed);
  run->add_option("--out", ra.out, "results CSV");
  run->add_option("--summary", ra.summary, "summary JSON (default: summary.json beside --out)");
  run->add_option("--trial-log", ra.trial_log, "directory for per-trial physics CSVs");
  run->add_option("--device-log", ra.device_log, "directory for per-trial device CSVs");

  auto* srv = app.add_subcommand("serve", "Run the teleop server");
  ServeArgs sa;
  srv->add_option("--address", sa.address);
  srv->add_option("--port", sa.port);
  srv->add_option("--seed", sa.seed);
  srv->add_option("--condition", sa.condition)->check(CLI::IsMember({"VF", "VF+GF", "VF+TF", "VF+GF+TF"}));
  srv->add_option("--ui-dir", sa.ui_dir)->check(CLI::ExistingDirectory);
  srv->add_option("--command-log", sa.command_log, "write the applied command log here on exit");
  srv->add_option("--results", sa.results, "write the recorded trials CSV here on exit");
  srv->add_option("--duration", sa.duration, "stop after this many seconds (default: until SIGINT)");

  auto* rep = app.add_subcommand("replay", "Replay a server command log into a fresh session");
  std::string rep_log, rep_out;
  rep->add_option("--log", rep_log)->required()->check(CLI::ExistingFile);
  rep->add_option("--out", rep_out, "results CSV, stdout when omitted");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*ws) return cmd_workspace(config, ws_finger, ws_res, ws_out);
    if (*pat) return cmd_patterns(config, pat_kind, pat_finger, pat_rate, pat_duration, pat_amplitude, pat_out);
    if (*run) return cmd_run_trials(ra);
    if (*srv) return cmd_serve(sa);
    if (*rep) return cmd_replay(config, rep_log, rep_out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <thread>

#include "CLI11.hpp"
#include "fieldswarm/harness/runner.hpp"

namespace fs = std::filesystem;
using namespace fieldswarm::harness;

namespace {

struct RunOptions {
  std::string scenario;
  std::optional<std::uint64_t> seed;
  std::optional<int> replications;
  std::optional<double> loss;
  std::optional<double> noise;
  std::optional<double> kill;
  std::optional<double> kill_time;
  std::optional<double> duration;
  std::string out = "out";
  bool full_sweep = false;
  unsigned jobs = 0;
};

// A file path loads `key = value` settings on top of the preset its `name`
// selects (or the defaults); anything else is a preset name.
ScenarioConfig load(const std::string& scenario) {
  if (!fs::is_regular_file(scenario)) return preset(scenario);
  ScenarioConfig probe = load_scenario_file(scenario);
  ScenarioConfig base;
  const auto& names = known_programs();
  if (std::find(names.begin(), names.end(), probe.name) != names.end()) base = preset(probe.name);
  return load_scenario_file(scenario, base);
}

ScenarioConfig configure(const RunOptions& o) {
  ScenarioConfig cfg = load(o.scenario);
  if (o.replications) cfg.replications = *o.replications;
  if (o.seed || o.replications) {
    cfg.seeds.clear();
    const std::uint64_t first = o.seed.value_or(1);
    for (int i = 0; i < cfg.replications; ++i) cfg.seeds.push_back(first + static_cast<std::uint64_t>(i));
  }
  if (o.loss) cfg.faults.loss = *o.loss;
  if (o.noise) cfg.faults.noise = *o.noise;
  if (o.kill) cfg.faults.kill_fraction = *o.kill;
  if (o.kill_time) cfg.faults.kill_time = *o.kill_time;
  if (o.duration) cfg.duration = *o.duration;
  cfg.resolve_seeds();
  cfg.validate();
  return cfg;
}

std::string tag(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

void run_one(const ScenarioConfig& cfg, const fs::path& dir, unsigned jobs) {
  const auto runs = run_scenario(cfg, dir, jobs);
  std::cout << cfg.name << ": " << runs.size() << " replication(s), D=" << cfg.faults.loss
            << " P=" << cfg.faults.noise << " K=" << cfg.faults.kill_fraction << " -> " << dir.string() << "\n";
}

int run(const RunOptions& o) {
  const ScenarioConfig cfg = configure(o);
  const unsigned jobs = o.jobs > 0 ? o.jobs : std::max(1u, std::thread::hardware_concurrency());
  if (!o.full_sweep) {
    run_one(cfg, o.out, jobs);
    return 0;
  }
  // Every loss / noise / kill combination, with the kill at 2000 s.
  for (double d : {0.0, 0.1, 0.2, 0.4, 0.7})
    for (double p : {0.0, 1.0, 5.0, 10.0})
      for (double k : {0.0, 0.1, 0.2, 0.3}) {
        ScenarioConfig c = cfg;
        c.faults.loss = d;
        c.faults.noise = p;
        c.faults.kill_fraction = k;
        c.faults.kill_time = 2000.0;
        c.validate();
        run_one(c, fs::path(o.out) / ("D" + tag(d) + "_P" + tag(p) + "_K" + tag(k)), jobs);
      }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"fieldswarm: aggregate swarm simulation runner"};
  app.require_subcommand(1);
  RunOptions o;
  auto* cmd = app.add_subcommand("run", "Run a scenario and write metrics CSV files");
  cmd->add_option("--scenario", o.scenario, "Preset name or scenario file")->required();
  cmd->add_option("--seed", o.seed, "First seed; replications use consecutive seeds");
  cmd->add_option("--replications", o.replications, "Number of replications");
  cmd->add_option("--loss", o.loss, "Message loss probability D");
  cmd->add_option("--noise", o.noise, "Position noise standard deviation P (m)");
  cmd->add_option("--kill", o.kill, "Fraction K of devices killed at the kill time");
  cmd->add_option("--kill-time", o.kill_time, "Kill time (s)");
  cmd->add_option("--duration", o.duration, "Simulated duration (s)");
  cmd->add_option("--out", o.out, "Output directory");
  cmd->add_option("--jobs", o.jobs, "Replications run in parallel (default: hardware threads)");
  cmd->add_flag("--full-sweep", o.full_sweep, "Run every loss, noise and kill combination");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    return run(o);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const InvariantBreach& e) {
    std::cerr << "invariant breach: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

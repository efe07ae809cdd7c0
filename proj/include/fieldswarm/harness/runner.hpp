#pragma once

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "fieldswarm/harness/scenarios.hpp"

namespace fieldswarm::harness {

/// A runtime invariant was violated (CLI exit code 3).
class InvariantBreach : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct MetricsRecord {
  double time = 0.0;
  std::vector<std::optional<double>> values;
};

struct ReplicationResult {
  std::uint64_t seed = 0;
  std::vector<std::string> metrics;
  std::vector<MetricsRecord> records;
  std::string events;  // event-structure dump when recording is on
};

using SampleObserver = std::function<void(const Scenario&, double time)>;

/// Runs one seed to `duration`, sampling metrics once per simulated second.
inline ReplicationResult run_replication(const ScenarioConfig& cfg, std::uint64_t seed,
                                         const SampleObserver& observer = {}) {
  auto s = build_scenario(cfg, seed);
  ReplicationResult out;
  out.seed = seed;
  out.metrics = s->metric_names;
  const auto ticks = static_cast<long>(std::floor(cfg.duration + 1e-9));
  for (long k = 0; k <= ticks; ++k) {
    const double t = static_cast<double>(k);
    s->world.run_until(t, s->program);
    for (const auto& d : s->world.devices())
      if (!d.true_position.finite())
        throw InvariantBreach("non-finite position for device " + std::to_string(d.id) + " at t=" +
                              std::to_string(t));
    MetricsRecord rec{t, s->sample(s->world)};
    for (const auto& v : rec.values)
      if (v && !std::isfinite(*v)) throw InvariantBreach("non-finite metric at t=" + std::to_string(t));
    out.records.push_back(std::move(rec));
    if (observer) observer(*s, t);
  }
  if (cfg.recordEvents) out.events = s->world.events().dump();
  return out;
}

namespace detail {

inline void append_number(std::string& out, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  out += buf;
}

inline std::string csv_header(const std::vector<std::string>& metrics) {
  std::string out = "time";
  for (const auto& m : metrics) out += "," + m;
  return out + "\n";
}

}  // namespace detail

/// `time,<metric>...` with an empty cell for absent values.
inline std::string to_csv(const ReplicationResult& r) {
  std::string out = detail::csv_header(r.metrics);
  for (const auto& rec : r.records) {
    detail::append_number(out, rec.time);
    for (const auto& v : rec.values) {
      out += ',';
      if (v) detail::append_number(out, *v);
    }
    out += '\n';
  }
  return out;
}

/// Per-time arithmetic mean over the replications that have a value.
inline std::vector<MetricsRecord> mean_records(const std::vector<ReplicationResult>& runs) {
  std::vector<MetricsRecord> out;
  if (runs.empty()) return out;
  for (std::size_t i = 0; i < runs.front().records.size(); ++i) {
    MetricsRecord m;
    m.time = runs.front().records[i].time;
    for (std::size_t j = 0; j < runs.front().metrics.size(); ++j) {
      double sum = 0.0;
      int n = 0;
      for (const auto& r : runs)
        if (i < r.records.size() && r.records[i].values[j]) {
          sum += *r.records[i].values[j];
          ++n;
        }
      m.values.push_back(n > 0 ? std::optional<double>(sum / n) : std::nullopt);
    }
    out.push_back(std::move(m));
  }
  return out;
}

inline std::string mean_csv(const std::vector<ReplicationResult>& runs) {
  if (runs.empty()) return "time\n";
  ReplicationResult mean;
  mean.metrics = runs.front().metrics;
  mean.records = mean_records(runs);
  return to_csv(mean);
}

/// Runs every seed (in parallel when jobs > 1); results keep seed order.
inline std::vector<ReplicationResult> run_all(ScenarioConfig cfg, unsigned jobs = 1) {
  cfg.resolve_seeds();
  cfg.validate();
  build_scenario(cfg, cfg.seeds.front());  // fail on bad configuration before any run
  std::vector<ReplicationResult> results(cfg.seeds.size());
  std::vector<std::exception_ptr> errors(cfg.seeds.size());
  jobs = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(cfg.seeds.size())));
  auto worker = [&](unsigned first) {
    for (std::size_t i = first; i < cfg.seeds.size(); i += jobs) {
      try {
        results[i] = run_replication(cfg, cfg.seeds[i]);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  if (jobs == 1) {
    worker(0);
  } else {
    std::vector<std::thread> pool;
    for (unsigned j = 0; j < jobs; ++j) pool.emplace_back(worker, j);
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return results;
}

inline void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  f << content;
}

/// Writes metrics_<scenario>_<seed>.csv per seed, mean_<scenario>.csv and,
/// when recording, events_<scenario>_<seed>.txt. Returns the written paths.
inline std::vector<std::filesystem::path> write_outputs(const ScenarioConfig& cfg,
                                                        const std::vector<ReplicationResult>& runs,
                                                        const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::vector<std::filesystem::path> written;
  for (const auto& r : runs) {
    auto p = dir / ("metrics_" + cfg.name + "_" + std::to_string(r.seed) + ".csv");
    write_file(p, to_csv(r));
    written.push_back(p);
    if (cfg.recordEvents) {
      auto e = dir / ("events_" + cfg.name + "_" + std::to_string(r.seed) + ".txt");
      write_file(e, r.events);
      written.push_back(e);
    }
  }
  auto m = dir / ("mean_" + cfg.name + ".csv");
  write_file(m, mean_csv(runs));
  written.push_back(m);
  return written;
}

inline std::vector<ReplicationResult> run_scenario(const ScenarioConfig& cfg, const std::filesystem::path& dir,
                                                   unsigned jobs = 1) {
  auto runs = run_all(cfg, jobs);
  ScenarioConfig resolved = cfg;
  resolved.resolve_seeds();
  write_outputs(resolved, runs, dir);
  return runs;
}

}  // namespace fieldswarm::harness

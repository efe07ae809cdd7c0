#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "fieldswarm/engine.hpp"

namespace fieldswarm::harness {

/// Raised for invalid scenario configuration (CLI exit code 2).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ScenarioConfig {
  std::string name = "circle";
  std::string program;  // block composition id; empty means `name`
  int gridRows = 7;
  int gridCols = 7;
  double areaSize = 1000.0;
  double commRange = 200.0;
  double maxSpeed = 20.0 / 3.6;
  double duration = 600.0;
  int replications = 4;
  std::vector<std::uint64_t> seeds;
  FaultConfig faults;
  std::map<std::string, double> params;  // program parameters
  std::vector<std::string> metrics;
  double epsilon = 5.0;
  double jitter = 0.15;  // lattice deformation, fraction of the cell size
  bool recordEvents = false;

  const std::string& program_id() const { return program.empty() ? name : program; }

  double param(const std::string& key, double fallback) const {
    auto it = params.find(key);
    return it == params.end() ? fallback : it->second;
  }

  /// Fills seeds 1..replications when none were given.
  void resolve_seeds() {
    if (seeds.empty())
      for (int i = 1; i <= replications; ++i) seeds.push_back(static_cast<std::uint64_t>(i));
    replications = static_cast<int>(seeds.size());
  }

  void validate() const {
    auto positive = [](double v, const char* what) {
      if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError(std::string(what) + " must be a positive number");
    };
    if (name.empty()) throw ConfigError("name must not be empty");
    if (gridRows <= 0 || gridCols <= 0) throw ConfigError("gridRows and gridCols must be positive");
    positive(areaSize, "areaSize");
    positive(commRange, "commRange");
    positive(maxSpeed, "maxSpeed");
    positive(duration, "duration");
    positive(epsilon, "epsilon");
    if (replications <= 0) throw ConfigError("replications must be positive");
    if (!seeds.empty() && static_cast<int>(seeds.size()) != replications)
      throw ConfigError("replications must equal the number of seeds");
    if (!(jitter >= 0.0 && jitter < 0.5)) throw ConfigError("jitter must be in [0, 0.5)");
    try {
      faults.validate();
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
  }
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream in(s);
  std::string item;
  while (std::getline(in, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

inline double parse_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw ConfigError("bad number for " + key + ": '" + v + "'");
  }
}

inline long long parse_int(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const long long i = std::stoll(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return i;
  } catch (const std::exception&) {
    throw ConfigError("bad integer for " + key + ": '" + v + "'");
  }
}

}  // namespace detail

/// Applies one `key = value` setting. Program parameters use `program.<name>`.
inline void apply_setting(ScenarioConfig& cfg, const std::string& key, const std::string& value) {
  using detail::parse_double;
  using detail::parse_int;
  if (key == "name") cfg.name = value;
  else if (key == "program") cfg.program = value;
  else if (key == "gridRows") cfg.gridRows = static_cast<int>(parse_int(key, value));
  else if (key == "gridCols") cfg.gridCols = static_cast<int>(parse_int(key, value));
  else if (key == "areaSize") cfg.areaSize = parse_double(key, value);
  else if (key == "commRange") cfg.commRange = parse_double(key, value);
  else if (key == "maxSpeed") cfg.maxSpeed = parse_double(key, value);
  else if (key == "duration") cfg.duration = parse_double(key, value);
  else if (key == "replications") cfg.replications = static_cast<int>(parse_int(key, value));
  else if (key == "seeds") {
    cfg.seeds.clear();
    for (const auto& s : detail::split_list(value)) {
      const long long v = parse_int(key, s);
      if (v < 0) throw ConfigError("seeds must be non-negative");
      cfg.seeds.push_back(static_cast<std::uint64_t>(v));
    }
  } else if (key == "faults.loss") cfg.faults.loss = parse_double(key, value);
  else if (key == "faults.noise") cfg.faults.noise = parse_double(key, value);
  else if (key == "faults.kill") cfg.faults.kill_fraction = parse_double(key, value);
  else if (key == "faults.killTime") cfg.faults.kill_time = parse_double(key, value);
  else if (key == "metrics") cfg.metrics = detail::split_list(value);
  else if (key == "epsilon") cfg.epsilon = parse_double(key, value);
  else if (key == "jitter") cfg.jitter = parse_double(key, value);
  else if (key == "recordEvents") {
    if (value != "true" && value != "false") throw ConfigError("recordEvents must be true or false");
    cfg.recordEvents = value == "true";
  } else if (key.rfind("program.", 0) == 0 && key.size() > 8) cfg.params[key.substr(8)] = parse_double(key, value);
  else throw ConfigError("unknown key: " + key);
}

/// Parses `key = value` lines; `#` starts a comment.
inline ScenarioConfig parse_scenario(const std::string& text, ScenarioConfig base = {}) {
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
    apply_setting(base, detail::trim(line.substr(0, eq)), detail::trim(line.substr(eq + 1)));
  }
  return base;
}

inline ScenarioConfig load_scenario_file(const std::string& path, ScenarioConfig base = {}) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot read scenario file " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_scenario(ss.str(), std::move(base));
}

}  // namespace fieldswarm::harness

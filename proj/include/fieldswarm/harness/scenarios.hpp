#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <memory>
#include <numbers>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "fieldswarm/blocks/coordination.hpp"
#include "fieldswarm/blocks/motion.hpp"
#include "fieldswarm/blocks/resilient.hpp"
#include "fieldswarm/blocks/structure.hpp"
#include "fieldswarm/engine.hpp"
#include "fieldswarm/harness/config.hpp"
#include "fieldswarm/harness/metrics.hpp"

namespace fieldswarm::harness {

/// Independent RNG streams owned by the harness (the engine uses 1..4).
enum HarnessStream : std::uint64_t { kPlacement = 11, kPreferences = 12, kDangers = 13 };

inline std::map<DeviceId, Position> alive_positions(const World& w) {
  std::map<DeviceId, Position> out;
  for (const auto& d : w.devices())
    if (d.alive) out[d.id] = d.true_position;
  return out;
}

/// Regular lattice over the area with seeded uniform jitter of +-jitter*cell;
/// ids row-major from 0.
inline std::vector<Position> jittered_lattice(int rows, int cols, double area, double jitter, std::uint64_t seed) {
  std::mt19937_64 rng(fieldswarm::detail::stream_seed(seed, kPlacement));
  const double cell = area / static_cast<double>(std::max(rows, cols));
  std::uniform_real_distribution<double> j(-jitter * cell, jitter * cell);
  std::vector<Position> out;
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) {
      const double dx = j(rng);
      const double dy = j(rng);
      out.push_back({(c + 0.5) * cell + dx, (r + 0.5) * cell + dy, 0.0});
    }
  return out;
}

inline DeviceId lattice_center(int rows, int cols) { return static_cast<DeviceId>((rows / 2) * cols + cols / 2); }

inline std::optional<ShapeKind> shape_kind(const std::string& program) {
  if (program == "circle") return ShapeKind::Circle;
  if (program == "vshape") return ShapeKind::VShape;
  if (program == "line") return ShapeKind::Line;
  return std::nullopt;
}

inline ShapeSpec shape_spec(const ScenarioConfig& cfg) {
  ShapeSpec s;
  s.kind = shape_kind(cfg.program_id()).value_or(ShapeKind::Circle);
  s.radius = cfg.param("radius", 60.0);
  s.spacing = cfg.param("spacing", 20.0);
  s.angle = cfg.param("angle", 60.0);
  return s;
}

inline DeviceId scenario_leader(const ScenarioConfig& cfg) {
  return static_cast<DeviceId>(cfg.param("leader", static_cast<double>(lattice_center(cfg.gridRows, cfg.gridCols))));
}

/// Fault-free targets: the leader's alive connected component, assigned
/// with the same slot rule as the live program, anchored at the leader's
/// true position.
inline std::map<DeviceId, Position> shadow_targets(const World& w, DeviceId leader, const ShapeSpec& shape) {
  std::map<DeviceId, Position> targets;
  const auto positions = alive_positions(w);
  if (!positions.count(leader)) return targets;
  const auto component = connected_component(positions, leader, w.config().comm_range);
  const auto a = assign_slots(leader, std::vector<DeviceId>(component.begin(), component.end()), shape);
  for (const auto& [id, offset] : a.offsets) targets[id] = positions.at(leader) + offset;
  return targets;
}

/// Danger site of the rescue case study.
struct DangerSite {
  Position position;
  SimTime spawn = 0.0;
  std::optional<SimTime> resolved;
};

struct RescueState {
  std::vector<DangerSite> sites;
  std::set<DeviceId> healers;

  int in_danger(SimTime t) const {
    int n = 0;
    for (const auto& s : sites)
      if (s.spawn <= t && (!s.resolved || *s.resolved > t)) ++n;
    return n;
  }
};

/// A fully wired world plus its metric sampler.
struct Scenario {
  explicit Scenario(EngineConfig cfg) : world(std::move(cfg)) {}

  World world;
  AggregateProgram program;
  std::vector<std::string> metric_names;
  std::function<std::vector<std::optional<double>>(const World&)> sample;
  DeviceId leader = -1;
  std::shared_ptr<RescueState> rescue;
};

inline std::vector<std::string> default_metrics(const std::string& program) {
  if (program == "circle") return {"formationError", "leaderDistance", "nearest4Distance"};
  if (program == "vshape") return {"formationError", "angularAlignment"};
  if (program == "line") return {"formationError", "verticalVariation"};
  if (program == "separation") return {"nearest4Distance"};
  if (program == "consensus") return {"distinctChoices", "agreeWithLeader"};
  if (program == "rescue") return {"intraTeamDistance", "minPairwiseDistance", "inDangerCount"};
  throw ConfigError("unknown program: " + program);
}

inline const std::vector<std::string>& known_programs() {
  static const std::vector<std::string> names{"circle", "vshape", "line", "separation", "consensus", "rescue"};
  return names;
}

/// Preset configuration for a named scenario.
inline ScenarioConfig preset(const std::string& name) {
  ScenarioConfig cfg;
  cfg.name = name;
  if (name == "circle" || name == "vshape" || name == "line" || name == "separation") {
    cfg.duration = 600.0;
  } else if (name == "consensus") {
    cfg.duration = 300.0;
    cfg.replications = 8;
  } else if (name == "rescue") {
    cfg.areaSize = 500.0;
    cfg.commRange = 100.0;
    cfg.duration = 1800.0;
  } else {
    throw ConfigError("unknown scenario: " + name);
  }
  return cfg;
}

namespace detail {

inline bool vec_less(const Vec3& a, const Vec3& b) {
  return std::tie(a.x, a.y, a.z) < std::tie(b.x, b.y, b.z);
}

inline std::vector<Vec3> union_positions(std::vector<Vec3> a, const std::vector<Vec3>& b) {
  a.insert(a.end(), b.begin(), b.end());
  std::sort(a.begin(), a.end(), vec_less);
  a.erase(std::unique(a.begin(), a.end()), a.end());
  return a;
}

struct RescueParams {
  double radius = 50.0;
  double minimum_distance = 30.0;
  double confidence = 10.0;
  double avoid_distance = 15.0;
  double heal_radius = 10.0;
  double wander_speed = 0.5;
  double heal_speed = 0.5;
  double speed_scale = 20.0 / 3.6;  // m/s per unit of velocity
  Position area_min;
  Position area_max;
};

/// One team's repeated mission: form the circle, wander in formation, move
/// the formation to the nearest reported danger, heal it.
inline Vec3 team_plan(Round& r, DeviceId healer_id, const RescueParams& p) {
  const bool leading = healer_id == r.mid();
  const auto leader_position = broadcast(r, leading, r.position());
  const bool close = leader_position && r.position().distance(*leader_position) <= p.radius + p.confidence;
  const bool all_close = collect_cast(r, leading, close, [](bool a, bool b) { return a && b; }, true);
  const bool circle_formed = broadcast(r, leading, all_close).value_or(false);

  const auto sensed = r.sense<std::vector<Vec3>>("danger");
  const auto dangers = collect_cast(r, leading, sensed, union_positions, std::vector<Vec3>{});
  const bool danger_found = broadcast(r, leading, !dangers.empty()).value_or(false);
  std::optional<Vec3> nearest;
  if (leading)
    for (const auto& d : dangers)
      if (!nearest || r.position().distance(d) < r.position().distance(*nearest)) nearest = d;
  const auto in_danger = broadcast(r, leading, nearest).value_or(std::nullopt);
  const bool reached = broadcast(r, leading, nearest && r.position().distance(*nearest) <= p.heal_radius).value_or(false);

  // The mission only steers the healer. The wander waypoint and the circle
  // formation live outside it so plan switches do not reset them.
  const Vec3 wander = r.branch(leading, [&] { return explore(r, p.area_min, p.area_max) * p.wander_speed; },
                               [] { return Vec3{}; });
  auto toward_danger = [&] { return leading && in_danger ? go_to(r, *in_danger) * p.heal_speed : Vec3{}; };
  Mission m;
  m.mode = MissionMode::Repeat;
  m.plans.push_back({[] { return Vec3{}; }, [&] { return circle_formed; }});
  m.plans.push_back({[&] { return wander; }, [&] { return danger_found; }});
  m.plans.push_back({toward_danger, [&] { return reached; }});
  m.plans.push_back({toward_danger, [&] { return !danger_found; }});
  const Vec3 lead = run_mission(r, m);
  ShapeSpec circle{ShapeKind::Circle, 0.0, 0.0, p.radius, 5.0, SlotAssignment::GreedyNearest};
  return form_shape(r, leading, circle, lead);
}

}  // namespace detail

/// Find-and-rescue program: healer-led teams, per-team mission, global
/// separation; the sum is clamped to unit norm.
inline AggregateProgram build_rescue_program(const detail::RescueParams& p) {
  return make_program([p](Round& r) {
    const bool healer = r.sense<bool>("healer");
    const Team team = team_formation(r, healer, p.minimum_distance, [&](DeviceId leader) {
      return is_team_formed(r, leader == r.mid(), p.minimum_distance + p.confidence);
    });
    const Vec3 velocity = r.rep(Vec3{}, [&](const Vec3& v) {
      const Vec3 mission = r.branch(
          team.leader.has_value(),
          [&] { return team.inside_team(r, [&](DeviceId id) { return detail::team_plan(r, id, p); }); },
          [&] { return explore(r, p.area_min, p.area_max) * p.wander_speed; });
      return (mission + separation(r, v, NeighbourhoodQuery::within_range(p.avoid_distance))).clamped(1.0);
    });
    r.set_actuation({velocity * p.speed_scale, Modality::RoundBased});
    // The output is the team leader, so metrics can see team membership.
    return team.leader.value_or(-1);
  });
}

inline EngineConfig engine_config(const ScenarioConfig& cfg, std::uint64_t seed) {
  EngineConfig e;
  e.comm_range = cfg.commRange;
  e.max_speed = cfg.maxSpeed;
  e.speed_scale = cfg.maxSpeed;
  e.faults = cfg.faults;
  e.seed = seed;
  e.record_events = cfg.recordEvents;
  return e;
}

namespace detail {

inline void check_metrics(const std::vector<std::string>& wanted, const std::vector<std::string>& available,
                          const std::string& program) {
  for (const auto& m : wanted)
    if (std::find(available.begin(), available.end(), m) == available.end())
      throw ConfigError("metric " + m + " is not available for program " + program);
}

inline std::unique_ptr<Scenario> build_lattice_shape(const ScenarioConfig& cfg, std::uint64_t seed) {
  auto s = std::make_unique<Scenario>(engine_config(cfg, seed));
  const auto positions = jittered_lattice(cfg.gridRows, cfg.gridCols, cfg.areaSize, cfg.jitter, seed);
  s->leader = scenario_leader(cfg);
  if (s->leader < 0 || s->leader >= static_cast<DeviceId>(positions.size()))
    throw ConfigError("program.leader is not a device of the lattice");
  s->world.mutable_config().protected_devices.insert(s->leader);
  for (std::size_t i = 0; i < positions.size(); ++i) s->world.add_device(static_cast<DeviceId>(i), positions[i]);

  const DeviceId leader = s->leader;
  const std::string program = cfg.program_id();
  if (program == "separation") {
    const double distance = cfg.param("targetDistance", 30.0);
    s->program = make_program([leader, distance](Round& r) {
      return team_formation(r, r.mid() == leader, distance, [](DeviceId) { return false; }).velocity;
    });
  } else {
    const ShapeSpec shape = shape_spec(cfg);
    shape.validate();
    s->program = make_program([leader, shape](Round& r) { return form_shape(r, r.mid() == leader, shape); });
  }

  const ShapeSpec shape = shape_spec(cfg);
  const double epsilon = cfg.epsilon;
  const auto names = cfg.metrics;
  s->sample = [leader, shape, epsilon, names](const World& w) {
    const auto alive = alive_positions(w);
    std::vector<Position> followers;
    std::vector<Position> all;
    for (const auto& [id, p] : alive) {
      all.push_back(p);
      if (id != leader) followers.push_back(p);
    }
    const bool has_leader = alive.count(leader) != 0;
    std::vector<std::optional<double>> out;
    for (const auto& m : names) {
      if (m == "formationError") {
        out.push_back(has_leader ? std::optional<double>(formation_error(alive, shadow_targets(w, leader, shape), epsilon))
                                 : std::nullopt);
      } else if (m == "leaderDistance") {
        out.push_back(has_leader ? leader_distance(alive.at(leader), followers) : std::nullopt);
      } else if (m == "angularAlignment") {
        out.push_back(has_leader ? angular_alignment(alive.at(leader), followers) : std::nullopt);
      } else if (m == "verticalVariation") {
        out.push_back(has_leader ? vertical_variation(alive.at(leader), followers) : std::nullopt);
      } else {
        out.push_back(nearest4_distance(all));
      }
    }
    return out;
  };
  return s;
}

inline std::unique_ptr<Scenario> build_consensus(const ScenarioConfig& cfg, std::uint64_t seed) {
  auto s = std::make_unique<Scenario>(engine_config(cfg, seed));
  const auto positions = jittered_lattice(cfg.gridRows, cfg.gridCols, cfg.areaSize, cfg.jitter, seed);
  s->leader = scenario_leader(cfg);
  const auto k = static_cast<std::size_t>(cfg.param("options", 4.0));
  if (k < 2) throw ConfigError("program.options must be at least 2");
  const double leader_weight = cfg.param("leaderWeight", 50.0);
  const double upstream_weight = cfg.param("upstreamWeight", 10.0);
  const double mixing = cfg.param("mixing", 0.2);
  const double speed = cfg.param("speed", 0.1);
  const double spread = cfg.param("preferenceSpread", 1.0);
  if (!(mixing > 0.0 && mixing <= 1.0)) throw ConfigError("program.mixing must be in (0,1]");
  const auto leader_option = static_cast<std::int64_t>(
      cfg.param("leaderOption", 0.0));
  if (leader_option < 0 || leader_option >= static_cast<std::int64_t>(k))
    throw ConfigError("program.leaderOption out of range");

  std::mt19937_64 rng(fieldswarm::detail::stream_seed(seed, kPreferences));
  std::uniform_real_distribution<double> wobble(-spread / static_cast<double>(k), spread / static_cast<double>(k));
  s->world.mutable_config().protected_devices.insert(s->leader);
  for (std::size_t i = 0; i < positions.size(); ++i) {
    auto& d = s->world.add_device(static_cast<DeviceId>(i), positions[i]);
    std::vector<double> prefs(k, 1.0 / static_cast<double>(k));
    if (d.id == s->leader) {
      std::fill(prefs.begin(), prefs.end(), 0.0);
      prefs[static_cast<std::size_t>(leader_option)] = 1.0;
    } else {
      for (auto& p : prefs) p = std::max(0.0, p + wobble(rng));
      prefs = normalized_distribution(prefs);
    }
    d.sensors["preferences"] = Codec<std::vector<double>>::encode(prefs);
  }
  const DeviceId leader = s->leader;
  const double max_speed = cfg.maxSpeed;
  // Neighbours closer to the leader along the gradient weigh more, so the
  // leader's choice flows outwards instead of meeting entrenched domains.
  s->program = [leader, leader_weight, upstream_weight, mixing, speed, max_speed, k](Round& r) -> Value {
    const auto prefs = r.sense<std::vector<double>>("preferences");
    const double distance = gradient(r, r.mid() == leader);
    using Upstream = std::vector<DeviceId>;
    const Upstream upstream = r.foldhood_plus(Upstream{}, [](Upstream a, const Upstream& b) {
      a.insert(a.end(), b.begin(), b.end());
      return a;
    }, [&] {
      const DeviceId who = r.nbr_value(r.mid());
      const double theirs = r.nbr_value(distance);
      return theirs < distance ? Upstream{who} : Upstream{};
    });
    auto weight = [&](DeviceId id) {
      if (id == leader) return leader_weight;
      return std::find(upstream.begin(), upstream.end(), id) != upstream.end() ? upstream_weight : 1.0;
    };
    const int choice = consensus(r, prefs, weight, ConsensusParams{mixing});
    const double a = std::numbers::pi * (2.0 * choice + 1.0) / static_cast<double>(k);
    r.set_actuation({Vec3{std::cos(a), std::sin(a), 0.0} * (speed * max_speed), Modality::RoundBased});
    return Value(static_cast<std::int64_t>(choice));
  };
  const auto names = cfg.metrics;
  s->sample = [leader, leader_option, names](const World& w) {
    std::vector<std::int64_t> choices;
    int agree = 0;
    for (const auto& d : w.devices()) {
      if (!d.alive) continue;
      if (auto c = d.last_output.as_int()) {
        choices.push_back(*c);
        agree += *c == leader_option ? 1 : 0;
      }
    }
    std::vector<std::optional<double>> out;
    for (const auto& m : names) {
      if (choices.empty()) {
        out.emplace_back();
      } else if (m == "distinctChoices") {
        out.emplace_back(distinct_choices(choices));
      } else {
        out.emplace_back(static_cast<double>(agree) / static_cast<double>(choices.size()));
      }
    }
    return out;
  };
  return s;
}

inline std::unique_ptr<Scenario> build_rescue(const ScenarioConfig& cfg, std::uint64_t seed) {
  auto s = std::make_unique<Scenario>(engine_config(cfg, seed));
  const int explorers = static_cast<int>(cfg.param("explorers", 50.0));
  const int healers = static_cast<int>(cfg.param("healers", 5.0));
  if (explorers < 0 || healers <= 0) throw ConfigError("rescue needs explorers >= 0 and healers > 0");
  RescueParams p;
  p.radius = cfg.param("radius", 50.0);
  p.minimum_distance = cfg.param("minimumDistance", 30.0);
  p.confidence = cfg.param("confidence", 10.0);
  p.avoid_distance = cfg.param("avoidDistance", 15.0);
  p.heal_radius = cfg.param("healRadius", 10.0);
  p.wander_speed = cfg.param("wanderSpeed", 0.5);
  p.heal_speed = cfg.param("healSpeed", 0.5);
  p.speed_scale = cfg.maxSpeed;
  p.area_min = {0.0, 0.0, 0.0};
  p.area_max = {cfg.areaSize, cfg.areaSize, 0.0};
  const double detection = cfg.param("detectionRadius", 30.0);
  const double window = cfg.param("dangerWindow", 900.0);
  const double rate = cfg.param("dangerRate", 1.0 / 90.0);

  auto state = std::make_shared<RescueState>();
  std::mt19937_64 place(fieldswarm::detail::stream_seed(seed, kPlacement));
  std::uniform_real_distribution<double> coord(0.0, cfg.areaSize);
  for (int i = 0; i < explorers + healers; ++i) {
    auto& d = s->world.add_device(i, {coord(place), coord(place), 0.0});
    const bool healer = i >= explorers;
    d.sensors["healer"] = Value(healer);
    d.sensors["danger"] = Codec<std::vector<Vec3>>::encode({});
    if (healer) {
      state->healers.insert(d.id);
      s->world.mutable_config().protected_devices.insert(d.id);
    }
  }
  std::mt19937_64 dangers(fieldswarm::detail::stream_seed(seed, kDangers));
  if (rate > 0.0) {
    std::exponential_distribution<double> gap(rate);
    for (double t = gap(dangers); t <= window; t += gap(dangers))
      state->sites.push_back({{coord(dangers), coord(dangers), 0.0}, t, std::nullopt});
  }
  s->rescue = state;

  s->world.set_before_round([state, detection](World& w, DeviceState& d) {
    std::vector<Vec3> seen;
    for (const auto& site : state->sites)
      if (site.spawn <= w.time() && !site.resolved && site.position.distance(d.true_position) <= detection)
        seen.push_back(site.position);
    d.sensors["danger"] = Codec<std::vector<Vec3>>::encode(seen);
  });
  const double heal_radius = p.heal_radius;
  s->world.set_after_round([state, heal_radius](World& w, DeviceState& d) {
    if (!state->healers.count(d.id)) return;
    for (auto& site : state->sites)
      if (site.spawn <= w.time() && !site.resolved && site.position.distance(d.true_position) <= heal_radius)
        site.resolved = w.time();
  });
  s->program = build_rescue_program(p);

  const double range = cfg.commRange;
  const auto names = cfg.metrics;
  s->sample = [state, range, names](const World& w) {
    const auto alive = alive_positions(w);
    std::vector<std::optional<double>> out;
    for (const auto& m : names) {
      if (m == "intraTeamDistance") {
        const auto owner = nearest_source(alive, state->healers, range);
        double sum = 0.0;
        int n = 0;
        for (const auto& [id, leader] : owner) {
          if (id == leader) continue;
          sum += alive.at(id).distance(alive.at(leader));
          ++n;
        }
        out.push_back(n > 0 ? std::optional<double>(sum / n) : std::nullopt);
      } else if (m == "minPairwiseDistance") {
        std::vector<Position> ps;
        for (const auto& [id, pos] : alive) ps.push_back(pos);
        out.push_back(min_pairwise_distance(ps));
      } else {
        out.emplace_back(static_cast<double>(state->in_danger(w.time())));
      }
    }
    return out;
  };
  return s;
}

}  // namespace detail

/// Wires the world, program and sampler of one replication.
inline std::unique_ptr<Scenario> build_scenario(const ScenarioConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  const std::string& program = cfg.program_id();
  const auto available = default_metrics(program);
  std::vector<std::string> metrics = cfg.metrics.empty() ? available : cfg.metrics;
  if (program == "circle" || program == "vshape" || program == "line" || program == "separation") {
    detail::check_metrics(metrics, {"formationError", "leaderDistance", "angularAlignment", "verticalVariation",
                                    "nearest4Distance"},
                          program);
    if (program == "separation")
      detail::check_metrics(metrics, {"leaderDistance", "angularAlignment", "verticalVariation", "nearest4Distance"},
                            program);
  } else {
    detail::check_metrics(metrics, available, program);
  }
  ScenarioConfig local = cfg;
  local.metrics = metrics;
  std::unique_ptr<Scenario> s;
  if (program == "consensus") {
    s = detail::build_consensus(local, seed);
  } else if (program == "rescue") {
    s = detail::build_rescue(local, seed);
  } else {
    s = detail::build_lattice_shape(local, seed);
  }
  s->metric_names = metrics;
  return s;
}

}  // namespace fieldswarm::harness

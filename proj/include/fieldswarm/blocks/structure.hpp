#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <tuple>
#include <utility>
#include <vector>

#include "fieldswarm/blocks/motion.hpp"
#include "fieldswarm/blocks/resilient.hpp"
#include "fieldswarm/round.hpp"

namespace fieldswarm {

/// Followers take the leader's velocity; the leader keeps its own.
inline Vec3 align_with_leader(Round& r, bool leader, const Vec3& velocity) {
  return broadcast(r, leader, velocity).value_or(Vec3{});
}

/// Unit vector toward the nearest leader's perceived position.
inline Vec3 sink_at(Round& r, bool leader) {
  const auto target = broadcast(r, leader, r.position());
  if (leader || !target) return {};
  return (*target - r.position()).normalized();
}

/// Target offsets around an anchor; the anchor itself sits at the origin.
struct FormationPattern {
  std::vector<Vec3> offsets;
  double epsilon = 5.0;

  void validate() const {
    if (!(epsilon > 0.0)) throw std::invalid_argument("formation epsilon must be > 0");
    if (std::find(offsets.begin(), offsets.end(), Vec3{}) == offsets.end())
      throw std::invalid_argument("formation pattern must contain the origin");
    for (std::size_t i = 0; i < offsets.size(); ++i)
      for (std::size_t j = i + 1; j < offsets.size(); ++j)
        if (offsets[i] == offsets[j]) throw std::invalid_argument("formation offsets must be distinct");
  }
};

/// Device → offset mapping; the anchor maps to the origin.
struct FormationAssignment {
  DeviceId anchor = 0;
  std::map<DeviceId, Vec3> offsets;
};

enum class ShapeKind { VShape, Line, Circle };

/// ByRank pairs ascending ids with slots in order; GreedyNearest repeatedly
/// takes the closest free (member, slot) pair.
enum class SlotAssignment { ByRank, GreedyNearest };

struct ShapeSpec {
  ShapeKind kind = ShapeKind::Circle;
  double spacing = 20.0;  // V and line
  double angle = 60.0;    // V opening, degrees
  double radius = 60.0;   // circle
  double member_timeout = 5.0;  // seconds a member may go unreported before losing its slot
  SlotAssignment assignment = SlotAssignment::ByRank;

  void validate() const {
    if (kind == ShapeKind::Circle && !(radius > 0.0)) throw std::invalid_argument("circle radius must be > 0");
    if (kind != ShapeKind::Circle && !(spacing > 0.0)) throw std::invalid_argument("shape spacing must be > 0");
    if (kind == ShapeKind::VShape && !(angle > 0.0 && angle < 180.0))
      throw std::invalid_argument("V angle must be in (0,180)");
  }
};

/// Canonical follower offsets, in slot order. V arms open backwards from the
/// leader's motion (or from -x at rest), alternating arms by depth; lines
/// alternate sides outwards; circles go by angle.
inline std::vector<Vec3> shape_offsets(const ShapeSpec& shape, std::size_t followers, const Vec3& leader_velocity = {}) {
  std::vector<Vec3> out;
  out.reserve(followers);
  switch (shape.kind) {
    case ShapeKind::VShape: {
      Vec3 rear = (-leader_velocity).normalized();
      if (rear == Vec3{}) rear = {-1.0, 0.0, 0.0};
      const double half = shape.angle * std::numbers::pi / 360.0;
      auto rotate = [&](double a) {
        return Vec3{rear.x * std::cos(a) - rear.y * std::sin(a), rear.x * std::sin(a) + rear.y * std::cos(a), 0.0};
      };
      const Vec3 left = rotate(half);
      const Vec3 right = rotate(-half);
      for (std::size_t i = 0; i < followers; ++i) {
        const double depth = static_cast<double>(i / 2 + 1) * shape.spacing;
        out.push_back((i % 2 == 0 ? left : right) * depth);
      }
      break;
    }
    case ShapeKind::Line:
      for (std::size_t i = 0; i < followers; ++i) {
        const double depth = static_cast<double>(i / 2 + 1) * shape.spacing;
        out.push_back({i % 2 == 0 ? depth : -depth, 0.0, 0.0});
      }
      break;
    case ShapeKind::Circle:
      for (std::size_t i = 0; i < followers; ++i) {
        const double a = 2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(followers);
        out.push_back({shape.radius * std::cos(a), shape.radius * std::sin(a), 0.0});
      }
      break;
  }
  return out;
}

/// Pairs members (ascending id, anchor excluded) with slots by rank.
inline FormationAssignment assign_slots(DeviceId anchor, std::vector<DeviceId> members, const ShapeSpec& shape,
                                        const Vec3& leader_velocity = {}) {
  members.erase(std::remove(members.begin(), members.end(), anchor), members.end());
  std::sort(members.begin(), members.end());
  members.erase(std::unique(members.begin(), members.end()), members.end());
  const auto slots = shape_offsets(shape, members.size(), leader_velocity);
  FormationAssignment a;
  a.anchor = anchor;
  a.offsets[anchor] = Vec3{};
  for (std::size_t i = 0; i < members.size(); ++i) a.offsets[members[i]] = slots[i];
  return a;
}

/// Greedy nearest pairing of members to slots around `anchor_position`; ties
/// go to the lower id, then the lower slot index.
inline FormationAssignment assign_slots_nearest(DeviceId anchor, const Position& anchor_position,
                                                const std::map<DeviceId, Position>& members, const ShapeSpec& shape,
                                                const Vec3& leader_velocity = {}) {
  std::vector<std::pair<DeviceId, Position>> others;
  for (const auto& [id, p] : members)
    if (id != anchor) others.emplace_back(id, p);
  const auto slots = shape_offsets(shape, others.size(), leader_velocity);
  std::vector<std::tuple<double, DeviceId, std::size_t, std::size_t>> pairs;
  for (std::size_t m = 0; m < others.size(); ++m)
    for (std::size_t k = 0; k < slots.size(); ++k)
      pairs.emplace_back(others[m].second.distance(anchor_position + slots[k]), others[m].first, k, m);
  std::sort(pairs.begin(), pairs.end());
  FormationAssignment a;
  a.anchor = anchor;
  a.offsets[anchor] = Vec3{};
  std::vector<bool> member_taken(others.size()), slot_taken(slots.size());
  for (const auto& [d, id, k, m] : pairs) {
    if (member_taken[m] || slot_taken[k]) continue;
    member_taken[m] = slot_taken[k] = true;
    a.offsets[id] = slots[k];
  }
  return a;
}

inline FormationPattern pattern_of(const FormationAssignment& a, double epsilon) {
  FormationPattern p;
  p.epsilon = epsilon;
  for (const auto& [id, o] : a.offsets) p.offsets.push_back(o);
  return p;
}

/// Per device: within epsilon of its translated target.
inline std::map<DeviceId, bool> in_formation(const std::map<DeviceId, Position>& positions,
                                             const FormationAssignment& a, double epsilon) {
  std::map<DeviceId, bool> out;
  auto anchor = positions.find(a.anchor);
  for (const auto& [id, offset] : a.offsets) {
    auto p = positions.find(id);
    if (p == positions.end()) continue;
    out[id] = anchor != positions.end() && p->second.distance(anchor->second + offset) <= epsilon;
  }
  return out;
}

/// One device's view of the current formation.
struct FormationStep {
  Vec3 velocity;
  std::optional<Position> target;  // nullopt: not yet assigned
};

namespace detail {

using MemberList = std::vector<std::pair<DeviceId, Position>>;

inline MemberList merge_members(MemberList a, const MemberList& b) {
  MemberList out;
  out.reserve(a.size() + b.size());
  std::merge(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out),
             [](const auto& x, const auto& y) { return x.first < y.first; });
  out.erase(std::unique(out.begin(), out.end(), [](const auto& x, const auto& y) { return x.first == y.first; }),
            out.end());
  return out;
}

}  // namespace detail

/// Pairs members (ascending id, anchor excluded) with the pattern's non-zero
/// offsets in order. Members beyond the last offset stay unassigned.
inline FormationAssignment assign_pattern(DeviceId anchor, std::vector<DeviceId> members,
                                          const FormationPattern& pattern) {
  members.erase(std::remove(members.begin(), members.end(), anchor), members.end());
  std::sort(members.begin(), members.end());
  members.erase(std::unique(members.begin(), members.end()), members.end());
  FormationAssignment a;
  a.anchor = anchor;
  a.offsets[anchor] = Vec3{};
  std::size_t m = 0;
  for (const auto& o : pattern.offsets) {
    if (o == Vec3{}) continue;
    if (m == members.size()) break;
    a.offsets[members[m++]] = o;
  }
  return a;
}

namespace detail {

using Assigner = std::function<FormationAssignment(const std::map<DeviceId, Position>& members)>;

/// Leader gathers its region's members, assigns slots and broadcasts absolute
/// targets; members steer to their target, unassigned ones sink to the leader.
inline FormationStep formation_step(Round& r, bool leader, double member_timeout, const Vec3& leader_velocity,
                                    const Assigner& assign) {
  using Targets = std::vector<std::pair<DeviceId, Position>>;
  const double potential = gradient(r, leader);
  const auto members = collect_cast_along(r, potential, MemberList{{r.mid(), r.position()}}, merge_members,
                                          MemberList{});
  // Collected membership flickers while the tree re-forms under motion, so
  // the leader keeps ids until they have been missing for member_timeout.
  using Seen = std::vector<std::tuple<DeviceId, double, Position>>;
  const Seen seen = r.rep(Seen{}, [&](const Seen& previous) {
    Seen next;
    if (!leader) return next;
    std::map<DeviceId, std::pair<double, Position>> last;
    for (const auto& [id, t, p] : previous) last[id] = {t, p};
    for (const auto& [id, p] : members) last[id] = {r.time(), p};
    for (const auto& [id, e] : last)
      if (r.time() - e.first < member_timeout) next.emplace_back(id, e.first, e.second);
    return next;
  });
  Targets mine;
  if (leader) {
    std::map<DeviceId, Position> positions;
    for (const auto& [id, t, p] : seen) positions[id] = p;
    positions[r.mid()] = r.position();
    for (const auto& [id, o] : assign(positions).offsets) mine.emplace_back(id, r.position() + o);
  }
  using Plan = std::pair<Position, Targets>;
  const auto plan = broadcast(r, leader, Plan{r.position(), mine});
  FormationStep step;
  if (leader) {
    step.velocity = leader_velocity;
    step.target = r.position();
    return step;
  }
  if (!plan) return step;
  auto it = std::lower_bound(plan->second.begin(), plan->second.end(), r.mid(),
                             [](const auto& e, DeviceId id) { return e.first < id; });
  if (it != plan->second.end() && it->first == r.mid()) {
    step.target = it->second;
    step.velocity = go_to(r, it->second);
  } else {
    step.velocity = (plan->first - r.position()).normalized();
  }
  return step;
}

inline std::vector<DeviceId> ids_of(const std::map<DeviceId, Position>& members) {
  std::vector<DeviceId> ids;
  for (const auto& [id, p] : members) ids.push_back(id);
  return ids;
}

}  // namespace detail

inline FormationStep form_shape_step(Round& r, bool leader, const ShapeSpec& shape, const Vec3& leader_velocity = {}) {
  return detail::formation_step(r, leader, shape.member_timeout, leader_velocity,
                                [&](const std::map<DeviceId, Position>& members) {
                                  if (shape.assignment == SlotAssignment::GreedyNearest)
                                    return assign_slots_nearest(r.mid(), r.position(), members, shape,
                                                                leader_velocity);
                                  return assign_slots(r.mid(), detail::ids_of(members), shape, leader_velocity);
                                });
}

/// Explicit-pattern formation; the leader keeps `leader_velocity`.
inline Vec3 form_shape(Round& r, bool leader, const FormationPattern& pattern, const Vec3& leader_velocity = {},
                       double member_timeout = 5.0) {
  return detail::formation_step(r, leader, member_timeout, leader_velocity,
                                [&](const std::map<DeviceId, Position>& members) {
                                  return assign_pattern(r.mid(), detail::ids_of(members), pattern);
                                })
      .velocity;
}

inline Vec3 form_shape(Round& r, bool leader, const ShapeSpec& shape, const Vec3& leader_velocity = {}) {
  return form_shape_step(r, leader, shape, leader_velocity).velocity;
}

inline Vec3 v_shape(Round& r, bool leader, double spacing, double angle, const Vec3& leader_velocity = {}) {
  return form_shape(r, leader, ShapeSpec{ShapeKind::VShape, spacing, angle, 0.0, 5.0}, leader_velocity);
}

inline Vec3 line(Round& r, bool leader, double spacing, const Vec3& leader_velocity = {}) {
  return form_shape(r, leader, ShapeSpec{ShapeKind::Line, spacing, 0.0, 0.0, 5.0}, leader_velocity);
}

inline Vec3 centered_circle(Round& r, bool leader, double radius, const Vec3& leader_velocity = {}) {
  return form_shape(r, leader, ShapeSpec{ShapeKind::Circle, 0.0, 0.0, radius, 5.0}, leader_velocity);
}

/// True at every device of a leader's region when each of them has at least
/// `necessary` neighbours within `target_distance`.
inline bool is_team_formed(Round& r, bool leader, double target_distance, int necessary = 1) {
  const int close = r.foldhood_plus(0, [](int a, int b) { return a + b; }, [&] {
    return r.nbr_range() <= target_distance ? 1 : 0;
  });
  const bool all = collect_cast(r, leader, close >= necessary, [](bool a, bool b) { return a && b; }, true);
  return broadcast(r, leader, all).value_or(false);
}

/// Leader-anchored subgroup. insideTeam runs a body aligned per leader id, so
/// different teams never exchange values inside it.
struct Team {
  std::optional<DeviceId> leader;
  Vec3 velocity;
  bool is_leader = false;

  template <typename Body>
  Vec3 inside_team(Round& r, Body&& body) const {
    if (!leader) return r.align(-1, [] { return Vec3{}; });
    return r.align(*leader, [&] { return Vec3(body(*leader)); });
  }
};

/// Members adopt the nearest leader; until condition(leader) holds the team
/// velocity gathers members around the leader, keeping `intra_distance` apart.
template <typename Condition>
Team team_formation(Round& r, bool leader, double intra_distance, Condition&& condition) {
  Team t;
  t.is_leader = leader;
  t.leader = broadcast(r, leader, r.mid());
  t.velocity = t.inside_team(r, [&](DeviceId id) {
    const bool lead = id == r.mid();
    const bool done = condition(id);
    const Vec3 gather = sink_at(r, lead);
    const Vec3 apart = separation(r, Vec3{}, NeighbourhoodQuery::within_range(intra_distance));
    return Round::mux(done, Vec3{}, (gather + apart).normalized());
  });
  return t;
}

/// Leaders elected by sparse choice at grain `extra_distance`.
template <typename Condition>
Team team_formation(Round& r, double intra_distance, double extra_distance, Condition&& condition) {
  const bool leader = sparse_choice(r, extra_distance);
  return team_formation(r, leader, intra_distance, std::forward<Condition>(condition));
}

}  // namespace fieldswarm

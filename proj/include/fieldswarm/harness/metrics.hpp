#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <optional>
#include <queue>
#include <set>
#include <vector>

#include "fieldswarm/value.hpp"

namespace fieldswarm::harness {

/// Devices farther than epsilon from their target; devices without a target
/// count as out of formation.
inline int formation_error(const std::map<DeviceId, Position>& positions, const std::map<DeviceId, Position>& targets,
                           double epsilon) {
  int out = 0;
  for (const auto& [id, p] : positions) {
    auto t = targets.find(id);
    if (t == targets.end() || p.distance(t->second) > epsilon) ++out;
  }
  return out;
}

/// Mean absolute arm angle in degrees, folded into [0, 90]. Followers that
/// coincide with the leader are skipped.
inline std::optional<double> angular_alignment(const Position& leader, const std::vector<Position>& followers) {
  double sum = 0.0;
  int n = 0;
  for (const auto& f : followers) {
    const double dx = f.x - leader.x;
    const double dy = f.y - leader.y;
    if (dx == 0.0 && dy == 0.0) continue;
    sum += std::atan2(std::abs(dy), std::abs(dx)) * 180.0 / std::numbers::pi;
    ++n;
  }
  if (n == 0) return std::nullopt;
  return sum / n;
}

/// Mean over devices of the mean distance to their min(4, N-1) nearest others.
inline std::optional<double> nearest4_distance(const std::vector<Position>& positions) {
  const std::size_t n = positions.size();
  if (n < 2) return std::nullopt;
  const std::size_t k = std::min<std::size_t>(4, n - 1);
  double total = 0.0;
  std::vector<double> d;
  for (std::size_t i = 0; i < n; ++i) {
    d.clear();
    for (std::size_t j = 0; j < n; ++j)
      if (j != i) d.push_back(positions[i].distance(positions[j]));
    std::partial_sort(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(k), d.end());
    double s = 0.0;
    for (std::size_t m = 0; m < k; ++m) s += d[m];
    total += s / static_cast<double>(k);
  }
  return total / static_cast<double>(n);
}

inline std::optional<double> vertical_variation(const Position& leader, const std::vector<Position>& followers) {
  if (followers.empty()) return std::nullopt;
  double s = 0.0;
  for (const auto& f : followers) s += std::abs(f.y - leader.y);
  return s / static_cast<double>(followers.size());
}

inline std::optional<double> leader_distance(const Position& leader, const std::vector<Position>& followers) {
  if (followers.empty()) return std::nullopt;
  double s = 0.0;
  for (const auto& f : followers) s += f.distance(leader);
  return s / static_cast<double>(followers.size());
}

inline int distinct_choices(const std::vector<std::int64_t>& choices) {
  return static_cast<int>(std::set<std::int64_t>(choices.begin(), choices.end()).size());
}

inline std::optional<double> min_pairwise_distance(const std::vector<Position>& positions) {
  if (positions.size() < 2) return std::nullopt;
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < positions.size(); ++i)
    for (std::size_t j = i + 1; j < positions.size(); ++j) best = std::min(best, positions[i].distance(positions[j]));
  return best;
}

/// Devices reachable from `root` over the unit-disc graph (root included).
inline std::set<DeviceId> connected_component(const std::map<DeviceId, Position>& positions, DeviceId root,
                                              double range) {
  std::set<DeviceId> seen;
  if (!positions.count(root)) return seen;
  std::vector<DeviceId> stack{root};
  seen.insert(root);
  while (!stack.empty()) {
    const DeviceId a = stack.back();
    stack.pop_back();
    const Position& pa = positions.at(a);
    for (const auto& [b, pb] : positions)
      if (!seen.count(b) && pa.distance(pb) <= range) {
        seen.insert(b);
        stack.push_back(b);
      }
  }
  return seen;
}

/// Multi-source Dijkstra over the unit-disc graph: for every reachable
/// device, the nearest source (ties to the smaller source id).
inline std::map<DeviceId, DeviceId> nearest_source(const std::map<DeviceId, Position>& positions,
                                                   const std::set<DeviceId>& sources, double range) {
  using Item = std::tuple<double, DeviceId, DeviceId>;  // distance, source, device
  std::priority_queue<Item, std::vector<Item>, std::greater<>> queue;
  std::map<DeviceId, std::pair<double, DeviceId>> best;
  for (DeviceId s : sources)
    if (positions.count(s)) {
      best[s] = {0.0, s};
      queue.emplace(0.0, s, s);
    }
  while (!queue.empty()) {
    auto [d, src, a] = queue.top();
    queue.pop();
    if (best.at(a) != std::make_pair(d, src)) continue;
    const Position& pa = positions.at(a);
    for (const auto& [b, pb] : positions) {
      const double w = pa.distance(pb);
      if (b == a || w > range) continue;
      const auto candidate = std::make_pair(d + w, src);
      auto it = best.find(b);
      if (it == best.end() || candidate < it->second) {
        best[b] = candidate;
        queue.emplace(candidate.first, src, b);
      }
    }
  }
  std::map<DeviceId, DeviceId> out;
  for (const auto& [id, e] : best) out[id] = e.second;
  return out;
}

}  // namespace fieldswarm::harness

#pragma once

#include <cmath>
#include <numbers>
#include <optional>
#include <utility>
#include <vector>

#include "fieldswarm/round.hpp"

namespace fieldswarm {

/// Distance below which goTo reports arrival.
inline constexpr double kArrivalTolerance = 1e-3;

/// Random planar step: uniform heading, half-normal magnitude with mean `scale`.
inline Vec3 brownian(Round& r, double scale) {
  if (!(scale > 0.0)) return {};
  const double heading = r.uniform(0.0, 2.0 * std::numbers::pi);
  const double magnitude = std::abs(r.gaussian(scale * std::sqrt(std::numbers::pi / 2.0)));
  return {magnitude * std::cos(heading), magnitude * std::sin(heading), 0.0};
}

/// Unit vector toward `target`. Within one step the vector shrinks so that a
/// single round lands on the target instead of overshooting it.
inline Vec3 go_to(Round& r, const Position& target, double tolerance = kArrivalTolerance) {
  const Vec3 delta = target - r.position();
  const double d = delta.norm();
  if (d <= tolerance) return {};
  const double step = r.step_length();
  if (step > 0.0 && d < step) return delta / step;
  return delta / d;
}

/// Wanders between uniformly sampled waypoints of the rectangle.
inline Vec3 explore(Round& r, const Position& min_bound, const Position& max_bound, double arrival = 1.0) {
  auto coordinate = [&](double lo, double hi) { return lo < hi ? r.uniform(lo, hi) : lo; };
  auto sample = [&] {
    return Vec3{coordinate(min_bound.x, max_bound.x), coordinate(min_bound.y, max_bound.y),
                coordinate(min_bound.z, max_bound.z)};
  };
  const Vec3 waypoint = r.rep(std::optional<Vec3>{}, [&](std::optional<Vec3> w) -> std::optional<Vec3> {
    if (!w || r.position().distance(*w) <= arrival) return sample();
    return w;
  }).value();
  return go_to(r, waypoint);
}

/// Holds a sample of `gen` for `time` seconds, then draws a new one.
template <typename Gen>
Vec3 maintain_trajectory(Round& r, Gen&& gen, double time) {
  using Held = std::pair<Vec3, double>;
  return r.rep(std::optional<Held>{}, [&](std::optional<Held> held) -> std::optional<Held> {
    if (!held || r.time() - held->second >= time) return Held{gen(), r.time()};
    return held;
  })->first;
}

/// `direction` while the condition is false, zero while it holds.
inline Vec3 maintain_until(const Vec3& direction, bool condition) {
  return Round::mux(condition, Vec3{}, direction);
}

/// Repulsion from obstacle vectors (self → obstacle), weighted (safe/d)^2.
inline Vec3 obstacle_avoidance(const std::vector<Vec3>& obstacles, double safe_distance = 25.0) {
  Vec3 sum;
  for (const auto& o : obstacles) {
    const double d = o.norm();
    if (!(d > 0.0)) continue;
    const double w = (safe_distance / d) * (safe_distance / d);
    sum -= o.normalized() * w;
  }
  return sum;
}

/// Which neighbours a flocking block considers.
struct NeighbourhoodQuery {
  enum class Kind { OneHop, OneHopWithinRange };
  Kind kind = Kind::OneHop;
  double radius = 0.0;

  static NeighbourhoodQuery one_hop() { return {}; }
  static NeighbourhoodQuery within_range(double radius) { return {Kind::OneHopWithinRange, radius}; }

  bool accepts(double range) const { return kind == Kind::OneHop || range <= radius; }
};

namespace detail {

struct VecSum {
  Vec3 sum;
  int count = 0;
};

inline VecSum add(VecSum a, const VecSum& b) {
  a.sum += b.sum;
  a.count += b.count;
  return a;
}

/// Sums `term(neighbour position, neighbour value)` over queried neighbours.
template <typename Term>
VecSum sum_over_neighbours(Round& r, const NeighbourhoodQuery& q, const Vec3& shared, bool include_self, Term&& term) {
  auto expr = [&] {
    const Vec3 their_position = r.nbr_value(r.position());
    const Vec3 their_value = r.nbr_value(shared);
    const double range = r.nbr_range();
    if (!q.accepts(range)) return VecSum{};
    return VecSum{term(their_position, their_value, range), 1};
  };
  return include_self ? r.foldhood(VecSum{}, add, expr) : r.foldhood_plus(VecSum{}, add, expr);
}

}  // namespace detail

/// Sum of unit vectors pointing away from each queried neighbour.
inline Vec3 separation(Round& r, const Vec3& old, const NeighbourhoodQuery& q) {
  const Position self = r.position();
  return detail::sum_over_neighbours(r, q, old, false, [&](const Vec3& p, const Vec3&, double) {
    return (self - p).normalized();
  }).sum;
}

/// Unit vector toward the centroid of the queried neighbours.
inline Vec3 cohesion(Round& r, const Vec3& old, const NeighbourhoodQuery& q) {
  const auto s = detail::sum_over_neighbours(r, q, old, false, [](const Vec3& p, const Vec3&, double) { return p; });
  if (s.count == 0) return {};
  return (s.sum / s.count - r.position()).normalized();
}

/// Mean of the queried neighbours' shared velocities.
inline Vec3 alignment(Round& r, const Vec3& old, const NeighbourhoodQuery& q) {
  const auto s = detail::sum_over_neighbours(r, q, old, false, [](const Vec3&, const Vec3& v, double) { return v; });
  return s.count == 0 ? Vec3{} : s.sum / s.count;
}

struct ReynoldsWeights {
  double separation = 1.0;
  double cohesion = 1.0;
  double alignment = 1.0;
};

struct ReynoldsQueries {
  NeighbourhoodQuery separation = NeighbourhoodQuery::within_range(25.0);
  NeighbourhoodQuery flock = NeighbourhoodQuery::within_range(100.0);
};

inline Vec3 reynolds(Round& r, const Vec3& old, const ReynoldsWeights& w = {}, const ReynoldsQueries& q = {}) {
  const Vec3 sep = separation(r, old, q.separation).normalized();
  const Vec3 coh = cohesion(r, old, q.flock);
  const Vec3 ali = alignment(r, old, q.flock).normalized();
  return (sep * w.separation + coh * w.cohesion + ali * w.alignment).normalized();
}

/// Mean of the neighbourhood's velocities (self included) plus planar
/// Gaussian noise of per-component deviation `noise`.
inline Vec3 vicsek(Round& r, const Vec3& old, const NeighbourhoodQuery& q, double noise = 0.0) {
  const auto s = detail::sum_over_neighbours(r, q, old, true, [](const Vec3&, const Vec3& v, double) { return v; });
  Vec3 mean = s.sum / s.count;
  if (noise > 0.0) {
    mean.x += r.gaussian(noise);
    mean.y += r.gaussian(noise);
  }
  return mean;
}

struct CuckerSmaleParams {
  double h = 1.0;
  double sigma = 10.0;
  double beta = 0.5;
};

/// old + mean over neighbours of psi(r) * (v_j - old), psi(r) = H / (sigma^2 + r^2)^beta.
inline Vec3 cucker_smale(Round& r, const Vec3& old, const NeighbourhoodQuery& q, const CuckerSmaleParams& p = {}) {
  const auto s = detail::sum_over_neighbours(r, q, old, false, [&](const Vec3&, const Vec3& v, double range) {
    const double psi = p.h / std::pow(p.sigma * p.sigma + range * range, p.beta);
    return (v - old) * psi;
  });
  if (s.count == 0) return old;
  return old + s.sum / s.count;
}

}  // namespace fieldswarm

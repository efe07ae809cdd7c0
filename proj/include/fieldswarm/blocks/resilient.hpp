#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <tuple>
#include <utility>
#include <vector>

#include "fieldswarm/round.hpp"

namespace fieldswarm {

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

/// Self-healing field of minimum distances from the source devices.
inline double gradient(Round& r, bool source) {
  return r.rep(kInfinity, [&](double distance) {
    const double through_neighbours = r.foldhood_plus(
        kInfinity, [](double a, double b) { return std::min(a, b); },
        [&] { return r.nbr_value(distance) + r.nbr_range(); });
    return Round::mux(source, 0.0, through_neighbours);
  });
}

namespace detail {

struct ParentCandidate {
  double distance = kInfinity;
  DeviceId id = std::numeric_limits<DeviceId>::max();
  Value value;
};

inline ParentCandidate closer(ParentCandidate a, ParentCandidate b) {
  if (b.distance < a.distance || (b.distance == a.distance && b.id < a.id)) return b;
  return a;
}

}  // namespace detail

/// Gradient-cast: sources publish `value`; every other device takes acc of
/// its gradient-parent's output (the neighbour minimising distance plus
/// nbrRange, ties to the smallest id). Unreachable devices yield nullopt.
template <typename T, typename Acc>
std::optional<T> gradient_cast(Round& r, bool source, const T& value, Acc&& acc) {
  using State = std::pair<double, Value>;
  const State state = r.rep(State{kInfinity, Value()}, [&](const State& s) {
    const auto best = r.foldhood_plus(detail::ParentCandidate{}, detail::closer, [&] {
      detail::ParentCandidate c;
      c.distance = r.nbr_value(s.first) + r.nbr_range();
      c.id = r.nbr_value(r.mid());
      c.value = r.nbr_value(s.second);
      return c;
    });
    if (source) return State{0.0, Codec<T>::encode(value)};
    if (std::isinf(best.distance) || best.value.is_absent()) return State{kInfinity, Value()};
    auto parent_value = Codec<T>::decode(best.value);
    if (!parent_value) return State{kInfinity, Value()};
    return State{best.distance, Codec<T>::encode(acc(std::move(*parent_value)))};
  });
  if (state.second.is_absent()) return std::nullopt;
  return Codec<T>::decode(state.second);
}

/// Propagates the nearest center's value unchanged.
template <typename T>
std::optional<T> broadcast(Round& r, bool center, const T& value) {
  return gradient_cast(r, center, value, [](T v) { return v; });
}

/// Neighbour chosen as parent along `potential`: strictly lower potential,
/// minimising potential plus nbrRange, ties to the smallest id.
inline std::optional<DeviceId> find_parent(Round& r, double potential) {
  const auto best = r.foldhood_plus(detail::ParentCandidate{}, detail::closer, [&] {
    detail::ParentCandidate c;
    const double theirs = r.nbr_value(potential);
    c.id = r.nbr_value(r.mid());
    c.distance = theirs < potential ? theirs + r.nbr_range() : kInfinity;
    return c;
  });
  if (std::isinf(best.distance)) return std::nullopt;
  return best.id;
}

/// Collect-cast along a precomputed potential field (e.g. a gradient).
template <typename T, typename Acc>
T collect_cast_along(Round& r, double potential, const T& local, Acc&& acc, const T& empty) {
  constexpr DeviceId kNoParent = -1;
  const DeviceId parent = find_parent(r, potential).value_or(kNoParent);
  return r.rep(local, [&](const T& previous) {
    const Value mine = Codec<T>::encode(previous);
    const Value from_children = r.foldhood_plus(Codec<T>::encode(empty), [&](Value a, Value b) {
      if (b.is_absent()) return a;
      return Codec<T>::encode(acc(decode_or_fault<T>(a, "collect"), decode_or_fault<T>(b, "collect")));
    }, [&] {
      const DeviceId their_parent = r.nbr_value(parent);
      const Value theirs = r.nbr_value(mine);
      return their_parent == r.mid() ? theirs : Value();
    });
    return acc(local, decode_or_fault<T>(from_children, "collect"));
  });
}

/// Collect-cast: aggregates values inward to the nearest sink. `acc` must be
/// associative and commutative with identity `empty`.
template <typename T, typename Acc>
T collect_cast(Round& r, bool sink, const T& local, Acc&& acc, const T& empty) {
  const double potential = gradient(r, sink);
  return collect_cast_along(r, potential, local, std::forward<Acc>(acc), empty);
}

/// Per-leader distance entries held by sparse_choice, sorted by leader id.
using LeaderEntries = std::vector<std::pair<DeviceId, double>>;

/// Sparse-choice state: each device tracks every elected leader within
/// `grain`; a device is a leader iff no lower-id leader is within grain.
inline LeaderEntries sparse_choice_entries(Round& r, double grain) {
  return r.rep(LeaderEntries{}, [&](const LeaderEntries& previous) {
    using Map = std::map<DeviceId, double>;
    Map seen = r.foldhood_plus(Map{}, [](Map a, const Map& b) {
      for (const auto& [id, d] : b) {
        auto it = a.find(id);
        if (it == a.end() || d < it->second) a[id] = d;
      }
      return a;
    }, [&] {
      const LeaderEntries theirs = r.nbr_value(previous);
      const double range = r.nbr_range();
      Map m;
      for (const auto& [id, d] : theirs) m[id] = d + range;
      return m;
    });
    LeaderEntries next;
    bool suppressed = false;
    for (const auto& [id, d] : seen) {
      if (id == r.mid() || !(d < grain)) continue;
      if (id < r.mid()) suppressed = true;
      next.emplace_back(id, d);
    }
    if (!suppressed) {
      next.emplace_back(r.mid(), 0.0);
      std::sort(next.begin(), next.end());
    }
    return next;
  });
}

/// True in a sparse set of devices, pairwise at least `grain` apart.
inline bool sparse_choice(Round& r, double grain) {
  const auto entries = sparse_choice_entries(r, grain);
  return std::any_of(entries.begin(), entries.end(),
                     [&](const auto& e) { return e.first == r.mid() && e.second == 0.0; });
}

}  // namespace fieldswarm

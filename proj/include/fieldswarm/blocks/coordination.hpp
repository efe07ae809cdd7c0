#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "fieldswarm/round.hpp"

namespace fieldswarm {

/// A behaviour paired with its completion predicate.
struct Plan {
  std::function<Vec3()> behaviour;
  std::function<bool()> end_when;
};

enum class MissionMode { Once, Repeat };

struct Mission {
  std::vector<Plan> plans;
  MissionMode mode = MissionMode::Once;
};

/// Index of the active plan: the number of leading plans whose predicate
/// holds. Returns plans.size() when all hold.
inline std::size_t active_plan(const std::vector<bool>& done) {
  std::size_t i = 0;
  while (i < done.size() && done[i]) ++i;
  return i;
}

/// Runs the active plan's behaviour, aligned by plan index. Every predicate
/// is evaluated each round, so an earlier plan resumes when its condition
/// stops holding.
inline Vec3 run_mission(Round& r, const Mission& m) {
  if (m.plans.empty()) throw std::invalid_argument("mission needs at least one plan");
  std::vector<bool> done;
  done.reserve(m.plans.size());
  for (std::size_t i = 0; i < m.plans.size(); ++i)
    done.push_back(r.align(static_cast<std::int64_t>(i), [&] { return m.plans[i].end_when(); }));
  std::size_t index = active_plan(done);
  if (index == m.plans.size()) {
    if (m.mode == MissionMode::Once) return {};
    index = 0;
  }
  return r.align(static_cast<std::int64_t>(index), [&] { return m.plans[index].behaviour(); });
}

/// Option with the highest preference, lowest index on ties.
inline int argmax_choice(const std::vector<double>& p) {
  return static_cast<int>(std::max_element(p.begin(), p.end()) - p.begin());
}

/// 1 minus the Shannon entropy of p divided by ln k.
inline double certainty(const std::vector<double>& p) {
  if (p.size() < 2) return 1.0;
  double h = 0.0;
  for (double x : p)
    if (x > 0.0) h -= x * std::log(x);
  return std::clamp(1.0 - h / std::log(static_cast<double>(p.size())), 0.0, 1.0);
}

inline std::vector<double> normalized_distribution(std::vector<double> p) {
  for (double& x : p) x = std::max(x, 0.0);
  const double sum = std::accumulate(p.begin(), p.end(), 0.0);
  if (!(sum > 0.0)) {
    std::fill(p.begin(), p.end(), 1.0 / static_cast<double>(p.size()));
    return p;
  }
  for (double& x : p) x /= sum;
  return p;
}

struct ConsensusParams {
  double mixing = 0.2;
};

/// One preference update: mix in the certainty-weighted votes of the
/// neighbourhood. Zero vote mass leaves p unchanged.
inline std::vector<double> mix_votes(const std::vector<double>& p, const std::vector<double>& votes, double mixing) {
  const double mass = std::accumulate(votes.begin(), votes.end(), 0.0);
  if (!(mass > 0.0)) return p;
  std::vector<double> next(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) next[i] = (1.0 - mixing) * p[i] + mixing * votes[i] / mass;
  return normalized_distribution(std::move(next));
}

/// Collective choice among k options. Each device exhibits its argmax with
/// its certainty; votes are scaled by neighbourhood_weight(voter id).
template <typename Weight>
int consensus(Round& r, const std::vector<double>& preferences, Weight&& neighbourhood_weight,
              const ConsensusParams& params = {}) {
  if (preferences.size() < 2) throw std::invalid_argument("consensus needs at least two options");
  const auto p = r.rep(normalized_distribution(preferences), [&](std::vector<double> current) {
    if (current.size() != preferences.size()) current = normalized_distribution(preferences);
    const int choice = argmax_choice(current);
    const double c = certainty(current);
    const auto k = current.size();
    auto votes = r.foldhood(std::vector<double>(k, 0.0), [](std::vector<double> a, const std::vector<double>& b) {
      for (std::size_t i = 0; i < a.size(); ++i) a[i] += b[i];
      return a;
    }, [&] {
      const int their_choice = r.nbr_value(choice);
      const double their_certainty = r.nbr_value(c);
      const DeviceId who = r.nbr_value(r.mid());
      std::vector<double> v(k, 0.0);
      if (their_choice >= 0 && static_cast<std::size_t>(their_choice) < k)
        v[static_cast<std::size_t>(their_choice)] = std::max(0.0, double(neighbourhood_weight(who))) * their_certainty;
      return v;
    });
    return mix_votes(current, votes, params.mixing);
  });
  return argmax_choice(p);
}

}  // namespace fieldswarm

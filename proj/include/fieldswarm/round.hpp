#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "fieldswarm/export.hpp"
#include "fieldswarm/value.hpp"

namespace fieldswarm {

enum class Modality { RoundBased, LongStanding };

/// Velocity goal produced by a round. Round-based goals lapse at the
/// device's next round; long-standing goals persist until revised.
struct ActuationGoal {
  Vec3 velocity;
  Modality modality = Modality::RoundBased;
};

/// One unexpired, in-range neighbour message as seen at context-build time.
struct NeighbourMessage {
  DeviceId id = 0;
  std::shared_ptr<const ExportTree> exports;
  double distance = 0.0;  // nbrRange, between perceived positions
  Position position;      // sender's perceived position at its sending event
};

/// One device's round input.
struct Context {
  DeviceId self = 0;
  SimTime time = 0.0;
  Position position;  // own perceived position
  std::shared_ptr<const ExportTree> previous;
  std::vector<NeighbourMessage> neighbours;  // sorted by id, self excluded
  std::unordered_map<std::string, Value> sensors;
  double step_length = 0.0;  // metres covered in one round by a unit movement versor
  std::uint64_t random_seed = 0;
};

/// Evaluates one aggregate program against a Context. Construct invocations
/// are aligned by Path: a per-scope invocation counter plus branch tags.
class Round {
 public:
  explicit Round(const Context& ctx) : ctx_(ctx), rng_(ctx.random_seed) { counters_.push_back(0); }

  Round(const Round&) = delete;
  Round& operator=(const Round&) = delete;

  DeviceId mid() const { return ctx_.self; }
  SimTime time() const { return ctx_.time; }
  const Position& position() const { return ctx_.position; }
  double step_length() const { return ctx_.step_length; }
  const Context& context() const { return ctx_; }

  bool has_sensor(const std::string& name) const { return ctx_.sensors.count(name) != 0; }

  template <typename T>
  T sense(const std::string& name) const {
    auto it = ctx_.sensors.find(name);
    if (it == ctx_.sensors.end()) throw EvaluationFault("missing sensor: " + name);
    return decode_or_fault<T>(it->second, name.c_str());
  }

  std::mt19937_64& rng() { return rng_; }
  double uniform(double lo = 0.0, double hi = 1.0) { return std::uniform_real_distribution<double>(lo, hi)(rng_); }
  double gaussian(double stddev) {
    return stddev > 0.0 ? std::normal_distribution<double>(0.0, stddev)(rng_) : 0.0;
  }

  /// Distance to the neighbour currently being folded over (0 for self).
  double nbr_range() const {
    if (mode_ == Mode::None) throw EvaluationFault("nbrRange outside foldhood");
    return mode_ == Mode::Self ? 0.0 : ctx_.neighbours[current_].distance;
  }

  /// Stateful evolution: f applied to the previous round's value at this
  /// path, or to `init` on the first round / after state loss.
  template <typename T, typename F>
  T rep(const T& init, F&& f) {
    require_outside_fold("rep");
    ScopeGuard scope(*this, Slot{SlotKind::Rep, next_index()});
    T previous = init;
    if (ctx_.previous) {
      if (const Value* v = ctx_.previous->get(path_)) {
        // A stored value of a different kind counts as state loss.
        if (auto d = Codec<T>::decode(*v)) previous = std::move(*d);
      }
    }
    T result = f(std::move(previous));
    out_.put(path_, Codec<T>::encode(result));
    return result;
  }

  /// Fold over self and every aligned neighbour.
  template <typename T, typename Acc, typename Expr>
  T foldhood(T init, Acc&& acc, Expr&& expr) {
    return fold(std::move(init), std::forward<Acc>(acc), std::forward<Expr>(expr), true);
  }

  /// Fold over aligned neighbours only; self is evaluated (to publish its
  /// nbr values) but never folded.
  template <typename T, typename Acc, typename Expr>
  T foldhood_plus(T init, Acc&& acc, Expr&& expr) {
    return fold(std::move(init), std::forward<Acc>(acc), std::forward<Expr>(expr), false);
  }

  /// Publishes expr's value for self; substitutes the neighbour's value at
  /// the same path during neighbour evaluations.
  template <typename F>
  auto nbr(F&& expr) -> std::decay_t<decltype(expr())> {
    using T = std::decay_t<decltype(expr())>;
    if (mode_ == Mode::None) throw EvaluationFault("nbr outside foldhood");
    const auto saved = path_.size_bytes();
    path_.push(Slot{SlotKind::Nbr, next_index()});
    T result{};
    if (mode_ == Mode::Self) {
      result = expr();
      out_.put(path_, Codec<T>::encode(result));
    } else {
      const auto& exports = ctx_.neighbours[current_].exports;
      const Value* v = exports ? exports->get(path_) : nullptr;
      std::optional<T> d;
      if (v) d = Codec<T>::decode(*v);
      if (d) {
        result = std::move(*d);
      } else {
        unaligned_ = true;
      }
    }
    path_.truncate(saved);
    return result;
  }

  /// Shares a local value with neighbours (nbr of a constant expression).
  template <typename T>
  T nbr_value(const T& local) {
    return nbr([&] { return local; });
  }

  /// Evaluates only the taken side; devices on different sides never align.
  template <typename Th, typename El>
  auto branch(bool cond, Th&& th, El&& el) {
    require_outside_fold("branch");
    ScopeGuard scope(*this, Slot{SlotKind::Branch, next_index(), cond ? 1 : 0});
    using R = std::common_type_t<decltype(th()), decltype(el())>;
    if (cond) return static_cast<R>(th());
    return static_cast<R>(el());
  }

  /// Runs body in a computation domain keyed by `key`: only devices that
  /// used the same key at this call position align with each other.
  template <typename F>
  auto align(std::int64_t key, F&& body) -> decltype(body()) {
    require_outside_fold("align");
    ScopeGuard scope(*this, Slot{SlotKind::Branch, next_index(), key});
    return body();
  }

  /// Purely functional selector: both arguments are already evaluated.
  template <typename T>
  static T mux(bool cond, T th, T el) {
    return cond ? std::move(th) : std::move(el);
  }

  void set_actuation(const ActuationGoal& goal) { actuation_ = goal; }
  const std::optional<ActuationGoal>& actuation() const { return actuation_; }

  const ExportTree& exports() const { return out_; }
  ExportTree take_exports() { return std::move(out_); }

 private:
  enum class Mode { None, Self, Neighbour };

  struct ScopeGuard {
    ScopeGuard(Round& r, const Slot& s) : round(r), saved(r.path_.size_bytes()) {
      r.path_.push(s);
      r.counters_.push_back(0);
    }
    ~ScopeGuard() {
      round.counters_.pop_back();
      round.path_.truncate(saved);
    }
    Round& round;
    std::size_t saved;
  };

  std::uint32_t next_index() { return counters_.back()++; }

  void require_outside_fold(const char* construct) const {
    if (mode_ != Mode::None) throw EvaluationFault(std::string(construct) + " inside a foldhood expression");
  }

  template <typename T, typename Acc, typename Expr>
  T fold(T init, Acc&& acc, Expr&& expr, bool include_self) {
    require_outside_fold("foldhood");
    ScopeGuard scope(*this, Slot{SlotKind::Fold, next_index()});
    struct ModeReset {
      Round& r;
      ~ModeReset() { r.mode_ = Mode::None; }
    } reset{*this};

    mode_ = Mode::Self;
    counters_.back() = 0;
    auto self_value = expr();
    T result = std::move(init);
    if (include_self) result = acc(std::move(result), std::move(self_value));

    for (std::size_t j = 0; j < ctx_.neighbours.size(); ++j) {
      const auto& nb = ctx_.neighbours[j];
      if (!nb.exports || !nb.exports->contains(path_)) continue;
      mode_ = Mode::Neighbour;
      current_ = j;
      unaligned_ = false;
      counters_.back() = 0;
      auto v = expr();
      if (unaligned_) continue;
      result = acc(std::move(result), std::move(v));
    }
    mode_ = Mode::None;
    out_.put(path_, Value(true));  // alignment marker
    return result;
  }

  const Context& ctx_;
  std::mt19937_64 rng_;
  Path path_;
  std::vector<std::uint32_t> counters_;
  ExportTree out_;
  Mode mode_ = Mode::None;
  std::size_t current_ = 0;
  bool unaligned_ = false;
  std::optional<ActuationGoal> actuation_;
};

/// A program maps one round's evaluation to an output value.
using AggregateProgram = std::function<Value(Round&)>;

/// Wraps a typed callable `T(Round&)` as an AggregateProgram.
template <typename F>
AggregateProgram make_program(F f) {
  return [f = std::move(f)](Round& r) -> Value {
    using T = std::decay_t<decltype(f(r))>;
    return Codec<T>::encode(f(r));
  };
}

// Library helpers built on the constructs.

/// Set of values of `expr` across self and aligned neighbours.
template <typename F>
auto neighbouring_field(Round& r, F&& expr) {
  using T = std::decay_t<decltype(expr())>;
  std::vector<T> out = r.foldhood(std::vector<T>{}, [](std::vector<T> acc, std::vector<T> one) {
    for (auto& v : one) acc.push_back(std::move(v));
    return acc;
  }, [&] { return std::vector<T>{r.nbr(expr)}; });
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

inline std::vector<DeviceId> neighbour_ids(Round& r) {
  return neighbouring_field(r, [&] { return r.mid(); });
}

}  // namespace fieldswarm

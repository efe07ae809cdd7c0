#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <random>
#include <set>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "fieldswarm/events.hpp"
#include "fieldswarm/round.hpp"

namespace fieldswarm {

/// Adversarial parameters: message loss D, position noise P, kill fraction K
/// applied once at kill time T_k.
struct FaultConfig {
  double loss = 0.0;
  double noise = 0.0;
  double kill_fraction = 0.0;
  SimTime kill_time = std::numeric_limits<double>::infinity();

  void validate() const {
    if (!(loss >= 0.0 && loss <= 1.0)) throw std::invalid_argument("message loss probability must be in [0,1]");
    if (!(noise >= 0.0) || !std::isfinite(noise)) throw std::invalid_argument("position noise must be >= 0");
    if (!(kill_fraction >= 0.0 && kill_fraction <= 1.0))
      throw std::invalid_argument("kill fraction must be in [0,1]");
    if (!(kill_time >= 0.0)) throw std::invalid_argument("kill time must be >= 0");
  }
};

enum class SchedulePolicy {
  RoundRobinJitter,  // fixed per-device phase, one round per period
  RandomSweep,       // fresh random phase every period
};

struct EngineConfig {
  double comm_range = 200.0;
  double period = 1.0;
  double expiry_rounds = 3.0;
  double max_speed = 20.0 / 3.6;
  double speed_scale = 20.0 / 3.6;  // m/s per unit of program output
  FaultConfig faults;
  SchedulePolicy schedule = SchedulePolicy::RoundRobinJitter;
  std::uint64_t seed = 1;
  bool record_events = false;
  std::set<DeviceId> protected_devices;  // never selected by the kill event

  double expiry() const { return expiry_rounds * period; }
};

struct InboxEntry {
  std::shared_ptr<const ExportTree> exports;
  SimTime received_at = 0.0;
  EventId sender_event = -1;
  Position sender_position;
};

struct DeviceState {
  DeviceId id = 0;
  Position true_position;
  Position perceived_position;
  ActuationGoal goal;
  std::map<DeviceId, InboxEntry> inbox;
  std::shared_ptr<const ExportTree> rep_memory;
  bool alive = true;
  std::unordered_map<std::string, Value> sensors;

  SimTime next_fire = 0.0;
  SimTime last_round = -1.0;
  EventId last_event = -1;
  std::uint64_t rounds = 0;
  Value last_output;
};

struct DeliveryStats {
  std::uint64_t delivered = 0;
  std::uint64_t dropped = 0;
};

namespace detail {
inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}
inline std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t stream) { return mix64(seed ^ mix64(stream)); }
}  // namespace detail

/// Gaussian perception error on x and y; z is left untouched.
inline Position perceived_position(const Position& truth, double noise, std::mt19937_64& rng) {
  if (noise <= 0.0) return truth;
  std::normal_distribution<double> n(0.0, noise);
  const double dx = n(rng);
  const double dy = n(rng);
  return {truth.x + dx, truth.y + dy, truth.z};
}

/// Explicit Euler step with the velocity goal clamped to max_speed.
inline void apply_kinematics(DeviceState& d, double dt, double max_speed) {
  d.true_position += d.goal.velocity.clamped(max_speed) * dt;
}

/// Deterministic round-based executor. All mutation goes through step().
class World {
 public:
  using RoundHook = std::function<void(World&, DeviceState&)>;
  using DeliveryFilter = std::function<bool(DeviceId from, DeviceId to, SimTime t)>;

  explicit World(EngineConfig cfg)
      : cfg_(std::move(cfg)),
        schedule_rng_(detail::stream_seed(cfg_.seed, 1)),
        loss_rng_(detail::stream_seed(cfg_.seed, 2)),
        noise_rng_(detail::stream_seed(cfg_.seed, 3)),
        kill_rng_(detail::stream_seed(cfg_.seed, 4)) {
    cfg_.faults.validate();
    if (!(cfg_.period > 0.0)) throw std::invalid_argument("round period must be > 0");
    if (!(cfg_.comm_range > 0.0)) throw std::invalid_argument("communication range must be > 0");
  }

  const EngineConfig& config() const { return cfg_; }
  EngineConfig& mutable_config() { return cfg_; }

  DeviceState& add_device(DeviceId id, const Position& p) {
    if (index_.count(id)) throw std::invalid_argument("duplicate device id " + std::to_string(id));
    DeviceState d;
    d.id = id;
    d.true_position = p;
    d.perceived_position = p;
    d.next_fire = std::uniform_real_distribution<double>(0.0, cfg_.period)(schedule_rng_);
    auto pos = std::lower_bound(devices_.begin(), devices_.end(), id,
                                [](const DeviceState& s, DeviceId v) { return s.id < v; });
    pos = devices_.insert(pos, std::move(d));
    reindex();
    return *pos;
  }

  std::vector<DeviceState>& devices() { return devices_; }
  const std::vector<DeviceState>& devices() const { return devices_; }

  DeviceState& device(DeviceId id) { return devices_.at(index_.at(id)); }
  const DeviceState& device(DeviceId id) const { return devices_.at(index_.at(id)); }
  bool has_device(DeviceId id) const { return index_.count(id) != 0; }

  std::vector<DeviceId> alive_ids() const {
    std::vector<DeviceId> out;
    for (const auto& d : devices_)
      if (d.alive) out.push_back(d.id);
    return out;
  }

  SimTime time() const { return time_; }
  const EventStructure& events() const { return events_; }
  const DeliveryStats& delivery_stats() const { return stats_; }
  bool kill_applied() const { return kill_applied_; }
  std::uint64_t steps() const { return steps_; }

  void set_before_round(RoundHook h) { before_round_ = std::move(h); }
  void set_after_round(RoundHook h) { after_round_ = std::move(h); }
  void set_delivery_filter(DeliveryFilter f) { filter_ = std::move(f); }

  bool in_range(const DeviceState& a, const DeviceState& b) const {
    return a.true_position.distance(b.true_position) <= cfg_.comm_range;
  }

  /// Fire time of the next round, or +inf when no device is alive.
  SimTime next_time() const {
    const DeviceState* d = next_device();
    return d ? d->next_fire : std::numeric_limits<double>::infinity();
  }

  /// Executes exactly one device round.
  void step(const AggregateProgram& program) {
    DeviceState* d = next_device();
    if (!d) throw std::logic_error("step on a world with no alive device");
    const SimTime t = d->next_fire;
    time_ = t;
    if (!kill_applied_ && cfg_.faults.kill_fraction > 0.0 && t >= cfg_.faults.kill_time) {
      apply_kill();
      if (!d->alive) {
        step(program);
        return;
      }
    }
    execute_round(*d, t, program);
    ++steps_;
  }

  /// Runs every round whose fire time is <= t.
  void run_until(SimTime t, const AggregateProgram& program) {
    while (next_time() <= t) step(program);
    time_ = std::max(time_, t);
  }

  /// One full period: every alive device executes one round.
  void sweep(const AggregateProgram& program) { run_until(time_ + cfg_.period, program); }

  /// Context for `d` at the current time; prunes expired inbox entries.
  Context build_context(DeviceState& d, EventId event = -1) {
    Context ctx;
    ctx.self = d.id;
    ctx.time = time_;
    ctx.position = d.perceived_position;
    ctx.previous = d.rep_memory;
    ctx.sensors = d.sensors;
    ctx.step_length = cfg_.speed_scale * cfg_.period;
    ctx.random_seed = detail::stream_seed(cfg_.seed ^ detail::mix64(static_cast<std::uint64_t>(d.id)), 1000 + d.rounds);

    for (auto it = d.inbox.begin(); it != d.inbox.end();) {
      if (time_ - it->second.received_at > cfg_.expiry() + 1e-9) {
        it = d.inbox.erase(it);
        continue;
      }
      const InboxEntry& m = it->second;
      const DeviceState& sender = device(it->first);
      const bool usable = sender.alive && in_range(d, sender) && m.received_at < time_;
      if (usable) {
        NeighbourMessage nm;
        nm.id = it->first;
        nm.exports = m.exports;
        nm.position = m.sender_position;
        nm.distance = d.perceived_position.distance(m.sender_position);
        ctx.neighbours.push_back(std::move(nm));
        if (event >= 0 && cfg_.record_events) events_.add_edge(m.sender_event, event);
      }
      ++it;
    }
    return ctx;
  }

  /// Broadcasts an export to in-range alive receivers, each dropped
  /// independently with probability D.
  void deliver(const DeviceState& sender, std::shared_ptr<const ExportTree> exports, EventId sender_event) {
    for (auto& r : devices_) {
      if (r.id == sender.id || !r.alive || !in_range(sender, r)) continue;
      const double u = std::uniform_real_distribution<double>(0.0, 1.0)(loss_rng_);
      const bool dropped = u < cfg_.faults.loss || (filter_ && !filter_(sender.id, r.id, time_));
      if (dropped) {
        ++stats_.dropped;
        continue;
      }
      ++stats_.delivered;
      r.inbox[sender.id] = InboxEntry{exports, time_, sender_event, sender.perceived_position};
    }
  }

  /// Kills floor(K * alive) uniformly chosen, non-protected alive devices.
  std::vector<DeviceId> apply_kill() {
    kill_applied_ = true;
    std::vector<DeviceId> candidates;
    std::size_t alive = 0;
    for (const auto& d : devices_) {
      if (!d.alive) continue;
      ++alive;
      if (!cfg_.protected_devices.count(d.id)) candidates.push_back(d.id);
    }
    const auto count = static_cast<std::size_t>(std::floor(cfg_.faults.kill_fraction * alive + 1e-9));
    std::shuffle(candidates.begin(), candidates.end(), kill_rng_);
    candidates.resize(std::min(count, candidates.size()));
    std::sort(candidates.begin(), candidates.end());
    for (DeviceId id : candidates) kill(id);
    return candidates;
  }

  void kill(DeviceId id) {
    auto& d = device(id);
    d.alive = false;
    d.goal = ActuationGoal{};
  }

  /// Models a reboot: the device forgets its state and its inbox.
  void lose_state(DeviceId id) {
    auto& d = device(id);
    d.rep_memory.reset();
    d.inbox.clear();
    d.last_event = -1;
  }

 private:
  DeviceState* next_device() {
    DeviceState* best = nullptr;
    for (auto& d : devices_)
      if (d.alive && (!best || d.next_fire < best->next_fire)) best = &d;
    return best;
  }
  const DeviceState* next_device() const { return const_cast<World*>(this)->next_device(); }

  void reindex() {
    index_.clear();
    for (std::size_t i = 0; i < devices_.size(); ++i) index_[devices_[i].id] = i;
  }

  void execute_round(DeviceState& d, SimTime t, const AggregateProgram& program) {
    if (d.last_round >= 0.0) apply_kinematics(d, t - d.last_round, cfg_.max_speed);
    if (d.goal.modality == Modality::RoundBased) d.goal = ActuationGoal{};
    if (before_round_) before_round_(*this, d);
    d.perceived_position = perceived_position(d.true_position, cfg_.faults.noise, noise_rng_);

    EventId event = -1;
    if (cfg_.record_events) {
      event = events_.add_event(d.id, t, d.true_position);
      if (d.last_event >= 0) events_.add_edge(d.last_event, event);
    }
    Context ctx = build_context(d, event);
    Round round(ctx);
    Value output = program(round);
    auto exports = std::make_shared<const ExportTree>(round.take_exports());

    if (round.actuation()) {
      d.goal = *round.actuation();
    } else if (auto v = output.as_vec()) {
      d.goal = ActuationGoal{*v * cfg_.speed_scale, Modality::RoundBased};
    }
    if (cfg_.record_events) events_.set_output(event, output);
    d.last_output = std::move(output);
    d.rep_memory = exports;
    d.last_event = event;
    d.last_round = t;
    ++d.rounds;

    deliver(d, exports, event);
    if (after_round_) after_round_(*this, d);

    if (cfg_.schedule == SchedulePolicy::RoundRobinJitter) {
      d.next_fire += cfg_.period;
    } else {
      const double sweep = std::floor(t / cfg_.period + 1e-12) + 1.0;
      d.next_fire = sweep * cfg_.period + std::uniform_real_distribution<double>(0.0, cfg_.period)(schedule_rng_);
    }
  }

  EngineConfig cfg_;
  std::vector<DeviceState> devices_;
  std::unordered_map<DeviceId, std::size_t> index_;
  SimTime time_ = 0.0;
  std::mt19937_64 schedule_rng_;
  std::mt19937_64 loss_rng_;
  std::mt19937_64 noise_rng_;
  std::mt19937_64 kill_rng_;
  EventStructure events_;
  DeliveryStats stats_;
  bool kill_applied_ = false;
  std::uint64_t steps_ = 0;
  RoundHook before_round_;
  RoundHook after_round_;
  DeliveryFilter filter_;
};

}  // namespace fieldswarm

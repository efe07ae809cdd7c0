#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "fieldswarm/value.hpp"

namespace fieldswarm {

using EventId = std::int64_t;

struct Event {
  EventId id = 0;
  DeviceId device = 0;
  SimTime time = 0.0;
  Position position;
};

struct EventEdge {
  EventId from = 0;
  EventId to = 0;
  bool operator==(const EventEdge&) const = default;
};

/// Recorded rounds plus message-delivery (and state carry-over) edges.
class EventStructure {
 public:
  EventId add_event(DeviceId device, SimTime time, const Position& p) {
    const EventId id = static_cast<EventId>(events_.size());
    events_.push_back(Event{id, device, time, p});
    outputs_.emplace_back();
    return id;
  }

  void add_edge(EventId from, EventId to) { edges_.push_back(EventEdge{from, to}); }
  void set_output(EventId e, Value v) { outputs_.at(static_cast<std::size_t>(e)) = std::move(v); }

  const std::vector<Event>& events() const { return events_; }
  const std::vector<EventEdge>& edges() const { return edges_; }
  const std::vector<Value>& outputs() const { return outputs_; }
  const Event& event(EventId e) const { return events_.at(static_cast<std::size_t>(e)); }

  /// Line format: `event <id> <device> <t> <x> <y> <z>` then `edge <from> <to>`.
  std::string dump() const {
    std::string out;
    char buf[160];
    for (const auto& e : events_) {
      std::snprintf(buf, sizeof buf, "event %lld %lld %.17g %.17g %.17g %.17g\n", static_cast<long long>(e.id),
                    static_cast<long long>(e.device), e.time, e.position.x, e.position.y, e.position.z);
      out += buf;
    }
    for (const auto& ed : edges_) {
      std::snprintf(buf, sizeof buf, "edge %lld %lld\n", static_cast<long long>(ed.from),
                    static_cast<long long>(ed.to));
      out += buf;
    }
    return out;
  }

  static EventStructure parse(const std::string& text) {
    EventStructure es;
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (line.empty()) continue;
      std::istringstream ls(line);
      std::string tag;
      ls >> tag;
      if (tag == "event") {
        Event e;
        ls >> e.id >> e.device >> e.time >> e.position.x >> e.position.y >> e.position.z;
        if (!ls || e.id != static_cast<EventId>(es.events_.size()))
          throw std::runtime_error("bad event line " + std::to_string(lineno));
        es.events_.push_back(e);
        es.outputs_.emplace_back();
      } else if (tag == "edge") {
        EventEdge ed;
        ls >> ed.from >> ed.to;
        if (!ls) throw std::runtime_error("bad edge line " + std::to_string(lineno));
        es.edges_.push_back(ed);
      } else {
        throw std::runtime_error("unknown record on line " + std::to_string(lineno));
      }
    }
    return es;
  }

 private:
  std::vector<Event> events_;
  std::vector<EventEdge> edges_;
  std::vector<Value> outputs_;
};

/// Neighbour relation: topology[d] is the set of devices whose messages d
/// should receive.
using Topology = std::map<DeviceId, std::set<DeviceId>>;

inline Topology unit_disc_topology(const std::map<DeviceId, Position>& positions, double range) {
  Topology topo;
  for (const auto& [a, pa] : positions) {
    auto& s = topo[a];
    for (const auto& [b, pb] : positions)
      if (a != b && pa.distance(pb) <= range) s.insert(b);
  }
  return topo;
}

/// Half-open time window [from, to).
struct TimeWindow {
  SimTime from = 0.0;
  SimTime to = 0.0;
  bool contains(SimTime t) const { return t >= from && t < to; }
};

/// True iff, within the window, every event of `devices` receives exactly the
/// most recent prior event of each topological neighbour, and every device
/// acts at least once.
inline bool check_adhering(const EventStructure& es, const std::set<DeviceId>& devices, const Topology& topology,
                           const TimeWindow& window) {
  std::map<DeviceId, std::vector<std::pair<SimTime, EventId>>> by_device;
  for (const auto& e : es.events()) by_device[e.device].emplace_back(e.time, e.id);
  for (auto& [d, evs] : by_device) std::sort(evs.begin(), evs.end());

  std::vector<std::vector<EventId>> incoming(es.events().size());
  for (const auto& ed : es.edges()) {
    if (es.event(ed.from).device == es.event(ed.to).device) continue;
    incoming[static_cast<std::size_t>(ed.to)].push_back(ed.from);
  }

  auto latest_before = [&](DeviceId d, SimTime t) -> std::optional<EventId> {
    auto it = by_device.find(d);
    if (it == by_device.end()) return std::nullopt;
    const auto& evs = it->second;
    auto pos = std::lower_bound(evs.begin(), evs.end(), std::make_pair(t, EventId{-1}));
    if (pos == evs.begin()) return std::nullopt;
    return std::prev(pos)->second;
  };

  for (DeviceId d : devices) {
    bool any = false;
    auto it = by_device.find(d);
    if (it != by_device.end())
      for (const auto& [t, id] : it->second) any = any || window.contains(t);
    if (!any) return false;
  }

  for (const auto& e : es.events()) {
    if (!window.contains(e.time) || !devices.count(e.device)) continue;
    std::set<EventId> expected;
    auto topo = topology.find(e.device);
    if (topo != topology.end()) {
      for (DeviceId nb : topo->second) {
        if (!devices.count(nb)) continue;
        if (auto prior = latest_before(nb, e.time)) expected.insert(*prior);
      }
    }
    const auto& in = incoming[static_cast<std::size_t>(e.id)];
    std::set<EventId> actual(in.begin(), in.end());
    if (actual.size() != in.size() || actual != expected) return false;
  }
  return true;
}

/// Per-device limit value if its last `horizon` outputs agree within `tol`;
/// std::nullopt marks NotConverged.
inline std::map<DeviceId, std::optional<Value>> detect_convergence(const EventStructure& es, std::size_t horizon,
                                                                   double tol = 1e-6) {
  std::map<DeviceId, std::vector<EventId>> by_device;
  for (const auto& e : es.events()) by_device[e.device].push_back(e.id);
  std::map<DeviceId, std::optional<Value>> out;
  for (auto& [d, ids] : by_device) {
    std::stable_sort(ids.begin(), ids.end(),
                     [&](EventId a, EventId b) { return es.event(a).time < es.event(b).time; });
    if (ids.size() < horizon || horizon == 0) {
      out[d] = std::nullopt;
      continue;
    }
    const Value& last = es.outputs()[static_cast<std::size_t>(ids.back())];
    bool same = true;
    for (std::size_t k = ids.size() - horizon; k < ids.size() && same; ++k)
      same = approx_equal(es.outputs()[static_cast<std::size_t>(ids[k])], last, tol);
    out[d] = same ? std::optional<Value>(last) : std::nullopt;
  }
  return out;
}

}  // namespace fieldswarm

#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "fieldswarm/fieldswarm.hpp"
#include "oracles.hpp"

using namespace fieldswarm;

namespace {

AggregateProgram counter() {
  return make_program([](Round& r) { return r.rep(std::int64_t{0}, [](std::int64_t x) { return x + 1; }); });
}

AggregateProgram ids() {
  return make_program([](Round& r) { return neighbour_ids(r); });
}

AggregateProgram distance_field() {
  return make_program([](Round& r) { return gradient(r, r.mid() == 0); });
}

EngineConfig config(double range = 200.0, std::uint64_t seed = 7) {
  EngineConfig c;
  c.comm_range = range;
  c.seed = seed;
  return c;
}

TEST(Step, SingleDeviceCountsRounds) {
  World w(config());
  w.add_device(0, {0, 0, 0});
  const auto p = counter();
  for (int n = 1; n <= 25; ++n) {
    w.step(p);
    EXPECT_EQ(*w.device(0).last_output.as_int(), n);
  }
}

TEST(Step, OutOfRangeDevicesOnlySeeThemselves) {
  World w(config(100.0));
  w.add_device(0, {0, 0, 0});
  w.add_device(1, {500, 0, 0});
  oracle::sweeps(w, ids(), 4);
  EXPECT_EQ(decode<std::vector<DeviceId>>(w.device(0).last_output), (std::vector<DeviceId>{0}));
  EXPECT_EQ(decode<std::vector<DeviceId>>(w.device(1).last_output), (std::vector<DeviceId>{1}));
}

TEST(Step, ThreeDevicesInRangeSeeEachOther) {
  World w(config());
  for (int i = 0; i < 3; ++i) w.add_device(i, {i * 50.0, 0, 0});
  const auto p = ids();
  while (std::any_of(w.devices().begin(), w.devices().end(), [](const auto& d) { return d.rounds < 2; })) w.step(p);
  // one more round each so every device has heard two rounds of the others
  oracle::sweeps(w, p, 1);
  for (const auto& d : w.devices())
    EXPECT_EQ(decode<std::vector<DeviceId>>(d.last_output), (std::vector<DeviceId>{0, 1, 2})) << d.id;
}

TEST(Step, ExactlyOneDeviceAdvances) {
  World w(config());
  for (int i = 0; i < 5; ++i) w.add_device(i, {i * 10.0, 0, 0});
  const auto p = counter();
  for (int k = 0; k < 40; ++k) {
    std::uint64_t before = 0;
    for (const auto& d : w.devices()) before += d.rounds;
    const double t = w.next_time();
    w.step(p);
    std::uint64_t after = 0;
    for (const auto& d : w.devices()) after += d.rounds;
    EXPECT_EQ(after, before + 1);
    EXPECT_DOUBLE_EQ(w.time(), t);
  }
}

TEST(BuildContext, EmptyInboxHasNoNeighbours) {
  World w(config());
  w.add_device(0, {0, 0, 0});
  w.add_device(1, {10, 0, 0});
  EXPECT_TRUE(w.build_context(w.device(0)).neighbours.empty());
}

TEST(BuildContext, ExpiredMessagesAreDropped) {
  World w(config());
  w.add_device(0, {0, 0, 0});
  w.add_device(1, {10, 0, 0});
  const auto p = ids();
  oracle::sweeps(w, p, 3);
  ASSERT_EQ(w.build_context(w.device(0)).neighbours.size(), 1u);
  w.set_delivery_filter([](DeviceId, DeviceId, SimTime) { return false; });
  oracle::sweeps(w, p, 2);
  EXPECT_EQ(w.build_context(w.device(0)).neighbours.size(), 1u) << "message still within 3 periods";
  oracle::sweeps(w, p, 3);
  EXPECT_TRUE(w.build_context(w.device(0)).neighbours.empty());
  EXPECT_EQ(decode<std::vector<DeviceId>>(w.device(0).last_output), (std::vector<DeviceId>{0}));
}

TEST(BuildContext, RangeIsRecheckedForUnexpiredMessages) {
  World w(config(100.0));
  w.add_device(0, {0, 0, 0});
  w.add_device(1, {50, 0, 0});
  oracle::sweeps(w, ids(), 2);
  ASSERT_EQ(w.build_context(w.device(0)).neighbours.size(), 1u);
  w.device(1).true_position = {500, 0, 0};
  EXPECT_TRUE(w.build_context(w.device(0)).neighbours.empty());
}

TEST(BuildContext, RangeUsesPerceivedPositions) {
  World w(config());
  w.add_device(0, {0, 0, 0});
  w.add_device(1, {150, 0, 0});
  oracle::sweeps(w, ids(), 2);
  const auto ctx = w.build_context(w.device(0));
  ASSERT_EQ(ctx.neighbours.size(), 1u);
  EXPECT_DOUBLE_EQ(ctx.neighbours[0].distance, 150.0);
}

TEST(Deliver, LossExtremes) {
  for (double loss : {0.0, 1.0}) {
    EngineConfig c = config();
    c.faults.loss = loss;
    World w(c);
    for (int i = 0; i < 4; ++i) w.add_device(i, {i * 10.0, 0, 0});
    oracle::sweeps(w, ids(), 5);
    if (loss == 0.0) {
      EXPECT_EQ(w.delivery_stats().dropped, 0u);
      EXPECT_GT(w.delivery_stats().delivered, 0u);
    } else {
      EXPECT_EQ(w.delivery_stats().delivered, 0u);
      for (const auto& d : w.devices()) EXPECT_TRUE(d.inbox.empty());
    }
  }
}

TEST(Deliver, HalfLossRateMonteCarlo) {
  EngineConfig c = config();
  c.faults.loss = 0.5;
  World w(c);
  w.add_device(0, {0, 0, 0});
  w.add_device(1, {10, 0, 0});
  const auto p = counter();
  while (w.delivery_stats().delivered + w.delivery_stats().dropped < 10000) w.step(p);
  const auto& s = w.delivery_stats();
  const double rate = double(s.dropped) / double(s.dropped + s.delivered);
  EXPECT_NEAR(rate, 0.5, 0.02);
}

TEST(PerceivedPosition, ZeroNoiseIsIdentity) {
  std::mt19937_64 rng(1);
  const Position p{3, 4, 5};
  EXPECT_EQ(perceived_position(p, 0.0, rng), p);
}

TEST(PerceivedPosition, NoiseStatistics) {
  std::mt19937_64 rng(2);
  const Position p{100, -50, 7};
  const int n = 10000;
  double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
  for (int i = 0; i < n; ++i) {
    const Position q = perceived_position(p, 10.0, rng);
    ASSERT_EQ(q.z, p.z);
    const double dx = q.x - p.x, dy = q.y - p.y;
    sx += dx;
    sy += dy;
    sxx += dx * dx;
    syy += dy * dy;
    sxy += dx * dy;
  }
  const double mx = sx / n, my = sy / n;
  const double vx = sxx / n - mx * mx, vy = syy / n - my * my;
  EXPECT_NEAR(std::sqrt(vx), 10.0, 0.5);
  EXPECT_LT(std::abs((sxy / n - mx * my) / std::sqrt(vx * vy)), 0.05);
}

TEST(ApplyKill, ZeroFractionKillsNobody) {
  EngineConfig c = config();
  c.faults.kill_fraction = 0.0;
  World w(c);
  for (int i = 0; i < 10; ++i) w.add_device(i, {i * 1.0, 0, 0});
  EXPECT_TRUE(w.apply_kill().empty());
  EXPECT_EQ(w.alive_ids().size(), 10u);
}

TEST(ApplyKill, ThirtyPercentOfFortyNineSparesLeader) {
  EngineConfig c = config();
  c.faults.kill_fraction = 0.3;
  c.faults.kill_time = 5.0;
  c.protected_devices = {24};
  World w(c);
  for (int i = 0; i < 49; ++i) w.add_device(i, {(i % 7) * 20.0, (i / 7) * 20.0, 0});
  oracle::sweeps(w, counter(), 8);
  EXPECT_TRUE(w.kill_applied());
  EXPECT_EQ(w.alive_ids().size(), 49u - 14u);
  EXPECT_TRUE(w.device(24).alive);
}

TEST(ApplyKill, KilledExportsLeaveContexts) {
  World w(config());
  w.add_device(0, {0, 0, 0});
  w.add_device(1, {10, 0, 0});
  const auto p = ids();
  oracle::sweeps(w, p, 3);
  w.kill(1);
  oracle::sweeps(w, p, 4);
  EXPECT_EQ(decode<std::vector<DeviceId>>(w.device(0).last_output), (std::vector<DeviceId>{0}));
  EXPECT_FALSE(w.device(1).alive);
}

TEST(ApplyKinematics, Examples) {
  DeviceState d;
  apply_kinematics(d, 1.0, 5.556);
  EXPECT_EQ(d.true_position, Position{});
  d.goal.velocity = {10, 0, 0};
  apply_kinematics(d, 1.0, 5.556);
  EXPECT_NEAR(d.true_position.x, 5.556, 1e-12);
  EXPECT_EQ(d.true_position.y, 0.0);
  d.true_position = {};
  d.goal.velocity = {1, 2, 0};
  apply_kinematics(d, 0.5, 5.556);
  EXPECT_EQ(d.true_position, (Position{0.5, 1.0, 0}));
}

TEST(Actuation, RoundBasedGoalsLapseAndLongStandingPersist) {
  EngineConfig c = config();
  c.max_speed = 100.0;
  c.speed_scale = 1.0;
  World w(c);
  w.add_device(0, {0, 0, 0});
  auto once = make_program([](Round& r) {
    if (r.rep(0, [](int x) { return x + 1; }) == 1) r.set_actuation({{1, 0, 0}, Modality::LongStanding});
    return 0;
  });
  oracle::sweeps(w, once, 5);
  EXPECT_NEAR(w.device(0).true_position.x, 4.0, 1e-9);  // moves between every pair of rounds
  World v(c);
  v.add_device(0, {0, 0, 0});
  auto first_only = make_program([](Round& r) {
    if (r.rep(0, [](int x) { return x + 1; }) == 1) r.set_actuation({{1, 0, 0}, Modality::RoundBased});
    return 0;
  });
  oracle::sweeps(v, first_only, 5);
  EXPECT_NEAR(v.device(0).true_position.x, 1.0, 1e-9);
}

// A 4-device chain run with full delivery; events recorded.
World recorded_chain(std::uint64_t seed, World::DeliveryFilter filter = {}) {
  EngineConfig c = config(15.0, seed);
  c.record_events = true;
  c.max_speed = 0.0;
  World w(c);
  for (int i = 0; i < 4; ++i) w.add_device(i, {i * 10.0, 0, 0});
  if (filter) w.set_delivery_filter(std::move(filter));
  oracle::sweeps(w, distance_field(), 12);
  return w;
}

Topology chain_topology() { return unit_disc_topology(oracle::chain(4, 10.0), 15.0); }

TEST(CheckAdhering, FullDeliveryAdheres) {
  const auto w = recorded_chain(3);
  EXPECT_TRUE(check_adhering(w.events(), {0, 1, 2, 3}, chain_topology(), {3.0, 12.0}));
}

TEST(CheckAdhering, DropInsideWindowBreaksAdherence) {
  const auto w = recorded_chain(3, [](DeviceId from, DeviceId to, SimTime t) {
    return !(from == 1 && to == 2 && t >= 6.0 && t < 7.0);
  });
  EXPECT_FALSE(check_adhering(w.events(), {0, 1, 2, 3}, chain_topology(), {3.0, 12.0}));
}

TEST(CheckAdhering, DropBeforeWindowIsForgotten) {
  const auto w = recorded_chain(3, [](DeviceId from, DeviceId to, SimTime t) {
    return !(from == 1 && to == 2 && t >= 1.0 && t < 2.0);
  });
  EXPECT_FALSE(check_adhering(w.events(), {0, 1, 2, 3}, chain_topology(), {1.0, 12.0}));
  EXPECT_TRUE(check_adhering(w.events(), {0, 1, 2, 3}, chain_topology(), {4.0, 12.0}));
}

TEST(DetectConvergence, ConstantCounterAndGradient) {
  EngineConfig c = config(15.0);
  c.record_events = true;
  c.max_speed = 0.0;
  {
    World w(c);
    for (int i = 0; i < 3; ++i) w.add_device(i, {i * 10.0, 0, 0});
    oracle::sweeps(w, make_program([](Round&) { return 42; }), 3);
    for (const auto& [id, v] : detect_convergence(w.events(), 3)) EXPECT_EQ(v, std::optional<Value>(Value(42)));
  }
  {
    World w(c);
    for (int i = 0; i < 3; ++i) w.add_device(i, {i * 10.0, 0, 0});
    oracle::sweeps(w, counter(), 6);
    for (const auto& [id, v] : detect_convergence(w.events(), 3)) EXPECT_FALSE(v.has_value());
  }
  {
    const auto layout = oracle::grid(3, 4, 10.0);
    World w(c);
    for (const auto& [id, p] : layout) w.add_device(id, p);
    oracle::sweeps(w, distance_field(), 12);
    const auto expected = oracle::shortest_paths(layout, {0}, 15.0);
    for (const auto& [id, v] : detect_convergence(w.events(), 3)) {
      ASSERT_TRUE(v.has_value()) << id;
      EXPECT_NEAR(*v->as_double(), expected.at(id), 1e-9);
    }
  }
}

TEST(EventStructure, DumpParsesBack) {
  const auto w = recorded_chain(5);
  const std::string dump = w.events().dump();
  const auto parsed = EventStructure::parse(dump);
  EXPECT_EQ(parsed.dump(), dump);
  EXPECT_EQ(parsed.events().size(), w.events().events().size());
  EXPECT_EQ(parsed.edges(), w.events().edges());
  EXPECT_THROW(EventStructure::parse("event 0 1 x\n"), std::runtime_error);
  EXPECT_THROW(EventStructure::parse("bogus 1 2\n"), std::runtime_error);
}

TEST(Invariants, EdgesRespectTimeOrder) {
  const auto w = recorded_chain(9);
  for (const auto& e : w.events().edges()) EXPECT_LT(w.events().event(e.from).time, w.events().event(e.to).time);
}

TEST(Invariants, DeterministicAcrossRuns) {
  EXPECT_EQ(recorded_chain(11).events().dump(), recorded_chain(11).events().dump());
  EXPECT_NE(recorded_chain(11).events().dump(), recorded_chain(12).events().dump());
}

TEST(Invariants, SchedulerIsFair) {
  World w(config());
  const int n = 7, k = 10;
  for (int i = 0; i < n; ++i) w.add_device(i, {i * 1.0, 0, 0});
  const auto p = counter();
  for (int s = 0; s < n * k; ++s) w.step(p);
  for (const auto& d : w.devices()) EXPECT_GE(d.rounds, std::uint64_t(k - 1));
}

TEST(Invariants, SpeedCapHoldsBetweenEvents) {
  EngineConfig c = config(200.0, 4);
  c.record_events = true;
  World w(c);
  std::mt19937_64 rng(4);
  for (int i = 0; i < 6; ++i) w.add_device(i, {double(rng() % 100), double(rng() % 100), 0});
  auto wild = make_program([](Round& r) { return Vec3{r.uniform(-50, 50), r.uniform(-50, 50), 0}; });
  oracle::sweeps(w, wild, 20);
  std::map<DeviceId, const Event*> last;
  for (const auto& e : w.events().events()) {
    if (auto it = last.find(e.device); it != last.end()) {
      const double dt = e.time - it->second->time;
      EXPECT_LE(e.position.distance(it->second->position) / dt, c.max_speed + 1e-9);
    }
    last[e.device] = &e;
  }
}

TEST(Invariants, InboxEntriesMatchDeliveryEdges) {
  const auto w = recorded_chain(13);
  std::set<std::pair<EventId, EventId>> edges;
  for (const auto& e : w.events().edges()) edges.insert({e.from, e.to});
  for (const auto& d : w.devices())
    for (const auto& [from, m] : d.inbox) {
      // the sender event exists and belongs to the sender
      ASSERT_GE(m.sender_event, 0);
      EXPECT_EQ(w.events().event(m.sender_event).device, from);
    }
  EXPECT_FALSE(edges.empty());
}

TEST(FaultConfig, RejectsOutOfRange) {
  FaultConfig f;
  f.loss = 1.5;
  EXPECT_THROW(f.validate(), std::invalid_argument);
  f = {};
  f.noise = -1;
  EXPECT_THROW(f.validate(), std::invalid_argument);
  f = {};
  f.kill_fraction = 2;
  EXPECT_THROW(f.validate(), std::invalid_argument);
  EngineConfig bad;
  bad.comm_range = 0.0;
  EXPECT_THROW(World{bad}, std::invalid_argument);
}

}  // namespace

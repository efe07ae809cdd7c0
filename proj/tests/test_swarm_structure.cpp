#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "fieldswarm/fieldswarm.hpp"
#include "fieldswarm/harness/metrics.hpp"
#include "oracles.hpp"

using namespace fieldswarm;

namespace {

World mobile_world(const oracle::Layout& layout, double range, std::uint64_t seed) {
  EngineConfig cfg;
  cfg.comm_range = range;
  cfg.seed = seed;
  World w(cfg);
  for (const auto& [id, p] : layout) w.add_device(id, p);
  return w;
}

std::map<DeviceId, Position> positions_of(const World& w) {
  std::map<DeviceId, Position> out;
  for (const auto& d : w.devices())
    if (d.alive) out[d.id] = d.true_position;
  return out;
}

void expect_near(const Vec3& a, const Vec3& b, double tol = 1e-9) {
  EXPECT_LT(a.distance(b), tol) << "(" << a.x << "," << a.y << "," << a.z << ") vs (" << b.x << "," << b.y << ","
                                << b.z << ")";
}

TEST(AlignWithLeader, FollowersCopyTheLeader) {
  std::mt19937_64 rng(1);
  const auto layout = oracle::random_connected(rng, 20, 400.0, 150.0);
  auto w = oracle::frozen_world(layout, 150.0, 1);
  oracle::sweeps(w, make_program([](Round& r) { return align_with_leader(r, r.mid() == 4, Vec3{1, 0, 0}); }), 30);
  for (const auto& [id, v] : oracle::outputs<Vec3>(w)) EXPECT_EQ(v, Vec3(1, 0, 0)) << id;
}

TEST(AlignWithLeader, TwoLeadersSplitByVoronoiAndNoLeaderIsZero) {
  std::mt19937_64 rng(2);
  const auto layout = oracle::random_connected(rng, 25, 500.0, 200.0);
  auto w = oracle::frozen_world(layout, 200.0, 2);
  auto velocity_of = [](DeviceId id) { return Vec3{static_cast<double>(id), 1.0, 0.0}; };
  oracle::sweeps(w, make_program([&](Round& r) {
                   return align_with_leader(r, r.mid() == 3 || r.mid() == 11, velocity_of(r.mid()));
                 }), 40);
  const auto owner = oracle::voronoi(layout, {3, 11}, 200.0);
  for (const auto& [id, v] : oracle::outputs<Vec3>(w)) EXPECT_EQ(v, velocity_of(owner.at(id))) << id;

  auto none = oracle::frozen_world(layout, 200.0, 3);
  oracle::sweeps(none, make_program([](Round& r) { return align_with_leader(r, false, Vec3{1, 1, 0}); }), 5);
  for (const auto& [id, v] : oracle::outputs<Vec3>(none)) EXPECT_EQ(v, Vec3{}) << id;
}

TEST(SinkAt, PointsAtTheLeader) {
  auto w = oracle::frozen_world({{0, {0, 0, 0}}, {1, {100, 0, 0}}}, 150.0, 4);
  oracle::sweeps(w, make_program([](Round& r) { return sink_at(r, r.mid() == 0); }), 4);
  const auto out = oracle::outputs<Vec3>(w);
  EXPECT_EQ(out.at(0), Vec3{});
  EXPECT_EQ(out.at(1), Vec3(-1, 0, 0));
}

TEST(SinkAt, ScatteredClusterGathers) {
  std::mt19937_64 rng(5);
  const auto layout = oracle::random_connected(rng, 10, 200.0, 120.0);
  auto w = mobile_world(layout, 120.0, 5);
  oracle::sweeps(w, make_program([](Round& r) { return sink_at(r, r.mid() == 0); }), 120);
  const auto at = positions_of(w);
  for (const auto& [id, p] : at) EXPECT_LE(p.distance(at.at(0)), 10.0) << id;
}

TEST(ShapeOffsets, Examples) {
  const double s = 20.0;
  const auto v = shape_offsets(ShapeSpec{ShapeKind::VShape, s, 60.0, 0.0}, 2);
  ASSERT_EQ(v.size(), 2u);
  expect_near(v[0], {-s * std::cos(std::numbers::pi / 6), -s * std::sin(std::numbers::pi / 6), 0});
  expect_near(v[1], {-s * std::cos(std::numbers::pi / 6), s * std::sin(std::numbers::pi / 6), 0});

  // A moving leader trails its arms behind the motion.
  const auto moving = shape_offsets(ShapeSpec{ShapeKind::VShape, s, 60.0, 0.0}, 2, Vec3{0, 1, 0});
  EXPECT_LT(moving[0].y, 0.0);
  EXPECT_LT(moving[1].y, 0.0);

  const auto l = shape_offsets(ShapeSpec{ShapeKind::Line, 15.0, 0.0, 0.0}, 4);
  EXPECT_EQ(l, (std::vector<Vec3>{{15, 0, 0}, {-15, 0, 0}, {30, 0, 0}, {-30, 0, 0}}));

  const auto c = shape_offsets(ShapeSpec{ShapeKind::Circle, 0.0, 0.0, 60.0}, 4);
  expect_near(c[0], {60, 0, 0});
  expect_near(c[1], {0, 60, 0});
  expect_near(c[2], {-60, 0, 0});
  expect_near(c[3], {0, -60, 0});
}

TEST(ShapeSpec, RejectsBadParameters) {
  EXPECT_THROW((ShapeSpec{ShapeKind::Circle, 0.0, 0.0, 0.0}.validate()), std::invalid_argument);
  EXPECT_THROW((ShapeSpec{ShapeKind::Line, -1.0, 0.0, 0.0}.validate()), std::invalid_argument);
  EXPECT_THROW((ShapeSpec{ShapeKind::VShape, 10.0, 180.0, 0.0}.validate()), std::invalid_argument);
  EXPECT_NO_THROW((ShapeSpec{ShapeKind::VShape, 10.0, 60.0, 0.0}.validate()));
}

TEST(FormationPattern, RequiresOriginAndDistinctOffsets) {
  EXPECT_THROW((FormationPattern{{{1, 0, 0}}, 5.0}.validate()), std::invalid_argument);
  EXPECT_THROW((FormationPattern{{{}, {1, 0, 0}, {1, 0, 0}}, 5.0}.validate()), std::invalid_argument);
  EXPECT_THROW((FormationPattern{{{}}, 0.0}.validate()), std::invalid_argument);
  EXPECT_NO_THROW((FormationPattern{{{}, {1, 0, 0}}, 5.0}.validate()));
}

TEST(InFormation, EpsilonBoundary) {
  FormationAssignment a;
  a.anchor = 0;
  a.offsets = {{0, {}}, {1, {10, 0, 0}}, {2, {0, 10, 0}}};
  const double eps = 5.0, delta = 0.01;
  const std::map<DeviceId, Position> positions{
      {0, {100, 100, 0}}, {1, {110, 100 + eps - delta, 0}}, {2, {100, 110 + eps + delta, 0}}};
  const auto in = in_formation(positions, a, eps);
  EXPECT_TRUE(in.at(0));
  EXPECT_TRUE(in.at(1));
  EXPECT_FALSE(in.at(2));
}

TEST(InFormation, AgreesWithFormationErrorOnALattice) {
  std::mt19937_64 rng(6);
  const auto lattice = oracle::grid(7, 7, 10.0);
  std::vector<DeviceId> ids;
  for (const auto& [id, p] : lattice) ids.push_back(id);
  const auto a = assign_slots(24, ids, ShapeSpec{ShapeKind::Circle, 0.0, 0.0, 60.0});
  std::map<DeviceId, Position> targets, positions;
  std::normal_distribution<double> jitter(0.0, 4.0);
  for (const auto& [id, o] : a.offsets) {
    targets[id] = Position{30, 30, 0} + o;
    positions[id] = id == 24 ? targets[id] : targets[id] + Vec3{jitter(rng), jitter(rng), 0.0};
  }
  int inside = 0;
  for (const auto& [id, ok] : in_formation(positions, a, 5.0)) inside += ok ? 1 : 0;
  EXPECT_EQ(inside, 49 - harness::formation_error(positions, targets, 5.0));
}

TEST(Assignment, ByRankAndGreedy) {
  const ShapeSpec circle{ShapeKind::Circle, 0.0, 0.0, 60.0};
  const auto rank = assign_slots(0, {2, 1, 0}, circle);
  EXPECT_EQ(rank.offsets.at(0), Vec3{});
  expect_near(rank.offsets.at(1), {60, 0, 0});
  expect_near(rank.offsets.at(2), {-60, 0, 0});

  auto greedy_circle = circle;
  greedy_circle.assignment = SlotAssignment::GreedyNearest;
  const auto greedy = assign_slots_nearest(0, {0, 0, 0}, {{0, {0, 0, 0}}, {1, {-59, 0, 0}}, {2, {59, 1, 0}}},
                                           greedy_circle);
  expect_near(greedy.offsets.at(1), {-60, 0, 0});
  expect_near(greedy.offsets.at(2), {60, 0, 0});

  const auto pattern = assign_pattern(5, {9, 5, 7, 8}, FormationPattern{{{}, {0, 5, 0}, {5, 0, 0}}, 1.0});
  EXPECT_EQ(pattern.offsets.size(), 3u);
  EXPECT_EQ(pattern.offsets.at(7), Vec3(0, 5, 0));
  EXPECT_EQ(pattern.offsets.at(8), Vec3(5, 0, 0));
  EXPECT_FALSE(pattern.offsets.count(9));
}

TEST(FormShape, MembersAtTheirTargetsStayStill) {
  oracle::Layout layout{{0, {0, 0, 0}}};
  const auto slots = shape_offsets(ShapeSpec{ShapeKind::Circle, 0.0, 0.0, 60.0}, 4);
  for (DeviceId i = 1; i <= 4; ++i) layout[i] = Position{} + slots[static_cast<std::size_t>(i - 1)];
  auto w = oracle::frozen_world(layout, 100.0, 7);
  oracle::sweeps(w, make_program([](Round& r) { return centered_circle(r, r.mid() == 0, 60.0); }), 10);
  for (const auto& [id, v] : oracle::outputs<Vec3>(w)) EXPECT_EQ(v, Vec3{}) << id;
}

TEST(FormShape, AnchorOutputIsAlwaysItsOwnVelocity) {
  std::mt19937_64 rng(8);
  for (int g = 0; g < 5; ++g) {
    const auto layout = oracle::random_connected(rng, 15, 300.0, 120.0);
    auto w = mobile_world(layout, 120.0, rng());
    auto p = make_program([](Round& r) { return v_shape(r, r.mid() == 0, 20.0, 60.0); });
    for (int i = 0; i < 40; ++i) {
      w.sweep(p);
      ASSERT_EQ(*w.device(0).last_output.as_vec(), Vec3{}) << "sweep " << i;
    }
  }
}

TEST(FormShape, ExplicitPatternSteersToTargets) {
  auto w = oracle::frozen_world({{0, {0, 0, 0}}, {1, {0, 20, 0}}, {2, {20, 0, 0}}}, 50.0, 9);
  const FormationPattern pattern{{{}, {10, 0, 0}, {0, 10, 0}}, 1.0};
  oracle::sweeps(w, make_program([&](Round& r) { return form_shape(r, r.mid() == 0, pattern); }), 10);
  const auto out = oracle::outputs<Vec3>(w);
  expect_near(out.at(1), Vec3(10, -20, 0).normalized());
  expect_near(out.at(2), Vec3(-20, 10, 0).normalized());
}

TEST(FormShape, FrozenTopologyKeepsTheAssignment) {
  std::mt19937_64 rng(10);
  const auto layout = oracle::random_connected(rng, 12, 200.0, 100.0);
  auto w = oracle::frozen_world(layout, 100.0, 10);
  auto p = make_program([](Round& r) {
    const auto step = form_shape_step(r, r.mid() == 0, ShapeSpec{ShapeKind::Line, 15.0, 0.0, 0.0});
    return step.target.value_or(Position{-1e9, 0, 0});
  });
  oracle::sweeps(w, p, 30);
  const auto settled = oracle::outputs<Vec3>(w);
  for (const auto& [id, t] : settled) EXPECT_GT(t.x, -1e8) << id << " has no target";
  for (int i = 0; i < 50; ++i) {
    w.sweep(p);
    ASSERT_EQ(oracle::outputs<Vec3>(w), settled) << "sweep " << i;
  }
}

TEST(FormShape, ClosedLoopReachesTheCircle) {
  const auto lattice = oracle::grid(3, 3, 15.0);
  auto w = mobile_world(lattice, 200.0, 11);
  const ShapeSpec circle{ShapeKind::Circle, 0.0, 0.0, 40.0};
  oracle::sweeps(w, make_program([&](Round& r) { return form_shape(r, r.mid() == 4, circle); }), 120);
  std::vector<DeviceId> ids;
  for (const auto& [id, p] : lattice) ids.push_back(id);
  const auto a = assign_slots(4, ids, circle);
  for (const auto& [id, ok] : in_formation(positions_of(w), a, 5.0)) EXPECT_TRUE(ok) << id;
}

TEST(IsTeamFormed, Examples) {
  auto lone = oracle::frozen_world({{0, {0, 0, 0}}}, 100.0, 12);
  oracle::sweeps(lone, make_program([](Round& r) { return is_team_formed(r, true, 20.0, 0); }), 3);
  EXPECT_TRUE(*lone.device(0).last_output.as_bool());

  auto apart = oracle::frozen_world({{0, {0, 0, 0}}, {1, {40, 0, 0}}}, 100.0, 13);
  oracle::sweeps(apart, make_program([](Round& r) { return is_team_formed(r, r.mid() == 0, 20.0, 1); }), 5);
  for (const auto& [id, v] : oracle::outputs<bool>(apart)) EXPECT_FALSE(v) << id;

  auto close = oracle::frozen_world({{0, {0, 0, 0}}, {1, {15, 0, 0}}}, 100.0, 14);
  oracle::sweeps(close, make_program([](Round& r) { return is_team_formed(r, r.mid() == 0, 20.0, 1); }), 5);
  for (const auto& [id, v] : oracle::outputs<bool>(close)) EXPECT_TRUE(v) << id;
}

std::vector<double> team_view(const Team& t) {
  return {t.leader ? static_cast<double>(*t.leader) : -1.0, t.velocity.x, t.velocity.y};
}

TEST(TeamFormation, ExplicitLeadersPartitionByNearestHealer) {
  std::mt19937_64 rng(15);
  const auto layout = oracle::random_connected(rng, 40, 600.0, 200.0);
  const std::set<DeviceId> healers{2, 9, 17, 25, 33};
  auto w = oracle::frozen_world(layout, 200.0, 15);
  oracle::sweeps(w, make_program([&](Round& r) {
                   return team_view(team_formation(r, healers.count(r.mid()) != 0, 20.0, [](DeviceId) { return false; }));
                 }), 50);
  const auto owner = oracle::voronoi(layout, healers, 200.0);
  std::set<double> teams;
  for (const auto& [id, v] : oracle::outputs<std::vector<double>>(w)) {
    EXPECT_EQ(v[0], owner.at(id)) << id;
    teams.insert(v[0]);
  }
  EXPECT_EQ(teams.size(), 5u);
}

TEST(TeamFormation, CoarseGrainGivesOneTeam) {
  std::mt19937_64 rng(16);
  const auto layout = oracle::random_connected(rng, 30, 500.0, 200.0);
  auto w = oracle::frozen_world(layout, 200.0, 16);
  oracle::sweeps(w, make_program([](Round& r) {
                   return team_view(team_formation(r, 20.0, 1e6, [](DeviceId) { return false; }));
                 }), 80);
  std::set<double> teams;
  for (const auto& [id, v] : oracle::outputs<std::vector<double>>(w)) teams.insert(v[0]);
  EXPECT_EQ(teams.size(), 1u);
  EXPECT_NE(*teams.begin(), -1.0);
}

TEST(TeamFormation, SatisfiedConditionSkipsGathering) {
  std::mt19937_64 rng(17);
  const auto layout = oracle::random_connected(rng, 15, 300.0, 150.0);
  auto w = oracle::frozen_world(layout, 150.0, 17);
  oracle::sweeps(w, make_program([](Round& r) {
                   return team_formation(r, r.mid() == 0, 20.0, [](DeviceId) { return true; }).velocity;
                 }), 10);
  for (const auto& [id, v] : oracle::outputs<Vec3>(w)) EXPECT_EQ(v, Vec3{}) << id;
}

TEST(TeamFormation, InsideTeamRunsPerTeam) {
  auto w = oracle::frozen_world(oracle::chain(10, 10.0), 15.0, 18);
  auto velocity_of = [](DeviceId leader) { return Vec3{1.0, static_cast<double>(leader), 0.0}; };
  auto p = make_program([&](Round& r) {
    const Team t = team_formation(r, r.mid() == 0 || r.mid() == 9, 5.0, [](DeviceId) { return true; });
    const Vec3 v = t.inside_team(r, [&](DeviceId leader) { return align_with_leader(r, t.is_leader, velocity_of(leader)); });
    const Vec3 constant = t.inside_team(r, [](DeviceId) { return Vec3{7, 7, 7}; });
    return std::vector<Vec3>{v, constant};
  });
  oracle::sweeps(w, p, 20);
  for (const auto& [id, out] : oracle::outputs<std::vector<Vec3>>(w)) {
    EXPECT_EQ(out[0], velocity_of(id < 5 ? 0 : 9)) << id;
    EXPECT_EQ(out[1], Vec3(7, 7, 7)) << id;
  }
}

TEST(TeamFormation, SwitchingTeamRealignsInTheSameRound) {
  // Device 2 sits next to leader 0; moving it beside leader 9 makes it a
  // member of 9's team, and its body immediately sees that team's values.
  oracle::Layout layout{{0, {0, 0, 0}}, {1, {10, 0, 0}}, {2, {20, 0, 0}}, {8, {200, 0, 0}}, {9, {210, 0, 0}}};
  auto w = oracle::frozen_world(layout, 15.0, 19);
  auto velocity_of = [](DeviceId leader) { return Vec3{0.0, static_cast<double>(leader), 0.0}; };
  auto p = make_program([&](Round& r) {
    const Team t = team_formation(r, r.mid() == 0 || r.mid() == 9, 5.0, [](DeviceId) { return true; });
    const Vec3 v = t.inside_team(r, [&](DeviceId leader) { return align_with_leader(r, t.is_leader, velocity_of(leader)); });
    return std::vector<double>{t.leader ? static_cast<double>(*t.leader) : -1.0, v.y};
  });
  oracle::sweeps(w, p, 10);
  ASSERT_EQ(oracle::outputs<std::vector<double>>(w).at(2), (std::vector<double>{0.0, 0.0}));
  w.device(2).true_position = {190, 0, 0};
  bool switched = false;
  for (int i = 0; i < 20 && !switched; ++i) {
    w.sweep(p);
    const auto out = oracle::outputs<std::vector<double>>(w).at(2);
    if (out[0] == 9.0) {
      switched = true;
      EXPECT_EQ(out[1], 9.0);
    }
  }
  EXPECT_TRUE(switched);
}

}  // namespace

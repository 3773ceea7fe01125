#include <collabnav/planner.hpp>
#include <collabnav/rng.hpp>

#include <gtest/gtest.h>

#include <cmath>

using namespace collabnav;
using namespace collabnav::planner;
using sensing::LidarScan;

namespace {

LidarScan uniform_scan(double range, int n = 360) {
  LidarScan s;
  s.angles = sensing::beam_angles(n);
  s.ranges.assign(s.angles.size(), range);
  return s;
}

PlannerConfig wide_config() {
  PlannerConfig cfg;
  cfg.r_protect = 0.3;
  cfg.v_max = 0.5;
  cfg.dt = 0.4;
  return cfg;
}

}  // namespace

TEST(SafeZone, EnvelopeAndBoundary) {
  const auto env = SafetyEnvelope::from(wide_config());
  EXPECT_NEAR(env.r_safe, 0.5, 1e-12);
  EXPECT_NEAR(env.theta_sec, 1.965587446494658, 1e-9);
  EXPECT_DOUBLE_EQ(safe_boundary(0.0, env), 0.5);
  EXPECT_NEAR(safe_boundary(kPi / 2, env), 0.416025147, 1e-6);
  EXPECT_NEAR(safe_boundary(-kPi / 2, env), 0.416025147, 1e-6);
  const double half = env.theta_sec / 2;
  EXPECT_EQ(safe_boundary(half, env), env.r_safe);
  EXPECT_EQ(safe_boundary(std::nextafter(half, 0.0), env), env.r_safe);
}

TEST(SafeZone, VelocityHandValues) {
  PlannerConfig cfg;
  cfg.v_max = 2.0;  // r_safe = 0.4, theta_sec = pi/2
  const auto env = SafetyEnvelope::from(cfg);
  auto s = uniform_scan(2.5);
  s.ranges[sensing::beam_index(360, 0.0)] = 0.6;
  EXPECT_NEAR(safe_velocity(s, 0.0, env, cfg), 0.632455532, 1e-6);
  EXPECT_NEAR(safe_velocity(s, s.angles[sensing::beam_index(360, kPi / 6)], env, cfg), 0.730296743, 1e-6);
  EXPECT_NEAR(safe_velocity(s, s.angles[sensing::beam_index(360, kPi / 3)], env, cfg), 1.478922223, 1e-6);
}

TEST(SafeZone, VelocityClampZeroAndBehind) {
  const auto cfg = wide_config();
  const auto env = SafetyEnvelope::from(cfg);
  EXPECT_DOUBLE_EQ(safe_velocity(uniform_scan(2.5), 0.0, env, cfg), 0.5);
  auto s = uniform_scan(2.5);
  s.ranges[sensing::beam_index(360, 0.0)] = 0.5;
  EXPECT_EQ(safe_velocity(s, 0.0, env, cfg), 0.0);
  auto behind = uniform_scan(2.5);
  for (std::size_t k = 0; k < behind.size(); ++k)
    if (std::abs(behind.angles[k]) > 2.0) behind.ranges[k] = 0.1;
  EXPECT_DOUBLE_EQ(safe_velocity(behind, 0.0, env, cfg), 0.5);
}

TEST(SafeZone, TableAgreesWithDirectFormula) {
  PlannerConfig cfg;
  const SafeZone zone(cfg, 360);
  Rng rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    auto s = uniform_scan(2.5);
    for (auto& r : s.ranges) r = rng.uniform() < 0.3 ? rng.uniform(0.2, 2.5) : 2.5;
    for (std::size_t k = 0; k < s.size(); k += 7) {
      EXPECT_NEAR(zone.velocity(s, k), safe_velocity(s, s.angles[k], zone.envelope(), cfg), 1e-12);
    }
    EXPECT_EQ(zone.key_point(s), key_point(s, zone.envelope(), cfg));
  }
}

TEST(SafeZone, KeyPoints) {
  const auto cfg = wide_config();
  const auto env = SafetyEnvelope::from(cfg);
  EXPECT_FALSE(key_point(uniform_scan(2.5), env, cfg));

  auto wall = uniform_scan(2.5);
  for (std::size_t k = 0; k < wall.size(); ++k)
    if (std::abs(wall.angles[k]) < kPi / 2) wall.ranges[k] = 0.3;
  EXPECT_TRUE(key_point(wall, env, cfg));

  // A post 0.45 m dead ahead blocks near-frontal headings; only steep ones stay safe.
  auto post = uniform_scan(2.5);
  for (std::size_t k = 0; k < post.size(); ++k)
    if (std::abs(post.angles[k]) < 0.1) post.ranges[k] = 0.45;
  EXPECT_FALSE(key_point(post, env, cfg));
  EXPECT_EQ(safe_velocity(post, 0.0, env, cfg), 0.0);
  const SafeZone zone(cfg, 360);
  const auto h = zone.best_heading(post, 0.2);
  ASSERT_TRUE(h);
  EXPECT_GT(post.angles[*h], 1.2);
}

TEST(Modes, StandbyGoesToA) {
  const SafeZone zone(PlannerConfig{}, 360);
  RobotState s;
  s.goal = {5, 0};
  const auto out = step_mode(s, uniform_scan(2.5), 0.0, [] { return Turn::Left; }, zone);
  EXPECT_EQ(s.mode.kind, ModeKind::A);
  EXPECT_EQ(out.cmd.v, 0.0);
}

TEST(Modes, RotateInA) {
  const SafeZone zone(PlannerConfig{}, 360);
  RobotState s;
  s.goal = {5, 0};
  s.mode = {ModeKind::A, Side::None};
  const auto out = step_mode(s, uniform_scan(2.5), 0.3, [] { return Turn::Left; }, zone);
  EXPECT_EQ(s.mode.kind, ModeKind::A);
  EXPECT_EQ(out.cmd.v, 0.0);
  EXPECT_DOUBLE_EQ(out.cmd.omega, 0.3);
}

TEST(Modes, KeyPointConsultsAdvice) {
  const SafeZone zone(PlannerConfig{}, 360);
  auto wall = uniform_scan(2.5);
  for (std::size_t k = 0; k < wall.size(); ++k)
    if (std::abs(wall.angles[k]) < kPi / 2) wall.ranges[k] = 0.2;
  for (Turn t : {Turn::Left, Turn::Right}) {
    RobotState s;
    s.goal = {5, 0};
    s.mode = {ModeKind::B, Side::None};
    int calls = 0;
    const auto out = step_mode(s, wall, 0.0, [&] { ++calls; return t; }, zone);
    EXPECT_EQ(calls, 1);
    ASSERT_TRUE(out.decision);
    EXPECT_EQ(*out.decision, t);
    EXPECT_EQ(s.mode.kind, t == Turn::Left ? ModeKind::C : ModeKind::D);
    EXPECT_EQ(s.mode.side, t == Turn::Left ? Side::Left : Side::Right);
    EXPECT_DOUBLE_EQ(s.hit_distance, 5.0);
    EXPECT_EQ(out.cmd.v, 0.0);
    EXPECT_GT(out.cmd.omega * (t == Turn::Left ? 1 : -1), 0.0);
  }
}

TEST(Modes, OpenPathInBDoesNotAsk) {
  const SafeZone zone(PlannerConfig{}, 360);
  RobotState s;
  s.goal = {5, 0};
  s.mode = {ModeKind::B, Side::None};
  const auto out = step_mode(s, uniform_scan(2.5), 0.0, [] { ADD_FAILURE(); return Turn::Left; }, zone);
  EXPECT_FALSE(out.decision);
  EXPECT_GT(out.cmd.v, 0.0);
  EXPECT_LE(out.cmd.v, 0.1 + 1e-12);  // acceleration-limited from rest
}

TEST(Modes, FollowRightTurnLeavesWhenGoalSwingsRight) {
  const SafeZone zone(PlannerConfig{}, 360);
  RobotState s;
  s.goal = {5, 0};
  s.mode = {ModeKind::F, Side::Right};
  s.hit_distance = 10.0;
  step_mode(s, uniform_scan(2.5), -0.4, [] { return Turn::Left; }, zone);
  EXPECT_EQ(s.mode.kind, ModeKind::A);

  RobotState same_side = s;
  same_side.mode = {ModeKind::F, Side::Right};
  step_mode(same_side, uniform_scan(2.5), 0.4, [] { return Turn::Left; }, zone);
  EXPECT_EQ(same_side.mode.kind, ModeKind::F);
}

TEST(Modes, ArrivalIsDone) {
  const SafeZone zone(PlannerConfig{}, 360);
  RobotState s;
  s.goal = {0.2, 0.0};
  s.mode = {ModeKind::E, Side::Left};
  const auto out = step_mode(s, uniform_scan(2.5), 0.0, [] { return Turn::Left; }, zone);
  EXPECT_EQ(s.mode.kind, ModeKind::Done);
  EXPECT_EQ(out.cmd.v, 0.0);
  EXPECT_EQ(out.cmd.omega, 0.0);
}

TEST(Modes, LegalTransitions) {
  EXPECT_TRUE(legal_transition(ModeKind::Standby, ModeKind::A));
  EXPECT_TRUE(legal_transition(ModeKind::B, ModeKind::D));
  EXPECT_TRUE(legal_transition(ModeKind::F, ModeKind::A));
  EXPECT_TRUE(legal_transition(ModeKind::C, ModeKind::Done));
  EXPECT_FALSE(legal_transition(ModeKind::A, ModeKind::E));
  EXPECT_FALSE(legal_transition(ModeKind::C, ModeKind::F));
  EXPECT_FALSE(legal_transition(ModeKind::Done, ModeKind::A));
}

TEST(Priority, LowerPriorityWaits) {
  const PlannerConfig cfg;
  std::vector<RobotState> st(2);
  st[0].pose = {0, 0, 0};
  st[0].priority = 1;
  st[1].pose = {0.5, 0, kPi};
  st[1].priority = 2;
  const std::vector<VelocityCmd> cmd{{0.3, 0}, {0.3, 0}};
  const bool active[] = {true, true};
  const auto w = priority_avoidance(st, cmd, active, cfg);
  EXPECT_TRUE(w[0]);
  EXPECT_FALSE(w[1]);

  st[1].pose = {5.0, 0, kPi};
  const auto far = priority_avoidance(st, cmd, active, cfg);
  EXPECT_FALSE(far[0]);
  EXPECT_FALSE(far[1]);
}

TEST(Priority, HysteresisAndClosureOfThree) {
  const PlannerConfig cfg;
  std::vector<RobotState> st(3);
  st[0].pose = {0, 0, 0};
  st[1].pose = {0.4, 0, kPi};
  st[2].pose = {0.2, 0.35, -kPi / 2};
  for (int i = 0; i < 3; ++i) st[i].priority = i + 1;
  const std::vector<VelocityCmd> cmd(3, {0.3, 0});
  const bool active[] = {true, true, true};
  const auto w = priority_avoidance(st, cmd, active, cfg);
  EXPECT_TRUE(w[0]);
  EXPECT_TRUE(w[1]);
  EXPECT_FALSE(w[2]);

  // Separating but still within conflict + hysteresis: keeps waiting.
  std::vector<RobotState> pair(2);
  pair[0].pose = {0, 0, kPi};
  pair[0].priority = 1;
  pair[0].waiting = true;
  pair[1].pose = {0.55, 0, 0};
  pair[1].priority = 2;
  const std::vector<VelocityCmd> c2{{0.3, 0}, {0.3, 0}};
  EXPECT_TRUE(priority_avoidance(pair, c2, std::span<const bool>(active, 2), cfg)[0]);
  pair[1].pose = {0.7, 0, 0};
  EXPECT_FALSE(priority_avoidance(pair, c2, std::span<const bool>(active, 2), cfg)[0]);
}

namespace {

world::TaskSpec single(Pose start, Vec2 goal) {
  world::TaskSpec t;
  t.starts = {start};
  t.goals = {goal};
  return t;
}

void expect_safe(const world::WorldMap& m, const EpisodeLog& log, double r_protect) {
  for (const auto& traj : log.trajectories)
    for (const auto& p : traj) ASSERT_GE(m.clearance(p.pose.position()), r_protect - 0.05) << p.step;
}

void expect_legal(const EpisodeLog& log) {
  for (const auto& traj : log.trajectories)
    for (std::size_t k = 1; k < traj.size(); ++k)
      ASSERT_TRUE(legal_transition(traj[k - 1].mode.kind, traj[k].mode.kind))
          << to_string(traj[k - 1].mode.kind) << "->" << to_string(traj[k].mode.kind);
}

}  // namespace

TEST(Episode, StraightLine) {
  const world::WorldMap m;
  const auto grid = world::rasterize(m);
  const auto log = run_episode(grid, single({5, 10, 0}, {10, 10}), FixedTurn(Turn::Left), {}, {});
  ASSERT_TRUE(log.outcomes[0].reached);
  const auto& end = log.trajectories[0].back().pose;
  const double covered = log.outcomes[0].path_length + (Vec2{10, 10} - end.position()).norm();
  EXPECT_NEAR(covered, 5.0, 0.1);
  EXPECT_TRUE(log.decisions.empty());
}

TEST(Episode, WalledOffGoalTimesOut) {
  world::WorldMap m;
  m.obstacles.push_back(world::Rect{{15, 12}, 6, 0.6, 0});
  m.obstacles.push_back(world::Rect{{15, 8}, 6, 0.6, 0});
  m.obstacles.push_back(world::Rect{{12, 10}, 0.6, 4.6, 0});
  m.obstacles.push_back(world::Rect{{18, 10}, 0.6, 4.6, 0});
  const auto grid = world::rasterize(m);
  EpisodeOptions opt;
  opt.budget = 60.0;
  const auto log = run_episode(grid, single({5, 10, 0}, {15, 10}), FixedTurn(Turn::Left), {}, {}, opt);
  EXPECT_FALSE(log.outcomes[0].reached);
  EXPECT_EQ(log.outcomes[0].steps, 600);
  expect_safe(m, log, 0.2);
  expect_legal(log);
}

TEST(Episode, WallWithRightAdvice) {
  world::WorldMap m;
  m.obstacles.push_back(world::Rect{{10, 10}, 0.6, 3.0, 0});
  const auto grid = world::rasterize(m);
  for (Turn t : {Turn::Left, Turn::Right}) {
    const auto log = run_episode(grid, single({6, 10.1, 0}, {14, 10.1}), FixedTurn(t), {}, {});
    ASSERT_TRUE(log.outcomes[0].reached);
    ASSERT_FALSE(log.decisions.empty());
    EXPECT_EQ(log.decisions.front().chosen, t);
    expect_safe(m, log, 0.2);
    expect_legal(log);
    double extreme = 10.1;
    for (const auto& p : log.trajectories[0])
      extreme = t == Turn::Right ? std::min(extreme, p.pose.y) : std::max(extreme, p.pose.y);
    if (t == Turn::Right) EXPECT_LT(extreme, 8.5);
    else EXPECT_GT(extreme, 11.5);
  }
}

TEST(Episode, Deterministic) {
  const auto m = world::generate_map(3, world::MapKind::C);
  const auto grid = world::rasterize(m);
  const auto task = world::place_robots(m, 4, world::TaskKind::I, 3);
  EpisodeOptions opt;
  opt.budget = 30.0;
  const auto a = run_episode(grid, task, RandomTurn(1), {}, {}, opt);
  const auto b = run_episode(grid, task, RandomTurn(1), {}, {}, opt);
  ASSERT_EQ(a.trajectories.size(), b.trajectories.size());
  for (std::size_t i = 0; i < a.trajectories.size(); ++i) {
    ASSERT_EQ(a.trajectories[i].size(), b.trajectories[i].size());
    for (std::size_t k = 0; k < a.trajectories[i].size(); ++k)
      ASSERT_EQ(a.trajectories[i][k].pose, b.trajectories[i][k].pose);
  }
}

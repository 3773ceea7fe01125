#include <collabnav/error.hpp>
#include <collabnav/expert.hpp>
#include <collabnav/rng.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <thread>

namespace collabnav::expert {

using planner::Turn;

SceneRecord generate_scene(std::uint64_t seed, world::MapKind map_kind, world::TaskKind task_kind,
                           const GenerationConfig& gen, const sensing::SensingConfig& sensing) {
  SceneRecord scene;
  scene.seed = seed;
  scene.world = world::generate_map(seed, map_kind, gen.map);
  scene.task = world::place_robots(scene.world, gen.n_robots, task_kind, seed, gen.placement);
  scene.grid = world::rasterize(scene.world, gen.grid_resolution);
  for (std::size_t i = 0; i < scene.task.n_robots(); ++i) {
    RobotRecord r;
    r.pose = scene.task.starts[i];
    r.goal = scene.task.goals[i];
    r.scan = sensing::scan(scene.grid, r.pose, sensing);
    scene.robots.push_back(std::move(r));
  }
  return scene;
}

bool keypoint_filter(const RobotRecord& record, const planner::SafeZone& zone) { return zone.key_point(record.scan); }

std::optional<RobotRecord> advance_to_key_point(const world::OccupancyGrid& grid, const RobotRecord& start,
                                                const planner::SafeZone& zone, const GenerationConfig& gen,
                                                const sensing::SensingConfig& sensing) {
  const auto& cfg = zone.config();
  const double r_safe = zone.envelope().r_safe;
  const Vec2 origin = start.pose.position();
  const Vec2 to_goal = start.goal - origin;
  const double total = to_goal.norm();
  if (total <= cfg.r_goal) return std::nullopt;
  const Vec2 dir = (1.0 / total) * to_goal;
  const double heading = std::atan2(dir.y, dir.x);

  RobotRecord rec{{origin.x, origin.y, heading}, start.goal, {}};
  double travelled = 0.0;
  while (true) {
    rec.scan = sensing::scan(grid, rec.pose, sensing);
    if (zone.key_point(rec.scan)) return rec;
    const double nearest = *std::min_element(rec.scan.ranges.begin(), rec.scan.ranges.end());
    if (nearest < cfg.r_protect - grid.resolution()) return std::nullopt;
    // ranges shrink by at most the distance moved, so no key point is skipped
    const double jump = std::max(gen.advance_step, std::floor((nearest - r_safe) / gen.advance_step) * gen.advance_step);
    travelled += jump;
    if (total - travelled <= cfg.r_goal) return std::nullopt;
    const Vec2 p = origin + travelled * dir;
    rec.pose.x = p.x;
    rec.pose.y = p.y;
  }
}

std::string to_string(Advance a) {
  switch (a) {
    case Advance::None: return "none";
    case Advance::GoalLine: return "line";
    case Advance::Planner: return "planner";
  }
  return "?";
}

Advance parse_advance(const std::string& s) {
  if (s == "none") return Advance::None;
  if (s == "line") return Advance::GoalLine;
  if (s == "planner") return Advance::Planner;
  throw Error("unknown advance mode '" + s + "' (none, line or planner)");
}

AstarLabeler::AstarLabeler(const world::OccupancyGrid& grid, const GenerationConfig& gen)
    : inflated_(world::inflate(grid, gen.inflation)),
      snap_radius_(gen.snap_radius),
      eps_lat_(gen.eps_lat),
      horizon_(gen.horizon) {}

std::optional<world::Cell> AstarLabeler::snap(Vec2 p) const {
  const world::Cell c = inflated_.cell_of(p);
  if (!inflated_.occupied(c)) return c;
  const int reach = static_cast<int>(std::ceil(snap_radius_ / inflated_.resolution()));
  std::optional<world::Cell> best;
  double best_d = snap_radius_ * snap_radius_;
  for (int dy = -reach; dy <= reach; ++dy)
    for (int dx = -reach; dx <= reach; ++dx) {
      const world::Cell q{c.ix + dx, c.iy + dy};
      if (inflated_.occupied(q)) continue;
      const Vec2 d = inflated_.center_of(q) - p;
      const double d2 = d.dot(d);
      if (d2 < best_d) {
        best_d = d2;
        best = q;
      }
    }
  return best;
}

std::optional<Turn> AstarLabeler::label(Vec2 position, Vec2 goal) const {
  const auto s = snap(position), g = snap(goal);
  if (!s || !g) return std::nullopt;
  const auto path = world::astar_search(inflated_, *s, *g);
  if (!path) return std::nullopt;
  const Vec2 line = goal - position;
  const double len = line.norm();
  if (len <= 0.0) return std::nullopt;
  const Vec2 u = (1.0 / len) * line;
  Vec2 prev = position;
  double arc = 0.0;
  for (const auto& cell : path->cells) {
    const Vec2 c = inflated_.center_of(cell);
    arc += (c - prev).norm();
    prev = c;
    if (arc > horizon_) break;
    const double lateral = u.cross(c - position);
    if (std::abs(lateral) > eps_lat_) return lateral > 0.0 ? Turn::Left : Turn::Right;
  }
  return std::nullopt;
}

bool AstarLabeler::reachable(Vec2 from, Vec2 to) const {
  const auto s = snap(from), g = snap(to);
  return s && g && world::astar_search(inflated_, *s, *g).has_value();
}

ExpertSample fusion_sample(const Pose& center, Vec2 goal, const sensing::LidarScan& center_scan,
                           std::span<const Pose> neighbor_poses,
                           std::span<const sensing::LidarScan* const> neighbor_scans,
                           const sensing::SensingConfig& sensing) {
  if (neighbor_poses.size() != neighbor_scans.size()) throw ShapeMismatch("fusion_sample: pose/scan count mismatch");
  const Vec2 to_goal = goal - center.position();
  const double axis = std::atan2(to_goal.y, to_goal.x);
  ExpertSample s;
  s.center = sensing::build_local_map(center_scan, center.heading, axis, sensing).to_bytes();
  for (std::size_t k = 0; k < neighbor_poses.size(); ++k) {
    const Vec2 d = neighbor_poses[k].position() - center.position();
    NeighborObs n;
    const double r = d.norm();
    const double theta = normalize_angle(std::atan2(d.y, d.x) - axis);
    n.r = static_cast<float>(r);
    n.theta = static_cast<float>(theta);
    n.cell_id = static_cast<std::uint8_t>(sensing::grid_cell_id(r, theta, sensing));
    n.map = sensing::build_local_map(*neighbor_scans[k], neighbor_poses[k].heading, axis, sensing).to_bytes();
    s.neighbors.push_back(std::move(n));
  }
  return s;
}

std::vector<ExpertSample> scene_samples(const SceneRecord& scene, const planner::SafeZone& zone,
                                        const GenerationConfig& gen, const sensing::SensingConfig& sensing) {
  const AstarLabeler labeler(scene.grid, gen);
  std::vector<ExpertSample> out;
  for (std::size_t i = 0; i < scene.robots.size(); ++i) {
    std::vector<LabeledRecord> records;
    if (gen.advance == Advance::Planner) {
      records = rollout_key_points(scene.grid, scene.robots[i], zone, labeler, gen, sensing);
    } else {
      std::optional<RobotRecord> rec;
      if (gen.advance == Advance::GoalLine) rec = advance_to_key_point(scene.grid, scene.robots[i], zone, gen, sensing);
      else if (keypoint_filter(scene.robots[i], zone)) rec = scene.robots[i];
      if (rec) records.push_back({*rec, labeler.label(rec->pose.position(), rec->goal)});
    }
    for (const auto& [rec, turn] : records) {
      if (!turn) continue;
      std::vector<Pose> poses;
      std::vector<const sensing::LidarScan*> scans;
      for (std::size_t j = 0; j < scene.robots.size(); ++j) {
        if (j == i) continue;
        if ((scene.robots[j].pose.position() - rec.pose.position()).norm() < sensing.r_com) {
          poses.push_back(scene.robots[j].pose);
          scans.push_back(&scene.robots[j].scan);
        }
      }
      auto sample = fusion_sample(rec.pose, rec.goal, rec.scan, poses, scans, sensing);
      sample.label = *turn == Turn::Right ? 1 : 0;
      sample.meta = {scene.seed, static_cast<std::uint32_t>(i)};
      out.push_back(std::move(sample));
    }
  }
  return out;
}

std::vector<LabeledRecord> rollout_key_points(const world::OccupancyGrid& grid, const RobotRecord& start,
                                              const planner::SafeZone& zone, const AstarLabeler& labeler,
                                              const GenerationConfig& gen, const sensing::SensingConfig& sensing) {
  const auto& cfg = zone.config();
  std::vector<LabeledRecord> out;
  planner::RobotState state;
  state.pose = start.pose;
  state.goal = start.goal;
  for (int step = 0; step < gen.rollout_steps && out.size() < static_cast<std::size_t>(gen.rollout_decisions); ++step) {
    auto scan = sensing::scan(grid, state.pose, sensing);
    const Pose here = state.pose;
    const planner::AdviceFn ask = [&] {
      auto label = labeler.label(here.position(), state.goal);
      out.push_back({{here, state.goal, scan}, label});
      return label.value_or(Turn::Left);
    };
    const auto cmd = planner::step_mode(state, scan, sensing::goal_bearing(state.pose, state.goal), ask, zone).cmd;
    if (state.mode.kind == planner::ModeKind::Done) break;
    Pose& p = state.pose;
    p.x += cmd.v * std::cos(p.heading) * cfg.dt;
    p.y += cmd.v * std::sin(p.heading) * cfg.dt;
    p.heading = normalize_angle(p.heading + cmd.omega * cfg.dt);
  }
  return out;
}

Split stratified_split(std::span<const std::uint8_t> labels, std::uint64_t seed) {
  Split split;
  for (std::uint8_t l : {std::uint8_t{0}, std::uint8_t{1}}) {
    std::vector<std::uint32_t> members;
    for (std::size_t i = 0; i < labels.size(); ++i)
      if (labels[i] == l) members.push_back(static_cast<std::uint32_t>(i));
    Rng rng(mix_seed(seed, 0x73706c6974, l));
    for (std::size_t i = members.size(); i > 1; --i) std::swap(members[i - 1], members[rng.next() % i]);
    for (std::size_t k = 0; k < members.size(); ++k) {
      const std::size_t phase = k % 5;
      auto& dst = phase < 3 ? split.train : (phase == 3 ? split.test : split.val);
      dst.push_back(members[k]);
    }
  }
  for (auto* v : {&split.train, &split.test, &split.val}) std::sort(v->begin(), v->end());
  return split;
}

Dataset build_dataset(std::span<const std::uint64_t> seeds, world::MapKind map_kind, world::TaskKind task_kind,
                      const GenerationConfig& gen, const sensing::SensingConfig& sensing,
                      const planner::PlannerConfig& planner, unsigned workers) {
  if (seeds.empty()) throw EmptyDataset("build_dataset: no seeds");
  sensing.validate();
  planner.validate();
  const planner::SafeZone zone(planner, sensing.n_beams);

  std::vector<std::vector<ExpertSample>> per_seed(seeds.size());
  std::vector<char> failed(seeds.size(), 0);
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next++; i < seeds.size(); i = next++) {
      try {
        per_seed[i] = scene_samples(generate_scene(seeds[i], map_kind, task_kind, gen, sensing), zone, gen, sensing);
      } catch (const PlacementFailed&) {
        failed[i] = 1;
      }
    }
  };
  workers = std::max(1u, workers);
  if (workers == 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(work);
  }

  Dataset ds;
  ds.map_kind = map_kind;
  ds.task_kind = task_kind;
  ds.seeds.assign(seeds.begin(), seeds.end());
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    ds.failed_placements += static_cast<std::size_t>(failed[i]);
    for (auto& s : per_seed[i]) ds.samples.push_back(std::move(s));
  }
  if (ds.samples.empty()) throw EmptyDataset("no key-point samples survived filtering and labeling");
  std::vector<std::uint8_t> labels;
  for (const auto& s : ds.samples) labels.push_back(s.label);
  ds.split = stratified_split(labels, gen.split_seed);
  return ds;
}

Turn ExpertAdvice::advise(const planner::DecisionContext& ctx) const {
  return labeler_.label(ctx.poses[ctx.robot].position(), ctx.goals[ctx.robot]).value_or(Turn::Left);
}

}  // namespace collabnav::expert

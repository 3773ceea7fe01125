#pragma once

#include <collabnav/geometry.hpp>
#include <collabnav/planner.hpp>
#include <collabnav/sample.hpp>
#include <collabnav/sensing.hpp>
#include <collabnav/world.hpp>

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace collabnav::expert {

/// How a placed robot is brought to the key point it is sampled at.
enum class Advance {
  None,      // keep only robots whose start pose is already a key point
  GoalLine,  // slide along the straight goal line
  Planner,   // run the planner with A* advice and sample every turning decision
};

std::string to_string(Advance a);
Advance parse_advance(const std::string& s);

struct GenerationConfig {
  std::size_t n_robots = 15;
  std::size_t scenes = 400;          // per (map, task) combination
  double grid_resolution = 0.05;
  double inflation = 0.2;            // A* obstacle inflation
  double snap_radius = 0.15;         // start/goal cells may move this far off inflated obstacles
  double eps_lat = 0.1;
  double horizon = 2.5;
  double advance_step = 0.05;
  Advance advance = Advance::Planner;
  int rollout_steps = 3000;          // planner steps per robot
  int rollout_decisions = 3;         // decisions sampled per robot
  std::uint64_t split_seed = 7;
  world::GenerationParams map;
  world::PlacementParams placement;
};

struct RobotRecord {
  Pose pose;
  Vec2 goal;
  sensing::LidarScan scan;  // obstacles only, no teammate bodies
};

struct SceneRecord {
  std::uint64_t seed = 0;
  world::WorldMap world;
  world::OccupancyGrid grid;
  world::TaskSpec task;
  std::vector<RobotRecord> robots;
};

/// World, placement and goal-facing scans for one seed. Throws PlacementFailed.
SceneRecord generate_scene(std::uint64_t seed, world::MapKind map_kind, world::TaskKind task_kind,
                           const GenerationConfig& gen, const sensing::SensingConfig& sensing);

/// True when the goal-facing robot's frontal safe cone is blocked.
bool keypoint_filter(const RobotRecord& record, const planner::SafeZone& zone);

/// Moves the robot straight toward its goal in `advance_step` increments until
/// the key-point condition holds. nullopt when it reaches the goal area or
/// loses clearance first.
std::optional<RobotRecord> advance_to_key_point(const world::OccupancyGrid& grid, const RobotRecord& start,
                                                const planner::SafeZone& zone, const GenerationConfig& gen,
                                                const sensing::SensingConfig& sensing);

/// A* shortest-path labeler over an inflated copy of the true grid.
class AstarLabeler {
 public:
  AstarLabeler(const world::OccupancyGrid& grid, const GenerationConfig& gen);

  /// Side of the first point on the A* path (within `horizon` of arc length)
  /// whose lateral offset from the position-goal line exceeds `eps_lat`.
  /// nullopt means Discard: no path, or no such deviation.
  std::optional<planner::Turn> label(Vec2 position, Vec2 goal) const;

  /// A* finds a path between the (snapped) cells of the two points.
  bool reachable(Vec2 from, Vec2 to) const;

  const world::OccupancyGrid& inflated() const { return inflated_; }

 private:
  std::optional<world::Cell> snap(Vec2 p) const;

  world::OccupancyGrid inflated_;
  double snap_radius_;
  double eps_lat_;
  double horizon_;
};

struct LabeledRecord {
  RobotRecord record;
  std::optional<planner::Turn> label;
};

/// Runs the single-robot planner from the goal-facing start with A* advice and
/// records the pose, scan and label at each of the first `rollout_decisions`
/// turning decisions. Stops at the goal or after `rollout_steps`.
std::vector<LabeledRecord> rollout_key_points(const world::OccupancyGrid& grid, const RobotRecord& start,
                                              const planner::SafeZone& zone, const AstarLabeler& labeler,
                                              const GenerationConfig& gen, const sensing::SensingConfig& sensing);


/// GIWT input for robot `center`: its goal-aligned map plus every listed
/// neighbor's map in the same frame, with (r, theta, cell id) of each neighbor.
ExpertSample fusion_sample(const Pose& center, Vec2 goal, const sensing::LidarScan& center_scan,
                           std::span<const Pose> neighbor_poses,
                           std::span<const sensing::LidarScan* const> neighbor_scans,
                           const sensing::SensingConfig& sensing);

/// Labeled key-point samples of one scene, robots in index order.
std::vector<ExpertSample> scene_samples(const SceneRecord& scene, const planner::SafeZone& zone,
                                        const GenerationConfig& gen, const sensing::SensingConfig& sensing);

struct Split {
  std::vector<std::uint32_t> train, test, val;
};

/// Stratified 3:1:1 split: the samples of each label are shuffled with `seed`
/// and dealt train, train, train, test, val.
Split stratified_split(std::span<const std::uint8_t> labels, std::uint64_t seed);

struct Dataset {
  world::MapKind map_kind = world::MapKind::A;
  world::TaskKind task_kind = world::TaskKind::I;
  std::vector<std::uint64_t> seeds;
  std::size_t failed_placements = 0;
  std::vector<ExpertSample> samples;
  Split split;
};

/// Scenes for every seed (in order, `workers` threads), concatenated and split.
/// Throws EmptyDataset when nothing survives filtering.
Dataset build_dataset(std::span<const std::uint64_t> seeds, world::MapKind map_kind, world::TaskKind task_kind,
                      const GenerationConfig& gen, const sensing::SensingConfig& sensing,
                      const planner::PlannerConfig& planner, unsigned workers = 1);

/// Provider that answers with the A* label on the true grid (Left on Discard).
class ExpertAdvice final : public planner::AdviceProvider {
 public:
  explicit ExpertAdvice(const AstarLabeler& labeler) : labeler_(labeler) {}
  planner::Turn advise(const planner::DecisionContext& ctx) const override;
  std::string name() const override { return "astar-expert"; }

 private:
  const AstarLabeler& labeler_;
};

}  // namespace collabnav::expert

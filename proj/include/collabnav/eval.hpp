#pragma once

#include <collabnav/expert.hpp>
#include <collabnav/giwt.hpp>
#include <collabnav/planner.hpp>
#include <collabnav/sensing.hpp>
#include <collabnav/world.hpp>

#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace collabnav::eval {

struct EvalConfig {
  std::size_t episodes = 100;
  double budget = 300.0;           // simulated seconds
  std::size_t n_robots = 15;       // per episode; Task I moves only the first reachable robot
  unsigned workers = 1;
  int attempts = 1000;             // placement/reachability retries per episode
  double ft_bin_width = 0.05;
  int ft_bins = 20;                // the last bin collects everything beyond
};

struct EpisodeSpec {
  std::size_t id = 0;
  std::uint64_t seed = 0;
  world::WorldMap world;
  world::OccupancyGrid grid;
  world::TaskSpec task;
  std::vector<bool> moving;
};

/// `cfg.episodes` episodes whose moving robots all have A*-reachable goals;
/// map kinds cycle through `kinds`.
std::vector<EpisodeSpec> make_episodes(std::uint64_t seed, std::span<const world::MapKind> kinds,
                                       world::TaskKind task, const EvalConfig& cfg,
                                       const expert::GenerationConfig& gen);

struct EpisodeContext {
  const EpisodeSpec& spec;
  const expert::AstarLabeler& labeler;  // on the episode's true grid
};

/// Builds the advice provider used for one episode.
using PolicyFactory = std::function<std::unique_ptr<planner::AdviceProvider>(const EpisodeContext&)>;

PolicyFactory fixed_policy(planner::Turn turn);
PolicyFactory random_policy(std::uint64_t seed);
PolicyFactory expert_policy();

/// Builds the fusion sample from the live scans and asks the model. The model
/// is shared, so calls are serialized.
class NetworkAdvice final : public planner::AdviceProvider {
 public:
  NetworkAdvice(giwt::DirectionModel<float>& model, std::mutex& mutex) : model_(model), mutex_(mutex) {}
  planner::Turn advise(const planner::DecisionContext& ctx) const override;
  std::string name() const override { return giwt::to_string(model_.kind()); }

 private:
  giwt::DirectionModel<float>& model_;
  std::mutex& mutex_;
};

PolicyFactory network_policy(giwt::DirectionModel<float>& model, std::mutex& mutex);

struct DecisionEval {
  int step = 0;
  std::size_t robot = 0;
  planner::Turn advice = planner::Turn::Left;
  std::optional<planner::Turn> expert;  // nullopt: A* discards the scene
};

struct RobotResult {
  std::size_t episode = 0;
  std::size_t robot = 0;
  bool reached = false;
  double path_length = 0.0;
  double straight_line = 0.0;
  int steps = 0;
};

struct Histogram {
  std::vector<double> edges;         // bins + 1 lower edges; the last bin is open-ended
  std::vector<std::size_t> counts;

  std::size_t total() const;
};

struct Metrics {
  double acc = 0.0;                  // over decisions with an expert label
  std::size_t decisions = 0;
  std::size_t scored_decisions = 0;
  double apl = 0.0;                  // mean per-robot path length over reached robots
  double sr = 0.0;
  std::size_t robots = 0;
  std::size_t reached = 0;
  std::size_t violations = 0;        // trajectory points closer than r_protect - resolution
  Histogram ft;                      // filled by fill_flowtime()
};

struct PolicyEvaluation {
  std::string policy;
  std::vector<RobotResult> robots;      // moving robots, by (episode, robot)
  std::vector<DecisionEval> decisions;  // by (episode, step, robot)
  std::vector<std::size_t> decision_episode;
  std::vector<planner::EpisodeLog> logs;  // kept only when requested
  Metrics metrics;
};

/// Runs every episode with the policy, scores decisions against the A* label
/// on the true grid at decision time, and reduces to Metrics.
PolicyEvaluation evaluate_policy(const std::string& name, const PolicyFactory& policy,
                                 std::span<const EpisodeSpec> episodes, const planner::PlannerConfig& planner,
                                 const sensing::SensingConfig& sensing, const expert::GenerationConfig& gen,
                                 const EvalConfig& cfg, bool keep_logs = false);

/// (l - l_star) / l_star. Throws Error unless l_star > 0.
double flowtime_increase(double l, double l_star);

/// Per robot, l_star is the shortest path among the policies that reached the
/// goal; every reached robot of every policy contributes one FT value.
void fill_flowtime(std::span<PolicyEvaluation> runs, const EvalConfig& cfg);

}  // namespace collabnav::eval

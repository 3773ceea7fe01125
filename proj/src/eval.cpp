#include <collabnav/error.hpp>
#include <collabnav/eval.hpp>
#include <collabnav/rng.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <map>
#include <thread>

namespace collabnav::eval {

using planner::Turn;

std::vector<EpisodeSpec> make_episodes(std::uint64_t seed, std::span<const world::MapKind> kinds,
                                       world::TaskKind task, const EvalConfig& cfg,
                                       const expert::GenerationConfig& gen) {
  if (kinds.empty()) throw Error("make_episodes: no map kinds");
  std::vector<EpisodeSpec> out;
  for (std::size_t e = 0; e < cfg.episodes; ++e) {
    const world::MapKind kind = kinds[e % kinds.size()];
    bool done = false;
    for (int attempt = 0; attempt < cfg.attempts && !done; ++attempt) {
      EpisodeSpec spec;
      spec.id = e;
      spec.seed = mix_seed(seed, e, static_cast<std::uint64_t>(attempt));
      spec.world = world::generate_map(spec.seed, kind, gen.map);
      try {
        spec.task = world::place_robots(spec.world, cfg.n_robots, task, spec.seed, gen.placement);
      } catch (const PlacementFailed&) {
        continue;
      }
      spec.grid = world::rasterize(spec.world, gen.grid_resolution);
      const expert::AstarLabeler labeler(spec.grid, gen);
      const std::size_t n = spec.task.n_robots();
      spec.moving.assign(n, false);
      if (task == world::TaskKind::I) {
        for (std::size_t i = 0; i < n && !done; ++i) {
          if (labeler.reachable(spec.task.starts[i].position(), spec.task.goals[i])) {
            spec.moving[i] = true;
            done = true;
          }
        }
      } else {
        done = true;
        for (std::size_t i = 0; i < n && done; ++i) {
          done = labeler.reachable(spec.task.starts[i].position(), spec.task.goals[i]);
          spec.moving[i] = true;
        }
      }
      if (done) out.push_back(std::move(spec));
    }
    if (!done) throw PlacementFailed("make_episodes: no reachable task for episode " + std::to_string(e));
  }
  return out;
}

namespace {

template <typename Provider, typename... Args>
PolicyFactory simple(Args... args) {
  return [=](const EpisodeContext&) -> std::unique_ptr<planner::AdviceProvider> {
    return std::make_unique<Provider>(args...);
  };
}

}  // namespace

PolicyFactory fixed_policy(Turn turn) { return simple<planner::FixedTurn>(turn); }
PolicyFactory random_policy(std::uint64_t seed) { return simple<planner::RandomTurn>(seed); }

PolicyFactory expert_policy() {
  return [](const EpisodeContext& ctx) -> std::unique_ptr<planner::AdviceProvider> {
    return std::make_unique<expert::ExpertAdvice>(ctx.labeler);
  };
}

Turn NetworkAdvice::advise(const planner::DecisionContext& ctx) const {
  std::vector<Pose> poses;
  std::vector<const sensing::LidarScan*> scans;
  for (std::size_t j : ctx.neighbors) {
    poses.push_back(ctx.poses[j]);
    scans.push_back(&ctx.scans[j]);
  }
  const auto sample = expert::fusion_sample(ctx.poses[ctx.robot], ctx.goals[ctx.robot], ctx.scans[ctx.robot], poses,
                                            scans, *ctx.sensing);
  std::lock_guard lock(mutex_);
  const auto p = model_.predict(sample);
  return p[1] > p[0] ? Turn::Right : Turn::Left;
}

PolicyFactory network_policy(giwt::DirectionModel<float>& model, std::mutex& mutex) {
  return [&model, &mutex](const EpisodeContext&) -> std::unique_ptr<planner::AdviceProvider> {
    return std::make_unique<NetworkAdvice>(model, mutex);
  };
}

std::size_t Histogram::total() const {
  std::size_t s = 0;
  for (auto c : counts) s += c;
  return s;
}

namespace {

struct EpisodeOutcome {
  std::vector<RobotResult> robots;
  std::vector<DecisionEval> decisions;
  std::size_t violations = 0;
  planner::EpisodeLog log;
};

EpisodeOutcome run_one(const EpisodeSpec& spec, const PolicyFactory& policy, const planner::PlannerConfig& planner,
                       const sensing::SensingConfig& sensing, const expert::GenerationConfig& gen,
                       const EvalConfig& cfg) {
  const expert::AstarLabeler labeler(spec.grid, gen);
  const auto provider = policy(EpisodeContext{spec, labeler});
  planner::EpisodeOptions opts;
  opts.budget = cfg.budget;
  opts.moving = spec.moving;
  opts.seed = spec.seed;
  EpisodeOutcome out;
  out.log = planner::run_episode(spec.grid, spec.task, *provider, planner, sensing, opts);

  for (std::size_t i = 0; i < spec.task.n_robots(); ++i) {
    if (!spec.moving[i]) continue;
    const auto& o = out.log.outcomes[i];
    out.robots.push_back({spec.id, i, o.reached, o.path_length,
                          (spec.task.goals[i] - spec.task.starts[i].position()).norm(), o.steps});
    for (const auto& p : out.log.trajectories[i]) {
      if (spec.world.clearance(p.pose.position()) < planner.r_protect - spec.grid.resolution()) ++out.violations;
    }
  }
  for (const auto& d : out.log.decisions) {
    out.decisions.push_back({d.step, d.robot, d.chosen, labeler.label(d.pose.position(), d.goal)});
  }
  return out;
}

}  // namespace

PolicyEvaluation evaluate_policy(const std::string& name, const PolicyFactory& policy,
                                 std::span<const EpisodeSpec> episodes, const planner::PlannerConfig& planner,
                                 const sensing::SensingConfig& sensing, const expert::GenerationConfig& gen,
                                 const EvalConfig& cfg, bool keep_logs) {
  if (episodes.empty()) throw Error("evaluate_policy: no episodes");
  std::vector<EpisodeOutcome> outcomes(episodes.size());
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next++; i < episodes.size(); i = next++) {
      outcomes[i] = run_one(episodes[i], policy, planner, sensing, gen, cfg);
      if (!keep_logs) outcomes[i].log = {};
    }
  };
  if (cfg.workers <= 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < cfg.workers; ++w) pool.emplace_back(work);
  }

  PolicyEvaluation ev;
  ev.policy = name;
  Metrics& m = ev.metrics;
  std::size_t correct = 0;
  double length = 0.0;
  for (std::size_t e = 0; e < outcomes.size(); ++e) {
    auto& o = outcomes[e];
    m.violations += o.violations;
    for (const auto& r : o.robots) {
      ++m.robots;
      if (r.reached) {
        ++m.reached;
        length += r.path_length;
      }
      ev.robots.push_back(r);
    }
    for (const auto& d : o.decisions) {
      ++m.decisions;
      if (d.expert) {
        ++m.scored_decisions;
        correct += *d.expert == d.advice;
      }
      ev.decisions.push_back(d);
      ev.decision_episode.push_back(episodes[e].id);
    }
    if (keep_logs) ev.logs.push_back(std::move(o.log));
  }
  m.acc = m.scored_decisions ? static_cast<double>(correct) / static_cast<double>(m.scored_decisions) : 0.0;
  m.sr = m.robots ? static_cast<double>(m.reached) / static_cast<double>(m.robots) : 0.0;
  m.apl = m.reached ? length / static_cast<double>(m.reached) : 0.0;
  return ev;
}

double flowtime_increase(double l, double l_star) {
  if (!(l_star > 0.0)) throw Error("flowtime_increase: l_star must be positive");
  return (l - l_star) / l_star;
}

void fill_flowtime(std::span<PolicyEvaluation> runs, const EvalConfig& cfg) {
  std::map<std::pair<std::size_t, std::size_t>, double> best;
  for (const auto& run : runs)
    for (const auto& r : run.robots) {
      if (!r.reached) continue;
      auto [it, fresh] = best.try_emplace({r.episode, r.robot}, r.path_length);
      if (!fresh) it->second = std::min(it->second, r.path_length);
    }
  for (auto& run : runs) {
    Histogram& h = run.metrics.ft;
    h.edges.clear();
    for (int b = 0; b <= cfg.ft_bins; ++b) h.edges.push_back(cfg.ft_bin_width * b);
    h.counts.assign(static_cast<std::size_t>(cfg.ft_bins), 0);
    for (const auto& r : run.robots) {
      if (!r.reached) continue;
      const double l_star = best.at({r.episode, r.robot});
      if (!(l_star > 0.0)) continue;
      const double ft = flowtime_increase(r.path_length, l_star);
      const auto bin = std::min(static_cast<std::size_t>(std::max(0.0, std::floor(ft / cfg.ft_bin_width))),
                                h.counts.size() - 1);
      ++h.counts[bin];
    }
  }
}

}  // namespace collabnav::eval

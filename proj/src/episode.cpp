#include <collabnav/error.hpp>
#include <collabnav/planner.hpp>

#include <algorithm>
#include <cmath>

namespace collabnav::planner {

EpisodeLog run_episode(const world::OccupancyGrid& grid, const world::TaskSpec& task, const AdviceProvider& advice,
                       const PlannerConfig& cfg, const sensing::SensingConfig& sensing,
                       const EpisodeOptions& options) {
  cfg.validate();
  sensing.validate();
  const std::size_t n = task.n_robots();
  std::vector<bool> moving = options.moving.empty() ? std::vector<bool>(n, true) : options.moving;
  if (moving.size() != n) throw ShapeMismatch("run_episode: moving mask does not match robot count");

  const SafeZone zone(cfg, sensing.n_beams);
  std::vector<RobotState> states(n);
  EpisodeLog log;
  log.trajectories.resize(n);
  log.outcomes.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    states[i].pose = task.starts[i];
    states[i].goal = task.goals[i];
    states[i].priority = static_cast<int>(n - i);
    log.outcomes[i].moving = moving[i];
    log.trajectories[i].push_back({0, 0.0, states[i].pose, states[i].mode, {}, false});
  }

  const int max_steps = static_cast<int>(std::lround(options.budget / cfg.dt));
  std::vector<Pose> poses(n);
  std::vector<sensing::LidarScan> scans(n);
  std::vector<bool> scanned(n);
  std::vector<VelocityCmd> cmds(n);
  std::vector<sensing::Disc> bodies;
  std::unique_ptr<bool[]> active(new bool[n]);

  for (int step = 0; step < max_steps; ++step) {
    bool any = false;
    for (std::size_t i = 0; i < n; ++i) {
      active[i] = moving[i] && states[i].mode.kind != ModeKind::Done;
      any = any || active[i];
      poses[i] = states[i].pose;
    }
    if (!any) break;

    auto scan_of = [&](std::size_t i) -> const sensing::LidarScan& {
      if (!scanned[i]) {
        bodies.clear();
        if (options.teammates_occlude) {
          for (std::size_t j = 0; j < n; ++j)
            if (j != i) bodies.push_back({poses[j].position(), cfg.r_protect});
        }
        scans[i] = sensing::scan(grid, poses[i], sensing, bodies);
        scanned[i] = true;
      }
      return scans[i];
    };
    std::fill(scanned.begin(), scanned.end(), false);

    for (std::size_t i = 0; i < n; ++i) {
      cmds[i] = {};
      if (!active[i]) continue;
      const auto& own = scan_of(i);
      const double bearing = sensing::goal_bearing(poses[i], states[i].goal);
      std::vector<std::size_t> neighbors;
      AdviceFn ask = [&]() {
        for (std::size_t j = 0; j < n; ++j) {
          if (j != i && (poses[j].position() - poses[i].position()).norm() < sensing.r_com) {
            neighbors.push_back(j);
            scan_of(j);
          }
        }
        DecisionContext ctx{step, i, options.seed, poses, task.goals, scans, neighbors, &sensing};
        return advice.advise(ctx);
      };
      const auto out = step_mode(states[i], own, bearing, ask, zone);
      cmds[i] = out.cmd;
      if (out.decision) {
        log.decisions.push_back({step, i, neighbors, *out.decision, *out.decision, poses[i], states[i].goal});
      }
    }

    const auto waiting = priority_avoidance(states, cmds, std::span<const bool>(active.get(), n), cfg);
    for (std::size_t i = 0; i < n; ++i) {
      if (!active[i]) continue;
      states[i].waiting = waiting[i];
      if (waiting[i]) {
        cmds[i] = {};
        states[i].speed = 0.0;
      }
      Pose& p = states[i].pose;
      const VelocityCmd c = cmds[i];
      p.x += c.v * std::cos(p.heading) * cfg.dt;
      p.y += c.v * std::sin(p.heading) * cfg.dt;
      p.heading = normalize_angle(p.heading + c.omega * cfg.dt);
      auto& outcome = log.outcomes[i];
      outcome.path_length += c.v * cfg.dt;
      outcome.steps = step + 1;
      log.trajectories[i].push_back(
          {step + 1, (step + 1) * cfg.dt, p, states[i].mode, c, static_cast<bool>(waiting[i])});
    }
  }

  for (std::size_t i = 0; i < n; ++i) log.outcomes[i].reached = states[i].mode.kind == ModeKind::Done;
  return log;
}

}  // namespace collabnav::planner

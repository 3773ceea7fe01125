#include <collabnav/error.hpp>
#include <collabnav/planner.hpp>
#include <collabnav/rng.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace collabnav::planner {

namespace {
// Beams at exactly +-pi/2 from the heading never constrain (cos = 0).
constexpr double kPerpendicularTol = 1e-9;
}  // namespace

void PlannerConfig::validate() const {
  if (!(v_max > 0 && a_max > 0 && dt > 0 && r_protect > 0 && theta_0 > 0 && theta_1 > 0 && k > 0 && r_goal > 0)) {
    throw Error("planner: all parameters must be positive");
  }
  if (!(theta_1 < kPi / 2)) throw Error("planner: theta_1 must be below pi/2");
}

SafetyEnvelope SafetyEnvelope::from(const PlannerConfig& cfg) {
  const double step = cfg.v_max * cfg.dt;
  return {cfg.r_protect + step, 2.0 * std::atan(cfg.r_protect / step)};
}

double safe_boundary(double theta, const SafetyEnvelope& env) {
  const double a = std::abs(theta);
  const double half = 0.5 * env.theta_sec;
  if (a < half) return env.r_safe;
  return env.r_safe * std::sin(half) / std::sin(a);
}

double safe_velocity(const sensing::LidarScan& scan, double theta, const SafetyEnvelope& env,
                     const PlannerConfig& cfg) {
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < scan.size(); ++k) {
    const double phi = normalize_angle(scan.angles[k] - theta);
    if (std::abs(phi) >= kPi / 2 - kPerpendicularTol) continue;
    const double headroom = scan.ranges[k] - safe_boundary(phi, env);
    if (headroom <= 0.0) return 0.0;
    best = std::min(best, std::sqrt(2.0 * cfg.a_max * headroom) / std::cos(phi));
  }
  return std::min(best, cfg.v_max);
}

bool key_point(const sensing::LidarScan& scan, const SafetyEnvelope& env, const PlannerConfig& cfg) {
  const double cone = kPi / 2 - cfg.theta_1;
  for (double a : scan.angles) {
    if (std::abs(a) < cone && safe_velocity(scan, a, env, cfg) > 0.0) return false;
  }
  return true;
}

SafeZone::SafeZone(const PlannerConfig& cfg, int n_beams)
    : cfg_(cfg), env_(SafetyEnvelope::from(cfg)), n_beams_(n_beams), angles_(sensing::beam_angles(n_beams)) {
  const double cone = kPi / 2 - cfg.theta_1;
  for (std::size_t k = 0; k < angles_.size(); ++k)
    if (std::abs(angles_[k]) < cone) frontal_.push_back(k);

  const double step = 2.0 * kPi / n_beams;
  for (int d = -n_beams / 2; d <= n_beams / 2; ++d) {
    const double phi = d * step;
    if (std::abs(phi) >= kPi / 2 - kPerpendicularTol) continue;
    offsets_.push_back(d);
    limits_.push_back(safe_boundary(phi, env_));
    cosines_.push_back(std::cos(phi));
  }
}

double SafeZone::velocity(const sensing::LidarScan& scan, std::size_t heading_beam) const {
  const int n = n_beams_;
  double best = cfg_.v_max;
  const double two_a = 2.0 * cfg_.a_max;
  for (std::size_t i = 0; i < offsets_.size(); ++i) {
    int k = static_cast<int>(heading_beam) + offsets_[i];
    if (k < 0) k += n;
    else if (k >= n) k -= n;
    const double headroom = scan.ranges[static_cast<std::size_t>(k)] - limits_[i];
    if (headroom <= 0.0) return 0.0;
    const double bound = best * cosines_[i];
    if (two_a * headroom < bound * bound) best = std::sqrt(two_a * headroom) / cosines_[i];
  }
  return best;
}

std::optional<std::size_t> SafeZone::best_heading(const sensing::LidarScan& scan, double target) const {
  std::vector<std::pair<double, std::size_t>> order;
  order.reserve(frontal_.size());
  for (std::size_t k : frontal_) order.emplace_back(std::abs(normalize_angle(angles_[k] - target)), k);
  std::sort(order.begin(), order.end());
  for (const auto& [gap, k] : order) {
    if (velocity(scan, k) > 0.0) return k;
  }
  return std::nullopt;
}

bool SafeZone::key_point(const sensing::LidarScan& scan) const {
  return std::none_of(frontal_.begin(), frontal_.end(), [&](std::size_t k) { return velocity(scan, k) > 0.0; });
}

std::string to_string(Turn t) { return t == Turn::Left ? "left" : "right"; }

std::string to_string(ModeKind kind) {
  switch (kind) {
    case ModeKind::Standby: return "standby";
    case ModeKind::A: return "A";
    case ModeKind::B: return "B";
    case ModeKind::C: return "C";
    case ModeKind::D: return "D";
    case ModeKind::E: return "E";
    case ModeKind::F: return "F";
    case ModeKind::Done: return "done";
  }
  return "?";
}

bool legal_transition(ModeKind from, ModeKind to) {
  using M = ModeKind;
  if (from == to || to == M::Done) return true;
  switch (from) {
    case M::Standby: return to == M::A;
    case M::A: return to == M::B;
    case M::B: return to == M::C || to == M::D;
    case M::C: return to == M::E;
    case M::D: return to == M::F;
    case M::E:
    case M::F: return to == M::A;
    case M::Done: return false;
  }
  return false;
}

namespace {

class Controller {
 public:
  Controller(const SafeZone& zone, const sensing::LidarScan& scan)
      : zone_(zone), cfg_(zone.config()), scan_(scan),
        ahead_(sensing::beam_index(zone.n_beams(), 0.0)) {}

  VelocityCmd rotate_toward(double bearing) const { return {0.0, cfg_.k * bearing}; }

  VelocityCmd spin(double direction) const { return {0.0, direction * cfg_.omega_turn}; }

  // Drives along the safe frontal heading closest to `target`; stands still if none.
  VelocityCmd drive_toward(double target) const {
    const auto h = zone_.best_heading(scan_, target);
    if (!h) return {};
    return steer(*h);
  }

  // Moves along the current heading at the speed allowed for both it and beam `h`
  // while turning toward `h`. Standing still, the turn rate is at least omega_min.
  VelocityCmd steer(std::size_t h) const {
    const double v = std::min(zone_.velocity(scan_, h), zone_.velocity(scan_, ahead_));
    double omega = cfg_.k * scan_.angles[h];
    if (v <= 0.0 && h != ahead_ && std::abs(omega) < cfg_.omega_min) omega = std::copysign(cfg_.omega_min, omega);
    return {v, omega};
  }

  // Keeps the obstacle on the side opposite to `side` at r_safe + follow_gap by
  // steering along the tangent at the nearest return on the obstacle side.
  VelocityCmd follow(Side side) const {
    const double wall = side == Side::Left ? -1.0 : 1.0;  // robot-frame side of the obstacle
    double nearest = std::numeric_limits<double>::infinity();
    double bearing = wall * kPi / 2;
    for (std::size_t k = 0; k < scan_.size(); ++k) {
      const double a = wall * scan_.angles[k];
      if (a >= -kPi / 4 && scan_.ranges[k] < nearest) {
        nearest = scan_.ranges[k];
        bearing = scan_.angles[k];
      }
    }
    double target = wall * kPi / 3;
    const double horizon = *std::max_element(scan_.ranges.begin(), scan_.ranges.end());
    if (nearest < horizon) {
      const double reference = zone_.envelope().r_safe + cfg_.follow_gap;
      const double pull = std::clamp(cfg_.k_wall * (nearest - reference), -kPi / 3, kPi / 3);
      target = normalize_angle(bearing - wall * kPi / 2 + wall * pull);
    }
    const auto h = zone_.best_heading(scan_, target);
    if (!h) return spin(-wall);
    return steer(*h);
  }

 private:
  const SafeZone& zone_;
  const PlannerConfig& cfg_;
  const sensing::LidarScan& scan_;
  std::size_t ahead_;
};

}  // namespace

StepOutput step_mode(RobotState& state, const sensing::LidarScan& scan, double goal_bearing,
                     const AdviceFn& advise, const SafeZone& zone) {
  const PlannerConfig& cfg = zone.config();
  const Controller ctl(zone, scan);
  StepOutput out;
  const double distance = (state.goal - state.pose.position()).norm();

  if (state.mode.kind != ModeKind::Done && distance < cfg.r_goal) state.mode = {ModeKind::Done, Side::None};

  switch (state.mode.kind) {
    case ModeKind::Done:
      break;
    case ModeKind::Standby:
      state.mode = {ModeKind::A, Side::None};
      out.cmd = ctl.rotate_toward(goal_bearing);
      break;
    case ModeKind::A:
      if (std::abs(goal_bearing) < cfg.theta_0) {
        state.mode = {ModeKind::B, Side::None};
        out.cmd = ctl.drive_toward(goal_bearing);
      } else {
        out.cmd = ctl.rotate_toward(goal_bearing);
      }
      break;
    case ModeKind::B:
      if (zone.key_point(scan)) {
        const Turn turn = advise();
        out.decision = turn;
        state.hit_distance = distance;
        state.mode = turn == Turn::Left ? Mode{ModeKind::C, Side::Left} : Mode{ModeKind::D, Side::Right};
        out.cmd = ctl.spin(turn == Turn::Left ? 1.0 : -1.0);
      } else {
        out.cmd = ctl.drive_toward(goal_bearing);
      }
      break;
    case ModeKind::C:
    case ModeKind::D: {
      const bool left = state.mode.kind == ModeKind::C;
      if (!zone.key_point(scan)) {
        state.mode = left ? Mode{ModeKind::E, Side::Left} : Mode{ModeKind::F, Side::Right};
        out.cmd = ctl.follow(state.mode.side);
      } else {
        out.cmd = ctl.spin(left ? 1.0 : -1.0);
      }
      break;
    }
    case ModeKind::E:
    case ModeKind::F: {
      // Circumventing on the left keeps the obstacle on the robot's right.
      const bool opposite = state.mode.side == Side::Left ? goal_bearing > cfg.side_deadband
                                                          : goal_bearing < -cfg.side_deadband;
      if (opposite && distance < state.hit_distance - cfg.progress_margin) {
        state.mode = {ModeKind::A, Side::None};
        out.cmd = ctl.rotate_toward(goal_bearing);
      } else {
        out.cmd = ctl.follow(state.mode.side);
      }
      break;
    }
  }

  out.cmd.v = std::min(out.cmd.v, state.speed + cfg.a_max * cfg.dt);
  state.speed = out.cmd.v;
  return out;
}

double conflict_distance(const PlannerConfig& cfg) { return 2.0 * (cfg.r_protect + cfg.v_max * cfg.dt); }

std::vector<bool> priority_avoidance(std::span<const RobotState> states, std::span<const VelocityCmd> cmds,
                                     std::span<const bool> active, const PlannerConfig& cfg) {
  const std::size_t n = states.size();
  const double conflict = conflict_distance(cfg);
  std::vector<bool> waiting(n, false);
  for (std::size_t i = 0; i < n; ++i) {
    if (!active[i]) continue;
    const Vec2 pi = states[i].pose.position();
    const Vec2 ui = cmds[i].v * Vec2{std::cos(states[i].pose.heading), std::sin(states[i].pose.heading)};
    for (std::size_t j = 0; j < n && !waiting[i]; ++j) {
      if (j == i || !active[j] || states[j].priority <= states[i].priority) continue;
      const Vec2 d = pi - states[j].pose.position();
      const double r = d.norm();
      const Vec2 uj = cmds[j].v * Vec2{std::cos(states[j].pose.heading), std::sin(states[j].pose.heading)};
      const bool closing = d.dot(ui - uj) < 0.0;
      if ((r <= conflict && closing) || (states[i].waiting && r <= conflict + cfg.conflict_hysteresis)) {
        waiting[i] = true;
      }
    }
  }
  return waiting;
}

Turn RandomTurn::advise(const DecisionContext& ctx) const {
  const auto bits = mix_seed(seed_, ctx.episode_seed, static_cast<std::uint64_t>(ctx.step) * 1024 + ctx.robot);
  return (bits & 1) ? Turn::Right : Turn::Left;
}

}  // namespace collabnav::planner

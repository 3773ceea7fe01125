#pragma once

#include <collabnav/geometry.hpp>
#include <collabnav/sensing.hpp>
#include <collabnav/world.hpp>

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace collabnav::planner {

struct PlannerConfig {
  double v_max = 0.5;
  double a_max = 1.0;
  double dt = 0.1;
  double r_protect = 0.2;
  double theta_0 = 0.1;
  double theta_1 = 0.15;
  double k = 1.0;
  double r_goal = 0.3;

  double omega_turn = 1.0;            // in-place rotation rate in modes C/D
  double omega_min = 0.3;             // turn-rate floor when blocked along the current heading
  double follow_gap = 0.1;            // wall-follow target distance = r_safe + follow_gap
  double k_wall = 2.0;                // rad of heading per metre of side-distance error
  double side_deadband = 0.05;        // rad, for the opposite-sides test
  double progress_margin = 0.05;      // m closer than the key point before leaving E/F
  double conflict_hysteresis = 0.1;   // m

  void validate() const;
};

/// Sector radius and central angle of the frontal safe zone.
struct SafetyEnvelope {
  double r_safe = 0.0;
  double theta_sec = 0.0;

  static SafetyEnvelope from(const PlannerConfig& cfg);
};

/// Minimum obstacle-free distance l(theta) in direction `theta` relative to the
/// direction of travel.
double safe_boundary(double theta, const SafetyEnvelope& env);

/// Largest admissible speed when heading along robot-frame angle `theta`. Only
/// beams within +-pi/2 of `theta` constrain it; 0 if any of them has d <= l.
double safe_velocity(const sensing::LidarScan& scan, double theta, const SafetyEnvelope& env,
                     const PlannerConfig& cfg);

/// True iff no beam heading with |theta| < pi/2 - theta_1 has positive safe velocity.
bool key_point(const sensing::LidarScan& scan, const SafetyEnvelope& env, const PlannerConfig& cfg);

/// Table-driven safe-zone evaluation restricted to beam headings. Agrees with
/// safe_velocity() at those headings and is what the planner uses per step.
class SafeZone {
 public:
  SafeZone(const PlannerConfig& cfg, int n_beams);

  const PlannerConfig& config() const { return cfg_; }
  const SafetyEnvelope& envelope() const { return env_; }
  int n_beams() const { return n_beams_; }

  double velocity(const sensing::LidarScan& scan, std::size_t heading_beam) const;

  /// Frontal heading (|theta| < pi/2 - theta_1) with positive velocity closest to
  /// `target`; nullopt at a key point.
  std::optional<std::size_t> best_heading(const sensing::LidarScan& scan, double target) const;

  bool key_point(const sensing::LidarScan& scan) const;

 private:
  PlannerConfig cfg_;
  SafetyEnvelope env_;
  int n_beams_;
  std::vector<double> angles_;
  std::vector<std::size_t> frontal_;
  // Beam offsets within +-pi/2 of a heading, with l(phi) and cos(phi) per offset.
  std::vector<int> offsets_;
  std::vector<double> limits_;
  std::vector<double> cosines_;
};

enum class Turn : std::uint8_t { Left = 0, Right = 1 };

std::string to_string(Turn t);

enum class ModeKind : std::uint8_t { Standby, A, B, C, D, E, F, Done };
enum class Side : std::uint8_t { None, Left, Right };

struct Mode {
  ModeKind kind = ModeKind::Standby;
  Side side = Side::None;  // circumvention side: C/E left, D/F right

  friend bool operator==(const Mode&, const Mode&) = default;
};

std::string to_string(ModeKind kind);

/// True when `from -> to` is an edge of the mode transition system (self-loops included).
bool legal_transition(ModeKind from, ModeKind to);

struct VelocityCmd {
  double v = 0.0;
  double omega = 0.0;
};

struct RobotState {
  Pose pose;
  Mode mode;
  Vec2 goal;
  int priority = 0;
  bool waiting = false;
  double speed = 0.0;          // last commanded linear speed
  double hit_distance = 0.0;   // goal distance at the key point that started the current circumvention
};

struct StepOutput {
  VelocityCmd cmd;
  std::optional<Turn> decision;  // set when a key point was resolved this step
};

using AdviceFn = std::function<Turn()>;

/// Advances the mode machine by one control step (at most one transition, plus
/// the Done check) and returns the command. Mutates state.mode, state.speed and
/// state.hit_distance. `advise` is only invoked at a key point.
StepOutput step_mode(RobotState& state, const sensing::LidarScan& scan, double goal_bearing,
                     const AdviceFn& advise, const SafeZone& zone);

/// Conflict distance used by the priority rule: 2*(r_protect + v_max*dt), i.e.
/// both robots may close one full step.
double conflict_distance(const PlannerConfig& cfg);

/// Lower-priority robots wait while a higher-priority active robot is within the
/// conflict distance and closing; they resume beyond conflict distance plus
/// hysteresis. `active[i]` false means robot i is finished or static.
std::vector<bool> priority_avoidance(std::span<const RobotState> states, std::span<const VelocityCmd> cmds,
                                     std::span<const bool> active, const PlannerConfig& cfg);

// ---------------------------------------------------------------------------
// Episodes

struct DecisionContext {
  int step = 0;
  std::size_t robot = 0;
  std::uint64_t episode_seed = 0;
  std::span<const Pose> poses;
  std::span<const Vec2> goals;
  std::span<const sensing::LidarScan> scans;  // current scans of every robot
  std::span<const std::size_t> neighbors;     // ids within r_com, ascending
  const sensing::SensingConfig* sensing = nullptr;
};

/// Left/right oracle consulted at key points. Implementations must be safe to
/// call concurrently from independent episodes.
class AdviceProvider {
 public:
  virtual ~AdviceProvider() = default;
  virtual Turn advise(const DecisionContext& ctx) const = 0;
  virtual std::string name() const = 0;
};

class FixedTurn final : public AdviceProvider {
 public:
  explicit FixedTurn(Turn turn) : turn_(turn) {}
  Turn advise(const DecisionContext&) const override { return turn_; }
  std::string name() const override { return turn_ == Turn::Left ? "fixed-left" : "fixed-right"; }

 private:
  Turn turn_;
};

/// Coin flip seeded by (seed, episode seed, step, robot).
class RandomTurn final : public AdviceProvider {
 public:
  explicit RandomTurn(std::uint64_t seed) : seed_(seed) {}
  Turn advise(const DecisionContext& ctx) const override;
  std::string name() const override { return "random"; }

 private:
  std::uint64_t seed_;
};

struct EpisodeOptions {
  double budget = 300.0;           // simulated seconds
  std::vector<bool> moving;        // empty: every robot moves; otherwise static robots stay put
  std::uint64_t seed = 0;
  bool teammates_occlude = true;   // render other robots as discs in scans
};

struct TrajectoryPoint {
  int step = 0;
  double t = 0.0;
  Pose pose;
  Mode mode;
  VelocityCmd cmd;
  bool waiting = false;
};

struct DecisionRecord {
  int step = 0;
  std::size_t robot = 0;
  std::vector<std::size_t> neighbors;
  Turn advice = Turn::Left;
  Turn chosen = Turn::Left;
  Pose pose;
  Vec2 goal;
};

struct RobotOutcome {
  bool moving = true;
  bool reached = false;
  double path_length = 0.0;
  int steps = 0;
};

struct EpisodeLog {
  std::vector<std::vector<TrajectoryPoint>> trajectories;  // per robot, initial point first
  std::vector<DecisionRecord> decisions;
  std::vector<RobotOutcome> outcomes;
};

/// Integrates unicycle kinematics for every moving robot until all of them are
/// Done or the budget runs out.
EpisodeLog run_episode(const world::OccupancyGrid& grid, const world::TaskSpec& task, const AdviceProvider& advice,
                       const PlannerConfig& cfg, const sensing::SensingConfig& sensing,
                       const EpisodeOptions& options = {});

}  // namespace collabnav::planner

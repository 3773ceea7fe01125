#pragma once

#include <collabnav/geometry.hpp>
#include <collabnav/world.hpp>

#include <cstdint>
#include <span>
#include <vector>

namespace collabnav::sensing {

struct SensingConfig {
  double r_fov = 2.5;
  double r_com = 2.5;
  int n_beams = 360;
  int local_map_cells = 101;
  double local_resolution = 0.05;

  /// Throws collabnav::Error when an invariant is violated.
  void validate() const;
};

/// Beam k points at robot-frame angle -pi + (k+1)*2pi/n, so the last beam is at
/// +pi and beam n/2 - 1 looks straight ahead (for even n).
struct LidarScan {
  std::vector<double> angles;
  std::vector<double> ranges;

  std::size_t size() const { return ranges.size(); }
};

std::vector<double> beam_angles(int n_beams);

/// Index of the beam closest to robot-frame angle `angle`.
std::size_t beam_index(int n_beams, double angle);

/// A disc that occludes beams (a teammate body).
struct Disc {
  Vec2 center;
  double radius = 0.2;
};

/// Lidar sweep against the grid plus analytic ray/disc hits for `bodies`.
LidarScan scan(const world::OccupancyGrid& grid, const Pose& pose, const SensingConfig& cfg,
               std::span<const Disc> bodies = {});

/// Bearing of `goal` in the robot frame, counterclockwise positive.
double goal_bearing(const Pose& pose, Vec2 goal);

enum class CellState : std::uint8_t { Unknown = 0, Free = 1, Occupied = 2 };

/// Square raster in a frame whose +x axis points along world direction
/// `axis_direction`; row 0 is the +y edge (the frame's left), column 0 the -x edge.
struct LocalMap {
  int size = 0;
  double resolution = 0.05;
  std::vector<CellState> cells;

  CellState at(int row, int col) const { return cells[static_cast<std::size_t>(row) * size + col]; }
  bool operator==(const LocalMap&) const = default;

  /// Wire/training encoding: 1 for occupied, 0 otherwise, row-major.
  std::vector<std::uint8_t> to_bytes() const;
  std::size_t occupied_count() const;
};

/// Rasterizes a scan taken at world heading `heading` into the frame whose +x
/// axis has world direction `axis_direction`. For a robot's own goal-aligned
/// map pass axis_direction = heading + goal_bearing.
LocalMap build_local_map(const LidarScan& scan, double heading, double axis_direction,
                         const SensingConfig& cfg);

struct CommEdge {
  std::size_t i = 0;
  std::size_t j = 0;
  double r = 0.0;
  double theta = 0.0;  // bearing of j in i's goal-aligned frame
};

struct CommGraph {
  std::vector<std::size_t> node_ids;
  std::vector<CommEdge> edges;

  std::vector<CommEdge> edges_from(std::size_t i) const;
};

CommGraph comm_graph(std::span<const Pose> poses, std::span<const Vec2> goals, const SensingConfig& cfg);

/// 7x7 grid over [-r_fov, r_fov]^2 in the goal-aligned frame; id = 7*row + col
/// with row 0 at +y. Positions outside the square clamp to border cells.
int grid_cell_id(double r, double theta, const SensingConfig& cfg);

inline constexpr int kGridSide = 7;
inline constexpr int kGridCells = kGridSide * kGridSide;
inline constexpr int kSelfCell = 24;

}  // namespace collabnav::sensing

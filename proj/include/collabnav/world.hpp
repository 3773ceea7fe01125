#pragma once

#include <collabnav/geometry.hpp>

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace collabnav::world {

struct Rect {
  Vec2 center;
  double width = 1.0;
  double height = 1.0;
  double yaw = 0.0;
  friend bool operator==(const Rect&, const Rect&) = default;
};

struct Circle {
  Vec2 center;
  double radius = 1.0;
  friend bool operator==(const Circle&, const Circle&) = default;
};

using Obstacle = std::variant<Rect, Circle>;

bool contains(const Obstacle& obstacle, Vec2 p);

/// Signed distance from `p` to the obstacle surface (negative inside).
double signed_distance(const Obstacle& obstacle, Vec2 p);

enum class MapKind : std::uint8_t { A, B, C };
enum class TaskKind : std::uint8_t { I, II };

char to_char(MapKind kind);
MapKind map_kind_from_char(char c);
std::string to_string(TaskKind kind);
TaskKind task_kind_from_string(const std::string& s);

struct WorldMap {
  double width = 20.0;
  double height = 20.0;
  std::vector<Obstacle> obstacles;
  std::uint64_t seed = 0;
  MapKind kind = MapKind::A;

  friend bool operator==(const WorldMap&, const WorldMap&) = default;

  /// Distance from `p` to the nearest obstacle surface or map border.
  double clearance(Vec2 p) const;
};

struct GenerationParams {
  double width = 20.0;
  double height = 20.0;
  int count_min = 10;
  int count_max = 30;
  double size_min = 0.5;  // rectangle edge / circle radius
  double size_max = 3.0;
};

WorldMap generate_map(std::uint64_t seed, MapKind kind, const GenerationParams& params = {});

/// Text form: header lines then one `rect cx cy w h yaw` / `circ cx cy r` line per obstacle.
void write_world(std::ostream& os, const WorldMap& world);
std::string to_text(const WorldMap& world);
WorldMap read_world(std::istream& is);

struct Cell {
  int ix = 0;
  int iy = 0;
  friend bool operator==(const Cell&, const Cell&) = default;
};

/// Row-major occupancy raster; cell (ix, iy) spans
/// [origin.x + ix*res, origin.x + (ix+1)*res) x [origin.y + iy*res, ...).
/// Everything outside the raster counts as occupied.
class OccupancyGrid {
 public:
  OccupancyGrid() = default;
  OccupancyGrid(int nx, int ny, double resolution, Vec2 origin = {});

  int nx() const { return nx_; }
  int ny() const { return ny_; }
  double resolution() const { return resolution_; }
  Vec2 origin() const { return origin_; }

  bool in_bounds(int ix, int iy) const { return ix >= 0 && iy >= 0 && ix < nx_ && iy < ny_; }
  bool occupied(int ix, int iy) const {
    return !in_bounds(ix, iy) || cells_[static_cast<std::size_t>(iy) * nx_ + ix] != 0;
  }
  bool occupied(Cell c) const { return occupied(c.ix, c.iy); }
  void set(int ix, int iy, bool occ) { cells_[static_cast<std::size_t>(iy) * nx_ + ix] = occ ? 1 : 0; }

  Cell cell_of(Vec2 p) const;
  Vec2 center_of(Cell c) const;
  std::size_t occupied_count() const;
  const std::vector<std::uint8_t>& cells() const { return cells_; }

  friend bool operator==(const OccupancyGrid&, const OccupancyGrid&) = default;

 private:
  int nx_ = 0;
  int ny_ = 0;
  double resolution_ = 0.05;
  Vec2 origin_;
  std::vector<std::uint8_t> cells_;
};

/// Marks a cell occupied iff its center lies inside some obstacle.
OccupancyGrid rasterize(const WorldMap& world, double resolution = 0.05);

/// Distance along the ray to the first occupied cell, clamped to `max_range`;
/// 0 if the origin cell is occupied.
double raycast(const OccupancyGrid& grid, Vec2 origin, double angle, double max_range);

/// Blocks every cell whose center is within `radius` of an occupied cell center
/// (the outside border included).
OccupancyGrid inflate(const OccupancyGrid& grid, double radius);

struct GridPath {
  std::vector<Cell> cells;
  double length = 0.0;  // metres
  int straight_moves = 0;
  int diagonal_moves = 0;
};

/// Length of a cell path given its move counts: (straight + diagonal*sqrt2)*res.
double path_length(int straight_moves, int diagonal_moves, double resolution);

/// 8-connected A* with octile costs on an already-inflated grid. Diagonal moves
/// may not cut an occupied corner. nullopt means no path.
std::optional<GridPath> astar_search(const OccupancyGrid& grid, Cell start, Cell goal);

/// Inflates by `inflation` then searches.
std::optional<GridPath> astar_path(const OccupancyGrid& grid, Cell start, Cell goal, double inflation);

struct TaskSpec {
  std::vector<Pose> starts;
  std::vector<Vec2> goals;
  TaskKind kind = TaskKind::I;

  std::size_t n_robots() const { return starts.size(); }
};

struct PlacementParams {
  double clearance = 0.3;        // r_protect + 0.1 margin
  double min_separation = 0.5;   // between any two starts / two goals
  int retry_budget = 1000;       // per robot
  double column_row = 1.0;       // Task II start row (y), goals at height - column_row
  double column_jitter = 0.5;
};

/// Task I: uniform starts/goals in free space. Task II: starts along the row
/// y = column_row with equal spacing, goals straight across. Headings face goals.
TaskSpec place_robots(const WorldMap& world, std::size_t n, TaskKind kind, std::uint64_t seed,
                      const PlacementParams& params = {});

}  // namespace collabnav::world

#include <collabnav/error.hpp>
#include <collabnav/sensing.hpp>

#include <algorithm>
#include <cmath>
#include <limits>

namespace collabnav::sensing {

void SensingConfig::validate() const {
  if (local_map_cells <= 0 || local_map_cells % 2 == 0) throw Error("sensing: local_map_cells must be odd");
  if (!(r_fov > 0.0) || !(r_com > 0.0) || !(local_resolution > 0.0) || n_beams <= 0) {
    throw Error("sensing: ranges, resolution and beam count must be positive");
  }
  if (local_map_cells * local_resolution + local_resolution < 2.0 * r_fov) {
    throw Error("sensing: local map does not cover the field of view");
  }
}

std::vector<double> beam_angles(int n_beams) {
  std::vector<double> angles(static_cast<std::size_t>(n_beams));
  const double step = 2.0 * kPi / n_beams;
  for (int k = 0; k < n_beams; ++k) angles[k] = -kPi + (k + 1) * step;
  angles.back() = kPi;
  return angles;
}

std::size_t beam_index(int n_beams, double angle) {
  const double step = 2.0 * kPi / n_beams;
  auto k = static_cast<long>(std::lround((normalize_angle(angle) + kPi) / step)) - 1;
  k %= n_beams;
  if (k < 0) k += n_beams;
  return static_cast<std::size_t>(k);
}

namespace {

// Smallest t >= 0 with |origin + t*dir - center| = radius, or +inf.
double ray_disc(Vec2 origin, Vec2 dir, const Disc& disc) {
  const Vec2 m = origin - disc.center;
  const double b = m.dot(dir);
  const double c = m.dot(m) - disc.radius * disc.radius;
  if (c <= 0.0) return 0.0;
  if (b > 0.0) return std::numeric_limits<double>::infinity();
  const double disc2 = b * b - c;
  if (disc2 < 0.0) return std::numeric_limits<double>::infinity();
  return -b - std::sqrt(disc2);
}

}  // namespace

LidarScan scan(const world::OccupancyGrid& grid, const Pose& pose, const SensingConfig& cfg,
               std::span<const Disc> bodies) {
  LidarScan out;
  out.angles = beam_angles(cfg.n_beams);
  out.ranges.resize(out.angles.size());
  const Vec2 origin = pose.position();

  // Only bodies that can intersect the sensing disc matter.
  std::vector<Disc> near;
  for (const auto& b : bodies) {
    if ((b.center - origin).norm() - b.radius < cfg.r_fov) near.push_back(b);
  }

  for (std::size_t k = 0; k < out.angles.size(); ++k) {
    const double a = pose.heading + out.angles[k];
    double range = world::raycast(grid, origin, a, cfg.r_fov);
    if (!near.empty()) {
      const Vec2 dir{std::cos(a), std::sin(a)};
      for (const auto& b : near) range = std::min(range, ray_disc(origin, dir, b));
    }
    out.ranges[k] = range;
  }
  return out;
}

double goal_bearing(const Pose& pose, Vec2 goal) {
  return normalize_angle(std::atan2(goal.y - pose.y, goal.x - pose.x) - pose.heading);
}

std::vector<std::uint8_t> LocalMap::to_bytes() const {
  std::vector<std::uint8_t> bytes(cells.size());
  std::transform(cells.begin(), cells.end(), bytes.begin(),
                 [](CellState s) { return static_cast<std::uint8_t>(s == CellState::Occupied ? 1 : 0); });
  return bytes;
}

std::size_t LocalMap::occupied_count() const {
  return static_cast<std::size_t>(std::count(cells.begin(), cells.end(), CellState::Occupied));
}

LocalMap build_local_map(const LidarScan& scan, double heading, double axis_direction,
                         const SensingConfig& cfg) {
  LocalMap map;
  map.size = cfg.local_map_cells;
  map.resolution = cfg.local_resolution;
  map.cells.assign(static_cast<std::size_t>(map.size) * map.size, CellState::Unknown);
  const int c = map.size / 2;
  const double res = cfg.local_resolution;

  auto cell = [&](double x, double y, int& row, int& col) {
    col = c + static_cast<int>(std::lround(x / res));
    row = c - static_cast<int>(std::lround(y / res));
    return row >= 0 && col >= 0 && row < map.size && col < map.size;
  };

  const double offset = normalize_angle(heading - axis_direction);
  // Free-space sampling starts off the half-cell lattice so rounding ties are not hit.
  const double step = 0.45 * res;
  for (std::size_t k = 0; k < scan.size(); ++k) {
    const double phi = offset + scan.angles[k];
    const double cx = std::cos(phi), sy = std::sin(phi);
    const double reach = std::min(scan.ranges[k], cfg.r_fov);
    for (double t = 0.3 * res; t < reach; t += step) {
      int row, col;
      if (cell(t * cx, t * sy, row, col)) map.cells[static_cast<std::size_t>(row) * map.size + col] = CellState::Free;
    }
  }
  for (std::size_t k = 0; k < scan.size(); ++k) {
    if (scan.ranges[k] >= cfg.r_fov) continue;
    const double phi = offset + scan.angles[k];
    int row, col;
    if (cell(scan.ranges[k] * std::cos(phi), scan.ranges[k] * std::sin(phi), row, col)) {
      map.cells[static_cast<std::size_t>(row) * map.size + col] = CellState::Occupied;
    }
  }
  return map;
}

std::vector<CommEdge> CommGraph::edges_from(std::size_t i) const {
  std::vector<CommEdge> out;
  for (const auto& e : edges)
    if (e.i == i) out.push_back(e);
  return out;
}

CommGraph comm_graph(std::span<const Pose> poses, std::span<const Vec2> goals, const SensingConfig& cfg) {
  if (poses.size() != goals.size()) throw Error("comm_graph: poses and goals differ in length");
  CommGraph g;
  const std::size_t n = poses.size();
  std::vector<double> axis(n);
  for (std::size_t i = 0; i < n; ++i) {
    g.node_ids.push_back(i);
    axis[i] = std::atan2(goals[i].y - poses[i].y, goals[i].x - poses[i].x);
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      const Vec2 d = poses[j].position() - poses[i].position();
      const double r = d.norm();
      if (r < cfg.r_com) g.edges.push_back({i, j, r, normalize_angle(std::atan2(d.y, d.x) - axis[i])});
    }
  }
  return g;
}

int grid_cell_id(double r, double theta, const SensingConfig& cfg) {
  const double x = r * std::cos(theta), y = r * std::sin(theta);
  const double side = 2.0 * cfg.r_fov / kGridSide;
  const int col = std::clamp(static_cast<int>(std::floor((x + cfg.r_fov) / side)), 0, kGridSide - 1);
  const int row = std::clamp(static_cast<int>(std::floor((cfg.r_fov - y) / side)), 0, kGridSide - 1);
  return kGridSide * row + col;
}

}  // namespace collabnav::sensing

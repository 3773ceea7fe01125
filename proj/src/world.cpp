#include <collabnav/error.hpp>
#include <collabnav/rng.hpp>
#include <collabnav/world.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <limits>
#include <ostream>
#include <queue>
#include <sstream>

namespace collabnav::world {

namespace {

Vec2 to_local(const Rect& r, Vec2 p) { return rotate(p - r.center, -r.yaw); }

struct Visitor {
  Vec2 p;
  bool operator()(const Rect& r) const {
    const Vec2 d = to_local(r, p);
    return std::abs(d.x) <= 0.5 * r.width && std::abs(d.y) <= 0.5 * r.height;
  }
  bool operator()(const Circle& c) const {
    const Vec2 d = p - c.center;
    return d.dot(d) <= c.radius * c.radius;
  }
};

}  // namespace

bool contains(const Obstacle& obstacle, Vec2 p) { return std::visit(Visitor{p}, obstacle); }

double signed_distance(const Obstacle& obstacle, Vec2 p) {
  if (const auto* c = std::get_if<Circle>(&obstacle)) return (p - c->center).norm() - c->radius;
  const auto& r = std::get<Rect>(obstacle);
  const Vec2 d = to_local(r, p);
  const double qx = std::abs(d.x) - 0.5 * r.width;
  const double qy = std::abs(d.y) - 0.5 * r.height;
  const double outside = std::hypot(std::max(qx, 0.0), std::max(qy, 0.0));
  return outside + std::min(std::max(qx, qy), 0.0);
}

char to_char(MapKind kind) { return "ABC"[static_cast<int>(kind)]; }

MapKind map_kind_from_char(char c) {
  switch (c) {
    case 'A': case 'a': return MapKind::A;
    case 'B': case 'b': return MapKind::B;
    case 'C': case 'c': return MapKind::C;
    default: throw Error(std::string("unknown map kind '") + c + "'");
  }
}

std::string to_string(TaskKind kind) { return kind == TaskKind::I ? "I" : "II"; }

TaskKind task_kind_from_string(const std::string& s) {
  if (s == "I" || s == "1") return TaskKind::I;
  if (s == "II" || s == "2") return TaskKind::II;
  throw Error("unknown task kind '" + s + "'");
}

double WorldMap::clearance(Vec2 p) const {
  double best = std::min({p.x, width - p.x, p.y, height - p.y});
  for (const auto& o : obstacles) best = std::min(best, signed_distance(o, p));
  return best;
}

WorldMap generate_map(std::uint64_t seed, MapKind kind, const GenerationParams& params) {
  Rng rng(mix_seed(seed, 0x6d6170));
  WorldMap world;
  world.width = params.width;
  world.height = params.height;
  world.seed = seed;
  world.kind = kind;

  const auto count = rng.uniform_int(params.count_min, params.count_max);
  world.obstacles.reserve(static_cast<std::size_t>(count));
  for (std::int64_t i = 0; i < count; ++i) {
    const bool rect = kind == MapKind::A || (kind == MapKind::C && rng.uniform() < 0.5);
    const Vec2 center{rng.uniform(0.0, params.width), rng.uniform(0.0, params.height)};
    if (rect) {
      Rect r;
      r.center = center;
      r.width = rng.uniform(params.size_min, params.size_max);
      r.height = rng.uniform(params.size_min, params.size_max);
      r.yaw = rng.uniform(-kPi, kPi);
      world.obstacles.emplace_back(r);
    } else {
      world.obstacles.emplace_back(Circle{center, rng.uniform(params.size_min, params.size_max)});
    }
  }
  return world;
}

void write_world(std::ostream& os, const WorldMap& world) {
  char buf[160];
  os << "world 1\n";
  os << "seed " << world.seed << "\n";
  os << "kind " << to_char(world.kind) << "\n";
  std::snprintf(buf, sizeof(buf), "size %.6f %.6f\n", world.width, world.height);
  os << buf;
  os << "obstacles " << world.obstacles.size() << "\n";
  for (const auto& o : world.obstacles) {
    if (const auto* r = std::get_if<Rect>(&o)) {
      std::snprintf(buf, sizeof(buf), "rect %.6f %.6f %.6f %.6f %.6f\n", r->center.x, r->center.y,
                    r->width, r->height, r->yaw);
    } else {
      const auto& c = std::get<Circle>(o);
      std::snprintf(buf, sizeof(buf), "circ %.6f %.6f %.6f\n", c.center.x, c.center.y, c.radius);
    }
    os << buf;
  }
}

std::string to_text(const WorldMap& world) {
  std::ostringstream os;
  write_world(os, world);
  return os.str();
}

WorldMap read_world(std::istream& is) {
  auto malformed = [](const std::string& what) {
    return FormatError(FormatError::Kind::Malformed, "world file: " + what);
  };
  std::string tag;
  int version = 0;
  if (!(is >> tag >> version) || tag != "world") {
    throw FormatError(FormatError::Kind::BadMagic, "world file: missing 'world' header");
  }
  if (version != 1) throw FormatError(FormatError::Kind::VersionMismatch, "world file: unsupported version");

  WorldMap world;
  char kind = 0;
  std::size_t count = 0;
  if (!(is >> tag >> world.seed) || tag != "seed") throw malformed("seed");
  if (!(is >> tag >> kind) || tag != "kind") throw malformed("kind");
  world.kind = map_kind_from_char(kind);
  if (!(is >> tag >> world.width >> world.height) || tag != "size") throw malformed("size");
  if (!(is >> tag >> count) || tag != "obstacles") throw malformed("obstacles");
  for (std::size_t i = 0; i < count; ++i) {
    if (!(is >> tag)) throw malformed("truncated obstacle list");
    if (tag == "rect") {
      Rect r;
      if (!(is >> r.center.x >> r.center.y >> r.width >> r.height >> r.yaw)) throw malformed("rect");
      world.obstacles.emplace_back(r);
    } else if (tag == "circ") {
      Circle c;
      if (!(is >> c.center.x >> c.center.y >> c.radius)) throw malformed("circ");
      world.obstacles.emplace_back(c);
    } else {
      throw malformed("unknown obstacle '" + tag + "'");
    }
  }
  return world;
}

OccupancyGrid::OccupancyGrid(int nx, int ny, double resolution, Vec2 origin)
    : nx_(nx), ny_(ny), resolution_(resolution), origin_(origin),
      cells_(static_cast<std::size_t>(nx) * static_cast<std::size_t>(ny), 0) {}

Cell OccupancyGrid::cell_of(Vec2 p) const {
  return {static_cast<int>(std::floor((p.x - origin_.x) / resolution_)),
          static_cast<int>(std::floor((p.y - origin_.y) / resolution_))};
}

Vec2 OccupancyGrid::center_of(Cell c) const {
  return {origin_.x + (c.ix + 0.5) * resolution_, origin_.y + (c.iy + 0.5) * resolution_};
}

std::size_t OccupancyGrid::occupied_count() const {
  return static_cast<std::size_t>(std::count(cells_.begin(), cells_.end(), std::uint8_t{1}));
}

OccupancyGrid rasterize(const WorldMap& world, double resolution) {
  if (!(resolution > 0.0)) throw Error("rasterize: resolution must be positive");
  const int nx = static_cast<int>(std::ceil(world.width / resolution - 1e-9));
  const int ny = static_cast<int>(std::ceil(world.height / resolution - 1e-9));
  OccupancyGrid grid(nx, ny, resolution);

  for (const auto& o : world.obstacles) {
    Vec2 lo, hi;
    if (const auto* c = std::get_if<Circle>(&o)) {
      lo = {c->center.x - c->radius, c->center.y - c->radius};
      hi = {c->center.x + c->radius, c->center.y + c->radius};
    } else {
      const auto& r = std::get<Rect>(o);
      const double ex = 0.5 * (std::abs(std::cos(r.yaw)) * r.width + std::abs(std::sin(r.yaw)) * r.height);
      const double ey = 0.5 * (std::abs(std::sin(r.yaw)) * r.width + std::abs(std::cos(r.yaw)) * r.height);
      lo = {r.center.x - ex, r.center.y - ey};
      hi = {r.center.x + ex, r.center.y + ey};
    }
    const int x0 = std::max(0, static_cast<int>(std::floor(lo.x / resolution)) - 1);
    const int y0 = std::max(0, static_cast<int>(std::floor(lo.y / resolution)) - 1);
    const int x1 = std::min(nx - 1, static_cast<int>(std::floor(hi.x / resolution)) + 1);
    const int y1 = std::min(ny - 1, static_cast<int>(std::floor(hi.y / resolution)) + 1);
    for (int iy = y0; iy <= y1; ++iy) {
      for (int ix = x0; ix <= x1; ++ix) {
        if (!grid.occupied(ix, iy) && contains(o, grid.center_of({ix, iy}))) grid.set(ix, iy, true);
      }
    }
  }
  return grid;
}

double raycast(const OccupancyGrid& grid, Vec2 origin, double angle, double max_range) {
  const double res = grid.resolution();
  const double gx = (origin.x - grid.origin().x) / res;
  const double gy = (origin.y - grid.origin().y) / res;
  int ix = static_cast<int>(std::floor(gx));
  int iy = static_cast<int>(std::floor(gy));
  if (grid.occupied(ix, iy)) return 0.0;

  const double dx = std::cos(angle), dy = std::sin(angle);
  constexpr double kInf = std::numeric_limits<double>::infinity();
  const int step_x = dx > 0 ? 1 : -1;
  const int step_y = dy > 0 ? 1 : -1;
  double t_max_x = kInf, t_max_y = kInf, t_delta_x = kInf, t_delta_y = kInf;
  if (dx != 0.0) {
    t_delta_x = res / std::abs(dx);
    t_max_x = (dx > 0 ? (ix + 1 - gx) : (gx - ix)) * t_delta_x;
  }
  if (dy != 0.0) {
    t_delta_y = res / std::abs(dy);
    t_max_y = (dy > 0 ? (iy + 1 - gy) : (gy - iy)) * t_delta_y;
  }

  for (;;) {
    double t;
    if (t_max_x < t_max_y) {
      t = t_max_x;
      ix += step_x;
      t_max_x += t_delta_x;
    } else {
      t = t_max_y;
      iy += step_y;
      t_max_y += t_delta_y;
    }
    if (t >= max_range) return max_range;
    if (grid.occupied(ix, iy)) return t;
  }
}

OccupancyGrid inflate(const OccupancyGrid& grid, double radius) {
  if (radius <= 0.0) return grid;
  const double res = grid.resolution();
  const int k = static_cast<int>(std::floor(radius / res + 1e-9));
  const double limit = (radius / res) * (radius / res) + 1e-9;
  std::vector<std::pair<int, int>> kernel;
  for (int dy = -k; dy <= k; ++dy)
    for (int dx = -k; dx <= k; ++dx)
      if (dx * dx + dy * dy <= limit) kernel.emplace_back(dx, dy);

  // Pad so that out-of-bounds cells (treated as occupied) also stamp the kernel.
  const int pad = k + 1;
  const int px = grid.nx() + 2 * pad, py = grid.ny() + 2 * pad;
  std::vector<std::uint8_t> src(static_cast<std::size_t>(px) * py, 1);
  for (int iy = 0; iy < grid.ny(); ++iy)
    for (int ix = 0; ix < grid.nx(); ++ix)
      src[static_cast<std::size_t>(iy + pad) * px + ix + pad] = grid.occupied(ix, iy) ? 1 : 0;

  std::vector<std::uint8_t> dst = src;
  auto at = [&](int x, int y) { return src[static_cast<std::size_t>(y) * px + x]; };
  for (int y = 1; y < py - 1; ++y) {
    for (int x = 1; x < px - 1; ++x) {
      if (!at(x, y)) continue;
      if (at(x - 1, y) && at(x + 1, y) && at(x, y - 1) && at(x, y + 1)) continue;
      for (const auto& [dx, dy] : kernel) {
        const int u = x + dx, v = y + dy;
        if (u >= 0 && v >= 0 && u < px && v < py) dst[static_cast<std::size_t>(v) * px + u] = 1;
      }
    }
  }

  OccupancyGrid out(grid.nx(), grid.ny(), res, grid.origin());
  for (int iy = 0; iy < grid.ny(); ++iy)
    for (int ix = 0; ix < grid.nx(); ++ix)
      out.set(ix, iy, dst[static_cast<std::size_t>(iy + pad) * px + ix + pad] != 0);
  return out;
}

double path_length(int straight_moves, int diagonal_moves, double resolution) {
  return (straight_moves + diagonal_moves * std::numbers::sqrt2) * resolution;
}

std::optional<GridPath> astar_search(const OccupancyGrid& grid, Cell start, Cell goal) {
  if (grid.occupied(start) || grid.occupied(goal)) return std::nullopt;
  const int nx = grid.nx();
  const auto n = static_cast<std::size_t>(nx) * grid.ny();
  constexpr double kInf = std::numeric_limits<double>::infinity();
  std::vector<double> g(n, kInf);
  std::vector<int> parent(n, -1);
  std::vector<std::uint8_t> closed(n, 0);

  auto index = [nx](int ix, int iy) { return iy * nx + ix; };
  auto heuristic = [&](int ix, int iy) {
    const int ax = std::abs(ix - goal.ix), ay = std::abs(iy - goal.iy);
    return std::abs(ax - ay) + std::numbers::sqrt2 * std::min(ax, ay);
  };

  struct Entry {
    double f, g;
    int idx;
    bool operator>(const Entry& o) const {
      if (f != o.f) return f > o.f;
      if (g != o.g) return g < o.g;
      return idx > o.idx;
    }
  };
  std::priority_queue<Entry, std::vector<Entry>, std::greater<>> open;

  const int s = index(start.ix, start.iy), t = index(goal.ix, goal.iy);
  g[s] = 0.0;
  open.push({heuristic(start.ix, start.iy), 0.0, s});

  static constexpr int kDx[8] = {1, -1, 0, 0, 1, 1, -1, -1};
  static constexpr int kDy[8] = {0, 0, 1, -1, 1, -1, 1, -1};

  while (!open.empty()) {
    const Entry cur = open.top();
    open.pop();
    if (closed[cur.idx]) continue;
    closed[cur.idx] = 1;
    if (cur.idx == t) break;
    const int cx = cur.idx % nx, cy = cur.idx / nx;
    for (int m = 0; m < 8; ++m) {
      const int ux = cx + kDx[m], uy = cy + kDy[m];
      if (grid.occupied(ux, uy)) continue;
      const bool diagonal = m >= 4;
      if (diagonal && (grid.occupied(cx + kDx[m], cy) || grid.occupied(cx, cy + kDy[m]))) continue;
      const int u = index(ux, uy);
      if (closed[u]) continue;
      const double cand = cur.g + (diagonal ? std::numbers::sqrt2 : 1.0);
      if (cand < g[u]) {
        g[u] = cand;
        parent[u] = cur.idx;
        open.push({cand + heuristic(ux, uy), cand, u});
      }
    }
  }
  if (!closed[t]) return std::nullopt;

  GridPath path;
  for (int v = t; v != -1; v = parent[v]) path.cells.push_back({v % nx, v / nx});
  std::reverse(path.cells.begin(), path.cells.end());
  for (std::size_t i = 1; i < path.cells.size(); ++i) {
    const bool diagonal = path.cells[i].ix != path.cells[i - 1].ix && path.cells[i].iy != path.cells[i - 1].iy;
    (diagonal ? path.diagonal_moves : path.straight_moves)++;
  }
  path.length = path_length(path.straight_moves, path.diagonal_moves, grid.resolution());
  return path;
}

std::optional<GridPath> astar_path(const OccupancyGrid& grid, Cell start, Cell goal, double inflation) {
  return astar_search(inflate(grid, inflation), start, goal);
}

TaskSpec place_robots(const WorldMap& world, std::size_t n, TaskKind kind, std::uint64_t seed,
                      const PlacementParams& params) {
  Rng rng(mix_seed(seed, 0x706c6163, static_cast<std::uint64_t>(kind)));
  TaskSpec task;
  task.kind = kind;

  auto separated = [&](Vec2 p, const auto& others) {
    for (const auto& o : others) {
      const Vec2 q{o.x, o.y};
      if ((p - q).norm() < params.min_separation) return false;
    }
    return true;
  };
  auto ok = [&](Vec2 p) { return world.clearance(p) >= params.clearance; };

  for (std::size_t i = 0; i < n; ++i) {
    bool placed = false;
    Vec2 start, goal;
    for (int attempt = 0; attempt < params.retry_budget && !placed; ++attempt) {
      if (kind == TaskKind::I) {
        start = {rng.uniform(0.0, world.width), rng.uniform(0.0, world.height)};
        goal = {rng.uniform(0.0, world.width), rng.uniform(0.0, world.height)};
      } else {
        const double spacing = world.width / static_cast<double>(n + 1);
        const double slot = spacing * static_cast<double>(i + 1);
        double jx = 0.0, jy0 = 0.0, jy1 = 0.0;
        if (attempt > 0) {
          const double half = std::min(0.5 * spacing, params.column_jitter);
          jx = rng.uniform(-half, half);
          jy0 = rng.uniform(-params.column_jitter, params.column_jitter);
          jy1 = rng.uniform(-params.column_jitter, params.column_jitter);
        }
        start = {slot + jx, params.column_row + jy0};
        goal = {slot + jx, world.height - params.column_row + jy1};
      }
      placed = ok(start) && ok(goal) && separated(start, task.starts) && separated(goal, task.goals);
    }
    if (!placed) {
      throw PlacementFailed("place_robots: retry budget exhausted for robot " + std::to_string(i));
    }
    task.starts.push_back({start.x, start.y, std::atan2(goal.y - start.y, goal.x - start.x)});
    task.goals.push_back(goal);
  }
  return task;
}

}  // namespace collabnav::world

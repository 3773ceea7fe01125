#include <collabnav/error.hpp>
#include <collabnav/export.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace collabnav::report {

std::string fixed6(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

std::string metrics_csv(std::span<const eval::PolicyEvaluation> runs) {
  std::ostringstream os;
  os << "policy,robots,reached,sr,apl,decisions,scored_decisions,acc,violations,apl_basis\n";
  for (const auto& r : runs) {
    const auto& m = r.metrics;
    os << r.policy << "," << m.robots << "," << m.reached << "," << fixed6(m.sr) << "," << fixed6(m.apl) << ","
       << m.decisions << "," << m.scored_decisions << "," << fixed6(m.acc) << "," << m.violations << ",per-robot\n";
  }
  return os.str();
}

std::string histogram_csv(std::span<const eval::PolicyEvaluation> runs) {
  std::ostringstream os;
  os << "policy,bin,lower,upper,frequency\n";
  for (const auto& r : runs) {
    const auto& h = r.metrics.ft;
    for (std::size_t b = 0; b < h.counts.size(); ++b) {
      const double upper = b + 1 == h.counts.size() ? INFINITY : h.edges[b + 1];
      os << r.policy << "," << b << "," << fixed6(h.edges[b]) << "," << fixed6(upper) << "," << h.counts[b] << "\n";
    }
  }
  return os.str();
}

std::string trajectory_csv(const planner::EpisodeLog& log, std::size_t robot) {
  std::ostringstream os;
  os << "step,t,x,y,heading,mode,v,omega,waiting\n";
  for (const auto& p : log.trajectories.at(robot)) {
    os << p.step << "," << fixed6(p.t) << "," << fixed6(p.pose.x) << "," << fixed6(p.pose.y) << ","
       << fixed6(p.pose.heading) << "," << planner::to_string(p.mode.kind) << "," << fixed6(p.cmd.v) << ","
       << fixed6(p.cmd.omega) << "," << (p.waiting ? 1 : 0) << "\n";
  }
  return os.str();
}

std::string decision_csv(const planner::EpisodeLog& log) {
  std::ostringstream os;
  os << "step,robot,neighbors,advice,chosen\n";
  for (const auto& d : log.decisions) {
    os << d.step << "," << d.robot << ",";
    for (std::size_t k = 0; k < d.neighbors.size(); ++k) os << (k ? ";" : "") << d.neighbors[k];
    os << "," << planner::to_string(d.advice) << "," << planner::to_string(d.chosen) << "\n";
  }
  return os.str();
}

namespace {

constexpr double kScale = 40.0;  // px per metre

struct Svg {
  std::ostringstream os;
  double height = 0.0;

  std::string x(double v) const { return fixed6(v * kScale); }
  std::string y(double v) const { return fixed6((height - v) * kScale); }
};

void star(Svg& s, Vec2 c, double r, const char* fill) {
  s.os << "<polygon fill=\"" << fill << "\" points=\"";
  for (int k = 0; k < 10; ++k) {
    const double a = kPi / 2 + k * kPi / 5;
    const double rr = k % 2 ? r * 0.45 : r;
    s.os << (k ? " " : "") << s.x(c.x + rr * std::cos(a)) << "," << s.y(c.y + rr * std::sin(a));
  }
  s.os << "\"/>\n";
}

}  // namespace

std::string trajectory_svg(const eval::EpisodeSpec& spec, const planner::EpisodeLog& log) {
  static const char* kColors[] = {"#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf"};
  Svg s;
  s.height = spec.world.height;
  s.os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << fixed6(spec.world.width * kScale) << "\" height=\""
       << fixed6(spec.world.height * kScale) << "\">\n";
  s.os << "<rect x=\"0\" y=\"0\" width=\"" << fixed6(spec.world.width * kScale) << "\" height=\""
       << fixed6(spec.world.height * kScale) << "\" fill=\"white\" stroke=\"black\"/>\n";
  for (const auto& o : spec.world.obstacles) {
    if (const auto* r = std::get_if<world::Rect>(&o)) {
      s.os << "<rect x=\"" << fixed6(-r->width / 2 * kScale) << "\" y=\"" << fixed6(-r->height / 2 * kScale)
           << "\" width=\"" << fixed6(r->width * kScale) << "\" height=\"" << fixed6(r->height * kScale)
           << "\" fill=\"#888888\" transform=\"translate(" << s.x(r->center.x) << "," << s.y(r->center.y)
           << ") rotate(" << fixed6(-r->yaw * 180.0 / kPi) << ")\"/>\n";
    } else {
      const auto& c = std::get<world::Circle>(o);
      s.os << "<circle cx=\"" << s.x(c.center.x) << "\" cy=\"" << s.y(c.center.y) << "\" r=\""
           << fixed6(c.radius * kScale) << "\" fill=\"#888888\"/>\n";
    }
  }
  std::size_t colour = 0;
  for (std::size_t i = 0; i < spec.task.n_robots(); ++i) {
    const Vec2 start = spec.task.starts[i].position();
    if (!spec.moving[i]) {
      s.os << "<circle cx=\"" << s.x(start.x) << "\" cy=\"" << s.y(start.y) << "\" r=\"" << fixed6(0.2 * kScale)
           << "\" fill=\"#1f77b4\"/>\n";
      continue;
    }
    const char* c = kColors[colour++ % std::size(kColors)];
    if (i < log.trajectories.size()) {
      s.os << "<polyline fill=\"none\" stroke=\"" << c << "\" stroke-width=\"2\" points=\"";
      bool first = true;
      for (const auto& p : log.trajectories[i]) {
        s.os << (first ? "" : " ") << s.x(p.pose.x) << "," << s.y(p.pose.y);
        first = false;
      }
      s.os << "\"/>\n";
    }
    s.os << "<circle cx=\"" << s.x(start.x) << "\" cy=\"" << s.y(start.y) << "\" r=\"" << fixed6(0.12 * kScale)
         << "\" fill=\"" << c << "\"/>\n";
    star(s, spec.task.goals[i], 0.3, c);
  }
  for (const auto& d : log.decisions) {
    s.os << "<circle cx=\"" << s.x(d.pose.x) << "\" cy=\"" << s.y(d.pose.y) << "\" r=\"" << fixed6(0.1 * kScale)
         << "\" fill=\"none\" stroke=\"black\" class=\"decision-" << planner::to_string(d.chosen) << "\"/>\n";
  }
  s.os << "</svg>\n";
  return s.os.str();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot write " + path.string());
  os << text;
  if (!os) throw IoError("write failed for " + path.string());
}

}  // namespace collabnav::report

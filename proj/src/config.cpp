#include <collabnav/config.hpp>

#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>

namespace collabnav::config {

namespace {

struct Field {
  std::string key;
  std::function<std::string()> get;
  std::function<void(const std::string&)> set;
};

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename T>
T parse_number(const std::string& key, const std::string& text) {
  T v{};
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || ptr != end) throw ConfigError("bad value '" + text + "' for " + key);
  return v;
}

template <typename T>
std::string format_number(T v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

template <typename T>
Field num(std::string key, T& ref) {
  return {key, [&ref] { return format_number(ref); },
          [&ref, key](const std::string& s) { ref = parse_number<T>(key, s); }};
}

Field flag(std::string key, bool& ref) {
  return {key, [&ref] { return std::string(ref ? "true" : "false"); },
          [&ref, key](const std::string& s) {
            if (s == "true" || s == "1") ref = true;
            else if (s == "false" || s == "0") ref = false;
            else throw ConfigError("bad value '" + s + "' for " + key + " (expected true or false)");
          }};
}

std::vector<Field> fields(AppConfig& c) {
  std::vector<Field> f;
  auto& s = c.sensing;
  f.push_back(num("sensing.r_fov", s.r_fov));
  f.push_back(num("sensing.r_com", s.r_com));
  f.push_back(num("sensing.n_beams", s.n_beams));
  f.push_back(num("sensing.local_map_cells", s.local_map_cells));
  f.push_back(num("sensing.local_resolution", s.local_resolution));

  auto& p = c.planner;
  f.push_back(num("planner.v_max", p.v_max));
  f.push_back(num("planner.a_max", p.a_max));
  f.push_back(num("planner.dt", p.dt));
  f.push_back(num("planner.r_protect", p.r_protect));
  f.push_back(num("planner.theta_0", p.theta_0));
  f.push_back(num("planner.theta_1", p.theta_1));
  f.push_back(num("planner.k", p.k));
  f.push_back(num("planner.r_goal", p.r_goal));
  f.push_back(num("planner.omega_turn", p.omega_turn));
  f.push_back(num("planner.omega_min", p.omega_min));
  f.push_back(num("planner.follow_gap", p.follow_gap));
  f.push_back(num("planner.k_wall", p.k_wall));
  f.push_back(num("planner.side_deadband", p.side_deadband));
  f.push_back(num("planner.progress_margin", p.progress_margin));
  f.push_back(num("planner.conflict_hysteresis", p.conflict_hysteresis));

  auto& g = c.generation;
  f.push_back(num("generation.n_robots", g.n_robots));
  f.push_back(num("generation.scenes", g.scenes));
  f.push_back(num("generation.grid_resolution", g.grid_resolution));
  f.push_back(num("generation.inflation", g.inflation));
  f.push_back(num("generation.snap_radius", g.snap_radius));
  f.push_back(num("generation.eps_lat", g.eps_lat));
  f.push_back(num("generation.horizon", g.horizon));
  f.push_back(num("generation.advance_step", g.advance_step));
  f.push_back({"generation.advance", [&g] { return expert::to_string(g.advance); },
               [&g](const std::string& v) {
                 try {
                   g.advance = expert::parse_advance(v);
                 } catch (const Error& e) {
                   throw ConfigError(e.what());
                 }
               }});
  f.push_back(num("generation.rollout_steps", g.rollout_steps));
  f.push_back(num("generation.rollout_decisions", g.rollout_decisions));
  f.push_back(num("generation.split_seed", g.split_seed));
  f.push_back(num("generation.map.width", g.map.width));
  f.push_back(num("generation.map.height", g.map.height));
  f.push_back(num("generation.map.count_min", g.map.count_min));
  f.push_back(num("generation.map.count_max", g.map.count_max));
  f.push_back(num("generation.map.size_min", g.map.size_min));
  f.push_back(num("generation.map.size_max", g.map.size_max));
  f.push_back(num("generation.placement.clearance", g.placement.clearance));
  f.push_back(num("generation.placement.min_separation", g.placement.min_separation));
  f.push_back(num("generation.placement.retry_budget", g.placement.retry_budget));
  f.push_back(num("generation.placement.column_row", g.placement.column_row));
  f.push_back(num("generation.placement.column_jitter", g.placement.column_jitter));

  auto& m = c.model;
  f.push_back({"model.channels",
               [&m] {
                 return format_number(m.channels[0]) + "," + format_number(m.channels[1]) + "," +
                        format_number(m.channels[2]);
               },
               [&m](const std::string& v) {
                 std::stringstream ss(v);
                 std::string part;
                 std::size_t i = 0;
                 while (std::getline(ss, part, ',')) {
                   if (i == 3) throw ConfigError("model.channels takes three widths");
                   m.channels[i++] = parse_number<int>("model.channels", trim(part));
                 }
                 if (i != 3) throw ConfigError("model.channels takes three widths");
               }});
  f.push_back(num("model.feature", m.feature));
  f.push_back(num("model.fused", m.fused));
  f.push_back(num("model.mlp_hidden", m.mlp_hidden));
  f.push_back(num("model.leaky_slope", m.leaky_slope));
  f.push_back({"model.beta", [&m] { return std::string(m.beta == giwt::BetaMode::Exact ? "exact" : "taylor"); },
               [&m](const std::string& v) {
                 if (v == "exact") m.beta = giwt::BetaMode::Exact;
                 else if (v == "taylor") m.beta = giwt::BetaMode::Taylor;
                 else throw ConfigError("bad value '" + v + "' for model.beta (expected exact or taylor)");
               }});

  auto& t = c.train;
  f.push_back(num("train.lr", t.lr));
  f.push_back(num("train.batch", t.batch));
  f.push_back(num("train.epochs", t.epochs));
  f.push_back(num("train.seed", t.seed));
  f.push_back(flag("train.mirror", t.mirror));
  f.push_back(flag("train.cosine", t.cosine));

  auto& e = c.eval;
  f.push_back(num("eval.episodes", e.episodes));
  f.push_back(num("eval.budget", e.budget));
  f.push_back(num("eval.n_robots", e.n_robots));
  f.push_back(num("eval.workers", e.workers));
  f.push_back(num("eval.attempts", e.attempts));
  f.push_back(num("eval.ft_bin_width", e.ft_bin_width));
  f.push_back(num("eval.ft_bins", e.ft_bins));
  return f;
}

}  // namespace

giwt::GiwtDims AppConfig::model_dims() const {
  giwt::GiwtDims d = model;
  d.map_size = sensing.local_map_cells;
  d.r_fov = sensing.r_fov;
  return d;
}

void AppConfig::validate() const {
  try {
    sensing.validate();
    planner.validate();
    model_dims().validate();
    train.validate();
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
  if (eval.ft_bins < 1 || !(eval.ft_bin_width > 0.0)) throw ConfigError("eval.ft_bins and eval.ft_bin_width must be positive");
  if (!(eval.budget > 0.0)) throw ConfigError("eval.budget must be positive");
}

KeyValues parse(std::istream& is) {
  KeyValues out;
  std::string line;
  for (int n = 1; std::getline(is, line); ++n) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("config line " + std::to_string(n) + ": expected key = value");
    auto key = trim(line.substr(0, eq));
    auto value = trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError("config line " + std::to_string(n) + ": empty key");
    out.emplace_back(std::move(key), std::move(value));
  }
  return out;
}

void apply(AppConfig& cfg, const std::string& key, const std::string& value) {
  for (auto& f : fields(cfg)) {
    if (f.key == key) {
      f.set(value);
      return;
    }
  }
  throw ConfigError("unknown config key '" + key + "'");
}

void apply(AppConfig& cfg, const KeyValues& kv) {
  for (const auto& [k, v] : kv) apply(cfg, k, v);
}

void load_file(AppConfig& cfg, const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot read config " + path.string());
  config::apply(cfg, parse(is));
}

KeyValues dump(const AppConfig& cfg) {
  AppConfig copy = cfg;
  KeyValues out;
  for (auto& f : fields(copy)) out.emplace_back(f.key, f.get());
  return out;
}

}  // namespace collabnav::config

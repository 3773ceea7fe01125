#include <collabnav/config.hpp>
#include <collabnav/dataset_io.hpp>
#include <collabnav/error.hpp>
#include <collabnav/eval.hpp>
#include <collabnav/export.hpp>
#include <collabnav/nn/checkpoint.hpp>
#include <collabnav/rng.hpp>
#include <collabnav/train.hpp>

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <memory>
#include <mutex>
#include <sstream>

namespace fs = std::filesystem;
using namespace collabnav;

namespace {

constexpr int kOk = 0;
constexpr int kUsage = 1;
constexpr int kData = 2;
constexpr int kThreshold = 3;

struct Globals {
  std::string config_file;
  std::uint64_t seed = 1;
  std::string out = "out";
  std::vector<std::string> overrides;
};

config::AppConfig load_config(const Globals& g) {
  config::AppConfig cfg;
  if (!g.config_file.empty()) config::load_file(cfg, g.config_file);
  for (const auto& kv : g.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw config::ConfigError("--set expects key=value, got '" + kv + "'");
    auto trim = [](std::string s) {
      s.erase(0, s.find_first_not_of(" \t"));
      s.erase(s.find_last_not_of(" \t") + 1);
      return s;
    };
    config::apply(cfg, trim(kv.substr(0, eq)), trim(kv.substr(eq + 1)));
  }
  cfg.validate();
  return cfg;
}

std::vector<world::MapKind> parse_maps(const std::string& s) {
  std::vector<world::MapKind> kinds;
  for (char c : s)
    if (c != ',' && c != ' ') kinds.push_back(world::map_kind_from_char(c));
  if (kinds.empty()) throw config::ConfigError("no map kinds given");
  return kinds;
}

std::string fmt6(double v) { return report::fixed6(v); }

/// Rebuilds a model from a checkpoint; widths come from the tensors.
std::unique_ptr<giwt::DirectionModel<float>> load_model(const fs::path& path, const giwt::GiwtDims& base) {
  const auto tensors = nn::load_checkpoint(path);
  const auto shape = giwt::infer_shape(tensors, base);
  auto model = giwt::make_model<float>(shape.kind, shape.dims, 0);
  nn::assign_parameters(model->params(), tensors);
  return model;
}

giwt::GiwtDims dims_for(const config::AppConfig& cfg, const sensing::SensingConfig& sensing) {
  auto d = cfg.model;
  d.map_size = sensing.local_map_cells;
  d.r_fov = sensing.r_fov;
  return d;
}

const std::vector<std::uint32_t>& split_of(const expert::Dataset& ds, const std::string& name) {
  if (name == "train") return ds.split.train;
  if (name == "val") return ds.split.val;
  if (name == "test") return ds.split.test;
  throw config::ConfigError("unknown split '" + name + "' (train, val or test)");
}

// ---------------------------------------------------------------------------

struct GenMapArgs {
  std::string kind = "A";
  int count = 1;
};

int cmd_gen_map(const Globals& g, const GenMapArgs& a) {
  const auto cfg = load_config(g);
  if (a.kind.size() != 1) throw config::ConfigError("--kind takes one of A, B, C");
  const auto kind = world::map_kind_from_char(a.kind[0]);
  for (int i = 0; i < a.count; ++i) {
    const std::uint64_t seed = g.seed + static_cast<std::uint64_t>(i);
    eval::EpisodeSpec spec;
    spec.world = world::generate_map(seed, kind, cfg.generation.map);
    const std::string stem = std::string("map_") + world::to_char(kind) + "_" + std::to_string(seed);
    report::write_text(fs::path(g.out) / (stem + ".txt"), world::to_text(spec.world));
    report::write_text(fs::path(g.out) / (stem + ".svg"), report::trajectory_svg(spec, {}));
    std::cout << stem << ": " << spec.world.obstacles.size() << " obstacles\n";
  }
  return kOk;
}

struct GenDataArgs {
  std::string map = "C";
  std::string task = "I";
  long scenes = -1;
  unsigned workers = 1;
};

int cmd_gen_data(const Globals& g, const GenDataArgs& a) {
  auto cfg = load_config(g);
  if (a.scenes >= 0) cfg.generation.scenes = static_cast<std::size_t>(a.scenes);
  if (a.map.size() != 1) throw config::ConfigError("--map takes one of A, B, C");
  const auto map = world::map_kind_from_char(a.map[0]);
  const auto task = world::task_kind_from_string(a.task);
  std::vector<std::uint64_t> seeds;
  for (std::size_t i = 0; i < cfg.generation.scenes; ++i)
    seeds.push_back(mix_seed(g.seed, static_cast<std::uint64_t>(map) * 2 + static_cast<std::uint64_t>(task), i));
  const auto ds = expert::build_dataset(seeds, map, task, cfg.generation, cfg.sensing, cfg.planner, a.workers);
  const auto manifest = dataset::save_dataset(g.out, dataset::dataset_stem(map, task), ds, cfg.sensing, cfg.planner,
                                              cfg.generation);
  std::size_t right = 0;
  for (const auto& s : ds.samples) right += s.label;
  std::cout << manifest.string() << ": " << ds.samples.size() << " samples (" << ds.samples.size() - right
            << " left, " << right << " right), " << ds.failed_placements << " failed placements\n";
  return kOk;
}

struct TrainArgs {
  std::string data;
  std::string model = "giwt";
  std::string name;
};

int cmd_train(const Globals& g, const TrainArgs& a, bool seed_given) {
  auto cfg = load_config(g);
  if (seed_given) cfg.train.seed = g.seed;
  const auto ld = dataset::load_dataset(a.data);
  const auto kind = giwt::model_kind_from_string(a.model);
  auto model = giwt::make_model<float>(kind, dims_for(cfg, ld.manifest.sensing), cfg.train.seed);
  const auto res = train::train_model(*model, ld.data.samples, ld.data.split, cfg.train, [](const train::EpochStats& e) {
    std::printf("epoch %d loss %.4f train %.4f val %.4f\n", e.epoch, e.train_loss, e.train_acc, e.val_acc);
    std::fflush(stdout);
  });
  const std::string name = a.name.empty() ? giwt::to_string(kind) : a.name;
  const fs::path out(g.out);
  fs::create_directories(out);
  nn::save_checkpoint(out / (name + ".ckpt"), model->params());
  train::write_curve_csv(out / (name + "_curve.csv"), res);
  std::ostringstream cfg_text;
  for (const auto& [k, v] : config::dump(cfg)) cfg_text << k << " = " << v << "\n";
  report::write_text(out / (name + "_config.txt"), cfg_text.str());

  std::ostringstream summary;
  summary << "model,split,samples,accuracy\n";
  for (const char* split : {"train", "val", "test"}) {
    const auto& idx = split_of(ld.data, split);
    const double acc = train::dataset_accuracy(*model, ld.data.samples, idx);
    summary << giwt::to_string(kind) << "," << split << "," << idx.size() << "," << fmt6(acc) << "\n";
  }
  report::write_text(out / (name + "_accuracy.csv"), summary.str());
  std::cout << "best epoch " << res.best_epoch << " val " << fmt6(res.best_val_acc) << "\n" << summary.str();
  return kOk;
}

struct EvalDataArgs {
  std::string data;
  std::vector<std::string> checkpoints;
  std::string split = "test";
  double min_acc = -1.0;
};

int cmd_eval_data(const Globals& g, const EvalDataArgs& a) {
  const auto cfg = load_config(g);
  const auto ld = dataset::load_dataset(a.data);
  const auto& idx = split_of(ld.data, a.split);
  std::ostringstream os;
  os << "checkpoint,model,split,samples,accuracy\n";
  bool below = false;
  for (const auto& path : a.checkpoints) {
    auto model = load_model(path, dims_for(cfg, ld.manifest.sensing));
    const double acc = train::dataset_accuracy(*model, ld.data.samples, idx);
    below = below || acc < a.min_acc;
    os << fs::path(path).filename().string() << "," << giwt::to_string(model->kind()) << "," << a.split << ","
       << idx.size() << "," << fmt6(acc) << "\n";
  }
  report::write_text(fs::path(g.out) / "eval_data.csv", os.str());
  std::cout << os.str();
  return below ? kThreshold : kOk;
}

struct SimArgs {
  std::string maps = "C";
  std::string task = "I";
  long episodes = -1;
  std::vector<std::string> policies{"fixed-left", "fixed-right", "random", "expert"};
  std::vector<std::string> checkpoints;  // name=path
  double min_sr = -1.0;
  bool decisions = false;
  long episode = 0;  // plot only
};

struct PolicySet {
  std::vector<std::string> names;
  std::vector<eval::PolicyFactory> factories;
  std::vector<std::unique_ptr<giwt::DirectionModel<float>>> models;
  std::vector<std::unique_ptr<std::mutex>> locks;
};

PolicySet make_policies(const Globals& g, const config::AppConfig& cfg, const SimArgs& a) {
  PolicySet set;
  for (const auto& p : a.policies) {
    if (p == "fixed-left") set.factories.push_back(eval::fixed_policy(planner::Turn::Left));
    else if (p == "fixed-right") set.factories.push_back(eval::fixed_policy(planner::Turn::Right));
    else if (p == "random") set.factories.push_back(eval::random_policy(mix_seed(g.seed, 0x72616e64)));
    else if (p == "expert") set.factories.push_back(eval::expert_policy());
    else throw config::ConfigError("unknown policy '" + p + "'");
    set.names.push_back(p);
  }
  for (const auto& spec : a.checkpoints) {
    const auto eq = spec.find('=');
    if (eq == std::string::npos || eq == 0) throw config::ConfigError("--checkpoint expects name=path, got '" + spec + "'");
    set.models.push_back(load_model(spec.substr(eq + 1), cfg.model_dims()));
    set.locks.push_back(std::make_unique<std::mutex>());
    set.factories.push_back(eval::network_policy(*set.models.back(), *set.locks.back()));
    set.names.push_back(spec.substr(0, eq));
  }
  if (set.names.empty()) throw config::ConfigError("no policies selected");
  return set;
}

int cmd_eval_sim(const Globals& g, const SimArgs& a) {
  auto cfg = load_config(g);
  if (a.episodes >= 0) cfg.eval.episodes = static_cast<std::size_t>(a.episodes);
  const auto kinds = parse_maps(a.maps);
  const auto task = world::task_kind_from_string(a.task);
  const auto episodes = eval::make_episodes(g.seed, kinds, task, cfg.eval, cfg.generation);
  auto set = make_policies(g, cfg, a);

  std::vector<eval::PolicyEvaluation> runs;
  for (std::size_t p = 0; p < set.names.size(); ++p) {
    runs.push_back(eval::evaluate_policy(set.names[p], set.factories[p], episodes, cfg.planner, cfg.sensing,
                                         cfg.generation, cfg.eval));
    const auto& m = runs.back().metrics;
    std::cout << set.names[p] << ": sr " << fmt6(m.sr) << " apl " << fmt6(m.apl) << " acc " << fmt6(m.acc)
              << " violations " << m.violations << "\n";
  }
  eval::fill_flowtime(runs, cfg.eval);
  const fs::path out(g.out);
  report::write_text(out / "metrics.csv", report::metrics_csv(runs));
  report::write_text(out / "ft_histogram.csv", report::histogram_csv(runs));
  if (a.decisions) {
    std::ostringstream os;
    os << "policy,episode,step,robot,advice,expert\n";
    for (const auto& r : runs)
      for (std::size_t k = 0; k < r.decisions.size(); ++k) {
        const auto& d = r.decisions[k];
        os << r.policy << "," << r.decision_episode[k] << "," << d.step << "," << d.robot << ","
           << planner::to_string(d.advice) << "," << (d.expert ? planner::to_string(*d.expert) : "discard") << "\n";
      }
    report::write_text(out / "decisions.csv", os.str());
  }
  bool below = false;
  for (const auto& r : runs) below = below || r.metrics.sr < a.min_sr;
  return below ? kThreshold : kOk;
}

int cmd_plot(const Globals& g, const SimArgs& a) {
  auto cfg = load_config(g);
  if (a.episode < 0) throw config::ConfigError("--episode must be non-negative");
  cfg.eval.episodes = static_cast<std::size_t>(a.episode) + 1;
  const auto kinds = parse_maps(a.maps);
  const auto task = world::task_kind_from_string(a.task);
  const auto all = eval::make_episodes(g.seed, kinds, task, cfg.eval, cfg.generation);
  const std::span<const eval::EpisodeSpec> one(&all.back(), 1);
  auto set = make_policies(g, cfg, a);
  const fs::path out(g.out);
  const std::string ep = "ep" + std::to_string(a.episode);
  for (std::size_t p = 0; p < set.names.size(); ++p) {
    const auto run = eval::evaluate_policy(set.names[p], set.factories[p], one, cfg.planner, cfg.sensing,
                                           cfg.generation, cfg.eval, true);
    const auto& log = run.logs.at(0);
    const std::string stem = set.names[p] + "_" + ep;
    report::write_text(out / (stem + ".svg"), report::trajectory_svg(one[0], log));
    report::write_text(out / (stem + "_decisions.csv"), report::decision_csv(log));
    for (std::size_t i = 0; i < one[0].moving.size(); ++i)
      if (one[0].moving[i])
        report::write_text(out / (stem + "_robot" + std::to_string(i) + ".csv"), report::trajectory_csv(log, i));
    std::cout << stem << ".svg\n";
  }
  return kOk;
}

struct EmbedArgs {
  std::string data;
  std::string checkpoint;
  std::string split = "test";
};

int cmd_export_embeddings(const Globals& g, const EmbedArgs& a) {
  const auto cfg = load_config(g);
  const auto ld = dataset::load_dataset(a.data);
  auto model = load_model(a.checkpoint, dims_for(cfg, ld.manifest.sensing));
  const fs::path path = fs::path(g.out) / ("embeddings_" + a.split + ".csv");
  fs::create_directories(g.out);
  train::export_embeddings(path, *model, ld.data.samples, split_of(ld.data, a.split));
  std::cout << path.string() << "\n";
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Collaborative navigation: data generation, training and evaluation"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--config", g.config_file, "key = value config file")->check(CLI::ExistingFile);
  auto* seed_opt = app.add_option("--seed", g.seed, "Base seed");
  app.add_option("--out", g.out, "Output directory")->capture_default_str();
  app.add_option("--set", g.overrides, "Config override key=value (repeatable)");

  GenMapArgs gm;
  auto* gen_map = app.add_subcommand("gen-map", "Generate maps (text + SVG)");
  gen_map->add_option("--kind", gm.kind, "A, B or C")->capture_default_str();
  gen_map->add_option("--count", gm.count, "Number of maps")->check(CLI::PositiveNumber)->capture_default_str();

  GenDataArgs gd;
  auto* gen_data = app.add_subcommand("gen-data", "Generate an A*-labeled key-point dataset");
  gen_data->add_option("--map", gd.map, "A, B or C")->capture_default_str();
  gen_data->add_option("--task", gd.task, "I or II")->capture_default_str();
  gen_data->add_option("--scenes", gd.scenes, "Scene count (default generation.scenes)");
  gen_data->add_option("--workers", gd.workers, "Worker threads")->capture_default_str();

  TrainArgs ta;
  auto* train_cmd = app.add_subcommand("train", "Train GIWT or the CNN-only baseline");
  train_cmd->add_option("--data", ta.data, "Dataset manifest (.json)")->required();
  train_cmd->add_option("--model", ta.model, "giwt or cnn")->capture_default_str();
  train_cmd->add_option("--name", ta.name, "Output stem (default: model kind)");

  EvalDataArgs ed;
  auto* eval_data = app.add_subcommand("eval-data", "Accuracy of checkpoints on a dataset split");
  eval_data->add_option("--data", ed.data, "Dataset manifest (.json)")->required();
  eval_data->add_option("--checkpoint", ed.checkpoints, "Checkpoint file (repeatable)")->required();
  eval_data->add_option("--split", ed.split, "train, val or test")->capture_default_str();
  eval_data->add_option("--min-acc", ed.min_acc, "Exit 3 if any accuracy is below this");

  SimArgs sa;
  auto sim_options = [&sa](CLI::App* c) {
    c->add_option("--maps", sa.maps, "Map kinds, cycled per episode (e.g. ABC)")->capture_default_str();
    c->add_option("--task", sa.task, "I or II")->capture_default_str();
    c->add_option("--policy", sa.policies, "fixed-left, fixed-right, random, expert (repeatable)");
    c->add_option("--checkpoint", sa.checkpoints, "Network policy name=path (repeatable)");
  };
  auto* eval_sim = app.add_subcommand("eval-sim", "Closed-loop evaluation (Acc, APL, SR, FT)");
  sim_options(eval_sim);
  eval_sim->add_option("--episodes", sa.episodes, "Episode count (default eval.episodes)");
  eval_sim->add_option("--min-sr", sa.min_sr, "Exit 3 if any policy's SR is below this");
  eval_sim->add_flag("--decisions", sa.decisions, "Also write decisions.csv");

  auto* plot = app.add_subcommand("plot", "Trajectory SVG and CSVs for one episode");
  sim_options(plot);
  plot->add_option("--episode", sa.episode, "Episode index")->capture_default_str();

  EmbedArgs ea;
  auto* embed = app.add_subcommand("export-embeddings", "Fused features h per sample as CSV");
  embed->add_option("--data", ea.data, "Dataset manifest (.json)")->required();
  embed->add_option("--checkpoint", ea.checkpoint, "Checkpoint file")->required();
  embed->add_option("--split", ea.split, "train, val or test")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kUsage;
  }

  try {
    if (*gen_map) return cmd_gen_map(g, gm);
    if (*gen_data) return cmd_gen_data(g, gd);
    if (*train_cmd) return cmd_train(g, ta, seed_opt->count() > 0);
    if (*eval_data) return cmd_eval_data(g, ed);
    if (*eval_sim) return cmd_eval_sim(g, sa);
    if (*plot) return cmd_plot(g, sa);
    if (*embed) return cmd_export_embeddings(g, ea);
  } catch (const config::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const FormatError& e) {
    std::cerr << "format error: " << e.what() << "\n";
    return kData;
  } catch (const IoError& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return kData;
  } catch (const EmptyDataset& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kData;
  } catch (const ShapeMismatch& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kData;
  } catch (const PlacementFailed& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kData;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  }
  return kUsage;
}

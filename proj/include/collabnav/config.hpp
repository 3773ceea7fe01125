#pragma once

#include <collabnav/error.hpp>
#include <collabnav/eval.hpp>
#include <collabnav/expert.hpp>
#include <collabnav/giwt.hpp>
#include <collabnav/planner.hpp>
#include <collabnav/sensing.hpp>
#include <collabnav/train.hpp>

#include <filesystem>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

namespace collabnav::config {

class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Every tunable, addressable as `<section>.<field>` (e.g. planner.v_max,
/// generation.map.count_max, model.channels = 16,32,64).
struct AppConfig {
  sensing::SensingConfig sensing;
  planner::PlannerConfig planner;
  expert::GenerationConfig generation;
  giwt::GiwtDims model;  // map_size and r_fov follow the sensing section
  train::TrainConfig train;
  eval::EvalConfig eval;

  /// Model dimensions with map_size and r_fov taken from `sensing`.
  giwt::GiwtDims model_dims() const;
  void validate() const;
};

using KeyValues = std::vector<std::pair<std::string, std::string>>;

/// `key = value` lines; blank lines and `#` comments are skipped. Throws
/// ConfigError naming the line.
KeyValues parse(std::istream& is);

/// Throws ConfigError on an unknown key or unparsable value.
void apply(AppConfig& cfg, const std::string& key, const std::string& value);
void apply(AppConfig& cfg, const KeyValues& kv);

/// Reads and applies a config file. Throws IoError, ConfigError.
void load_file(AppConfig& cfg, const std::filesystem::path& path);

/// All keys with their current values, in a fixed order.
KeyValues dump(const AppConfig& cfg);

}  // namespace collabnav::config

#include <collabnav/binio.hpp>
#include <collabnav/config.hpp>
#include <collabnav/dataset_io.hpp>
#include <collabnav/error.hpp>

#include <json.hpp>

#include <cstring>
#include <fstream>
#include <sstream>

namespace collabnav::dataset {

using Kind = FormatError::Kind;

void write_samples(std::ostream& os, const sensing::SensingConfig& sensing, std::span<const ExpertSample> samples,
                   std::vector<std::uint64_t>* offsets) {
  const auto cells = static_cast<std::size_t>(sensing.local_map_cells) * sensing.local_map_cells;
  std::uint64_t pos = 0;
  auto bytes = [&](const void* p, std::size_t n) {
    binio::put_bytes(os, p, n);
    pos += n;
  };
  auto value = [&](auto v) { bytes(&v, sizeof v); };

  bytes(kDataMagic, sizeof kDataMagic);
  value(kDataVersion);
  value(sensing.r_fov);
  value(sensing.r_com);
  value(static_cast<std::uint32_t>(sensing.n_beams));
  value(static_cast<std::uint32_t>(sensing.local_map_cells));
  value(sensing.local_resolution);

  if (offsets) offsets->clear();
  for (const auto& s : samples) {
    if (s.center.size() != cells) throw ShapeMismatch("write_samples: center map has the wrong size");
    if (s.neighbors.size() > 255) throw ShapeMismatch("write_samples: more than 255 neighbors");
    if (offsets) offsets->push_back(pos);
    value(s.label);
    value(static_cast<std::uint8_t>(s.neighbors.size()));
    bytes(s.center.data(), cells);
    for (const auto& n : s.neighbors) {
      if (n.map.size() != cells) throw ShapeMismatch("write_samples: neighbor map has the wrong size");
      value(n.r);
      value(n.theta);
      value(n.cell_id);
      bytes(n.map.data(), cells);
    }
  }
}

SampleStream read_samples(std::istream& is) {
  char magic[8];
  if (!binio::get_bytes(is, magic, sizeof magic) || std::memcmp(magic, kDataMagic, sizeof magic) != 0) {
    throw FormatError(Kind::BadMagic, "dataset: bad magic");
  }
  std::uint16_t version = 0;
  if (!binio::get(is, version)) throw FormatError(Kind::TruncatedRecord, "dataset: truncated header");
  if (version != kDataVersion) {
    throw FormatError(Kind::VersionMismatch, "dataset: version " + std::to_string(version) + " is not supported");
  }
  SampleStream out;
  std::uint32_t beams = 0, cells_side = 0;
  if (!binio::get(is, out.sensing.r_fov) || !binio::get(is, out.sensing.r_com) || !binio::get(is, beams) ||
      !binio::get(is, cells_side) || !binio::get(is, out.sensing.local_resolution)) {
    throw FormatError(Kind::TruncatedRecord, "dataset: truncated sensing block");
  }
  out.sensing.n_beams = static_cast<int>(beams);
  out.sensing.local_map_cells = static_cast<int>(cells_side);
  try {
    out.sensing.validate();
  } catch (const Error& e) {
    throw FormatError(Kind::Malformed, std::string("dataset: invalid sensing block: ") + e.what());
  }
  const auto cells = static_cast<std::size_t>(cells_side) * cells_side;

  for (std::size_t r = 0;; ++r) {
    std::uint8_t label = 0;
    if (!binio::get(is, label)) {
      if (is.gcount() == 0) break;
      throw FormatError(Kind::TruncatedRecord, "dataset: record " + std::to_string(r) + " is truncated", r);
    }
    auto truncated = [r] {
      return FormatError(Kind::TruncatedRecord, "dataset: record " + std::to_string(r) + " is truncated", r);
    };
    if (label > 1) throw FormatError(Kind::Malformed, "dataset: record " + std::to_string(r) + " has label > 1", r);
    ExpertSample s;
    s.label = label;
    std::uint8_t n = 0;
    if (!binio::get(is, n)) throw truncated();
    s.center.resize(cells);
    if (!binio::get_bytes(is, s.center.data(), cells)) throw truncated();
    s.neighbors.resize(n);
    for (auto& nb : s.neighbors) {
      if (!binio::get(is, nb.r) || !binio::get(is, nb.theta) || !binio::get(is, nb.cell_id)) throw truncated();
      nb.map.resize(cells);
      if (!binio::get_bytes(is, nb.map.data(), cells)) throw truncated();
    }
    out.samples.push_back(std::move(s));
  }
  return out;
}

std::string dataset_stem(world::MapKind map_kind, world::TaskKind task_kind) {
  return std::string("data_") + world::to_char(map_kind) + "_" + world::to_string(task_kind);
}

namespace {

nlohmann::ordered_json config_block(const config::AppConfig& cfg) {
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  for (const auto& [key, value] : config::dump(cfg)) {
    if (key.starts_with("sensing.") || key.starts_with("planner.") || key.starts_with("generation.")) j[key] = value;
  }
  return j;
}

}  // namespace

std::filesystem::path save_dataset(const std::filesystem::path& dir, const std::string& stem,
                                   const expert::Dataset& ds, const sensing::SensingConfig& sensing,
                                   const planner::PlannerConfig& planner, const expert::GenerationConfig& gen) {
  std::filesystem::create_directories(dir);
  const auto data_path = dir / (stem + ".bin");
  const auto manifest_path = dir / (stem + ".json");
  std::vector<std::uint64_t> offsets;
  {
    std::ofstream os(data_path, std::ios::binary);
    if (!os) throw IoError("cannot write " + data_path.string());
    write_samples(os, sensing, ds.samples, &offsets);
    if (!os) throw IoError("write failed for " + data_path.string());
  }

  config::AppConfig cfg;
  cfg.sensing = sensing;
  cfg.planner = planner;
  cfg.generation = gen;
  nlohmann::ordered_json j;
  j["format"] = "collabnav-dataset";
  j["version"] = kDataVersion;
  j["data_file"] = data_path.filename().string();
  j["map_kind"] = std::string(1, world::to_char(ds.map_kind));
  j["task_kind"] = world::to_string(ds.task_kind);
  j["config"] = config_block(cfg);
  j["seeds"] = ds.seeds;
  j["failed_placements"] = ds.failed_placements;
  j["sample_count"] = ds.samples.size();
  std::size_t left = 0;
  for (const auto& s : ds.samples) left += s.label == 0;
  j["label_counts"] = {{"left", left}, {"right", ds.samples.size() - left}};
  j["split"] = {{"train", ds.split.train}, {"test", ds.split.test}, {"val", ds.split.val}};
  auto samples = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < ds.samples.size(); ++i) {
    samples.push_back({offsets[i], ds.samples[i].meta.world_seed, ds.samples[i].meta.robot});
  }
  j["samples"] = std::move(samples);  // [offset, world seed, robot]

  std::ofstream os(manifest_path);
  if (!os) throw IoError("cannot write " + manifest_path.string());
  os << j.dump(1) << "\n";
  if (!os) throw IoError("write failed for " + manifest_path.string());
  return manifest_path;
}

LoadedDataset load_dataset(const std::filesystem::path& manifest_path) {
  std::ifstream ms(manifest_path);
  if (!ms) throw IoError("cannot read " + manifest_path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(ms);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(Kind::Malformed, "manifest: " + std::string(e.what()));
  }

  LoadedDataset out;
  Manifest& m = out.manifest;
  try {
    if (j.at("format").get<std::string>() != "collabnav-dataset") throw FormatError(Kind::BadMagic, "manifest: wrong format tag");
    m.version = j.at("version").get<int>();
    if (m.version != kDataVersion) {
      throw FormatError(Kind::VersionMismatch, "manifest: version " + std::to_string(m.version) + " is not supported");
    }
    m.data_file = j.at("data_file").get<std::string>();
    m.map_kind = world::map_kind_from_char(j.at("map_kind").get<std::string>().at(0));
    m.task_kind = world::task_kind_from_string(j.at("task_kind").get<std::string>());
    config::AppConfig cfg;
    for (const auto& [key, value] : j.at("config").items()) config::apply(cfg, key, value.get<std::string>());
    m.sensing = cfg.sensing;
    m.planner = cfg.planner;
    m.generation = cfg.generation;
    m.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
    m.failed_placements = j.at("failed_placements").get<std::size_t>();
    m.sample_count = j.at("sample_count").get<std::size_t>();
    m.split.train = j.at("split").at("train").get<std::vector<std::uint32_t>>();
    m.split.test = j.at("split").at("test").get<std::vector<std::uint32_t>>();
    m.split.val = j.at("split").at("val").get<std::vector<std::uint32_t>>();
    for (const auto& row : j.at("samples")) {
      m.offsets.push_back(row.at(0).get<std::uint64_t>());
      m.meta.push_back({row.at(1).get<std::uint64_t>(), row.at(2).get<std::uint32_t>()});
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(Kind::Malformed, "manifest: " + std::string(e.what()));
  } catch (const FormatError&) {
    throw;
  } catch (const Error& e) {
    throw FormatError(Kind::Malformed, "manifest: " + std::string(e.what()));
  }

  const auto data_path = manifest_path.parent_path() / m.data_file;
  std::ifstream ds(data_path, std::ios::binary);
  if (!ds) throw IoError("cannot read " + data_path.string());
  auto stream = read_samples(ds);
  if (stream.samples.size() != m.sample_count || m.meta.size() != m.sample_count) {
    throw FormatError(Kind::Malformed, "manifest lists " + std::to_string(m.sample_count) + " samples, data file has " +
                                           std::to_string(stream.samples.size()));
  }
  if (stream.sensing.local_map_cells != m.sensing.local_map_cells) {
    throw FormatError(Kind::Malformed, "manifest and data file disagree on the local map size");
  }
  const std::size_t listed = m.split.train.size() + m.split.test.size() + m.split.val.size();
  if (listed != m.sample_count) throw FormatError(Kind::Malformed, "manifest splits do not cover every sample");
  for (const auto* v : {&m.split.train, &m.split.test, &m.split.val})
    for (auto i : *v)
      if (i >= m.sample_count) throw FormatError(Kind::Malformed, "manifest split index out of range");

  out.data.map_kind = m.map_kind;
  out.data.task_kind = m.task_kind;
  out.data.seeds = m.seeds;
  out.data.failed_placements = m.failed_placements;
  out.data.split = m.split;
  out.data.samples = std::move(stream.samples);
  for (std::size_t i = 0; i < m.sample_count; ++i) out.data.samples[i].meta = m.meta[i];
  return out;
}

}  // namespace collabnav::dataset

#pragma once

#include <collabnav/expert.hpp>
#include <collabnav/planner.hpp>
#include <collabnav/sample.hpp>
#include <collabnav/sensing.hpp>

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <vector>

namespace collabnav::dataset {

inline constexpr char kDataMagic[8] = {'G', 'I', 'W', 'T', 'D', 'A', 'T', 'A'};
inline constexpr std::uint16_t kDataVersion = 1;

/// Writes the sample stream; byte offsets of each record go to `offsets` if given.
void write_samples(std::ostream& os, const sensing::SensingConfig& sensing, std::span<const ExpertSample> samples,
                   std::vector<std::uint64_t>* offsets = nullptr);

struct SampleStream {
  sensing::SensingConfig sensing;
  std::vector<ExpertSample> samples;  // meta is not part of the stream
};

/// Throws FormatError: BadMagic, VersionMismatch, TruncatedRecord (with the
/// record index) or Malformed.
SampleStream read_samples(std::istream& is);

struct Manifest {
  int version = kDataVersion;
  std::string data_file;  // relative to the manifest
  sensing::SensingConfig sensing;
  planner::PlannerConfig planner;
  expert::GenerationConfig generation;
  world::MapKind map_kind = world::MapKind::A;
  world::TaskKind task_kind = world::TaskKind::I;
  std::vector<std::uint64_t> seeds;
  std::size_t failed_placements = 0;
  std::size_t sample_count = 0;
  expert::Split split;
  std::vector<std::uint64_t> offsets;
  std::vector<SampleMeta> meta;
};

struct LoadedDataset {
  Manifest manifest;
  expert::Dataset data;
};

/// Writes `<dir>/<stem>.bin` and `<dir>/<stem>.json`; returns the manifest path.
std::filesystem::path save_dataset(const std::filesystem::path& dir, const std::string& stem,
                                   const expert::Dataset& ds, const sensing::SensingConfig& sensing,
                                   const planner::PlannerConfig& planner, const expert::GenerationConfig& gen);

/// Reads a manifest and its sample file; restores meta and splits. Throws
/// IoError, FormatError.
LoadedDataset load_dataset(const std::filesystem::path& manifest_path);

/// Conventional stem for a (map, task) combination, e.g. "data_C_I".
std::string dataset_stem(world::MapKind map_kind, world::TaskKind task_kind);

}  // namespace collabnav::dataset

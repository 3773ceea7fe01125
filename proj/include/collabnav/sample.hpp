#pragma once

#include <cstdint>
#include <vector>

namespace collabnav {

/// A teammate within communication range, in the center robot's goal-aligned frame.
struct NeighborObs {
  float r = 0.0f;
  float theta = 0.0f;
  std::uint8_t cell_id = 0;
  std::vector<std::uint8_t> map;  // local_map_cells^2 bytes, 1 = occupied

  friend bool operator==(const NeighborObs&, const NeighborObs&) = default;
};

struct SampleMeta {
  std::uint64_t world_seed = 0;
  std::uint32_t robot = 0;

  friend bool operator==(const SampleMeta&, const SampleMeta&) = default;
};

/// One key-point scene: the center robot's map, its neighbors and the expert
/// turning direction (0 = left, 1 = right).
struct ExpertSample {
  std::uint8_t label = 0;
  std::vector<std::uint8_t> center;
  std::vector<NeighborObs> neighbors;
  SampleMeta meta;

  friend bool operator==(const ExpertSample&, const ExpertSample&) = default;
};

/// Reflects the scene across the goal axis: map rows flip, bearings and the
/// label swap sides, grid cells move to the mirrored row.
ExpertSample mirror(const ExpertSample& sample, int map_size);

}  // namespace collabnav

#pragma once

#include <collabnav/nn/tensor.hpp>

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>

namespace collabnav::nn {

inline constexpr char kCheckpointMagic[8] = {'G', 'I', 'W', 'T', 'C', 'K', 'P', 'T'};
inline constexpr std::uint16_t kCheckpointVersion = 1;

using TensorMap = std::map<std::string, Tensor<float>>;

/// Every entry of the store (buffers included), in name order, as f32.
template <typename T>
void write_checkpoint(std::ostream& os, const ParamStore<T>& store);

/// Throws FormatError (BadMagic, VersionMismatch, TruncatedRecord with the
/// parameter index, Malformed).
TensorMap read_checkpoint(std::istream& is);

template <typename T>
void save_checkpoint(const std::filesystem::path& path, const ParamStore<T>& store);
TensorMap load_checkpoint(const std::filesystem::path& path);

/// Copies values into an existing store; names and shapes must match exactly.
template <typename T>
void assign_parameters(ParamStore<T>& store, const TensorMap& tensors);

}  // namespace collabnav::nn

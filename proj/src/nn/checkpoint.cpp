#include <collabnav/binio.hpp>
#include <collabnav/error.hpp>
#include <collabnav/nn/checkpoint.hpp>

#include <fstream>

namespace collabnav::nn {

template <typename T>
void write_checkpoint(std::ostream& os, const ParamStore<T>& store) {
  binio::put_bytes(os, kCheckpointMagic, sizeof kCheckpointMagic);
  binio::put<std::uint16_t>(os, kCheckpointVersion);
  binio::put<std::uint32_t>(os, static_cast<std::uint32_t>(store.entries().size()));
  for (const auto& [name, p] : store.entries()) {
    binio::put<std::uint16_t>(os, static_cast<std::uint16_t>(name.size()));
    binio::put_bytes(os, name.data(), name.size());
    binio::put<std::uint8_t>(os, static_cast<std::uint8_t>(p.value.rank()));
    for (int d : p.value.shape()) binio::put<std::uint32_t>(os, static_cast<std::uint32_t>(d));
    for (std::size_t i = 0; i < p.value.size(); ++i) binio::put<float>(os, static_cast<float>(p.value[i]));
  }
}

TensorMap read_checkpoint(std::istream& is) {
  using K = FormatError::Kind;
  char magic[8];
  if (!binio::get_bytes(is, magic, sizeof magic) || std::memcmp(magic, kCheckpointMagic, sizeof magic) != 0) {
    throw FormatError(K::BadMagic, "checkpoint: bad magic");
  }
  std::uint16_t version = 0;
  if (!binio::get(is, version)) throw FormatError(K::TruncatedRecord, "checkpoint: truncated header");
  if (version != kCheckpointVersion) {
    throw FormatError(K::VersionMismatch, "checkpoint: version " + std::to_string(version) + " is not supported");
  }
  std::uint32_t count = 0;
  if (!binio::get(is, count)) throw FormatError(K::TruncatedRecord, "checkpoint: truncated header");

  TensorMap out;
  for (std::uint32_t r = 0; r < count; ++r) {
    auto truncated = [&] {
      return FormatError(K::TruncatedRecord, "checkpoint: parameter record " + std::to_string(r) + " is truncated", r);
    };
    std::uint16_t len = 0;
    if (!binio::get(is, len)) throw truncated();
    std::string name(len, '\0');
    if (!binio::get_bytes(is, name.data(), len)) throw truncated();
    std::uint8_t rank = 0;
    if (!binio::get(is, rank)) throw truncated();
    if (rank > 8) throw FormatError(K::Malformed, "checkpoint: rank too large for '" + name + "'", r);
    Shape shape(rank);
    std::uint64_t n = 1;
    for (auto& d : shape) {
      std::uint32_t v = 0;
      if (!binio::get(is, v)) throw truncated();
      d = static_cast<int>(v);
      n *= v;
    }
    if (n > (1ULL << 31)) throw FormatError(K::Malformed, "checkpoint: tensor too large for '" + name + "'", r);
    Tensor<float> t(shape);
    if (!binio::get_bytes(is, t.data(), t.size() * sizeof(float))) throw truncated();
    if (!out.emplace(name, std::move(t)).second) throw FormatError(K::Malformed, "checkpoint: duplicate '" + name + "'", r);
  }
  return out;
}

template <typename T>
void save_checkpoint(const std::filesystem::path& path, const ParamStore<T>& store) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot write " + path.string());
  write_checkpoint(os, store);
  if (!os) throw IoError("write failed for " + path.string());
}

TensorMap load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot read " + path.string());
  return read_checkpoint(is);
}

template <typename T>
void assign_parameters(ParamStore<T>& store, const TensorMap& tensors) {
  if (tensors.size() != store.entries().size()) {
    throw ShapeMismatch("checkpoint has " + std::to_string(tensors.size()) + " tensors, model expects " +
                        std::to_string(store.entries().size()));
  }
  for (auto& [name, p] : store.entries()) {
    auto it = tensors.find(name);
    if (it == tensors.end()) throw ShapeMismatch("checkpoint is missing '" + name + "'");
    if (it->second.shape() != p.value.shape()) {
      throw ShapeMismatch("'" + name + "' has shape " + to_string(it->second.shape()) + ", expected " +
                          to_string(p.value.shape()));
    }
    p.value = tensor_cast<T>(it->second);
  }
}

template void write_checkpoint(std::ostream&, const ParamStore<float>&);
template void write_checkpoint(std::ostream&, const ParamStore<double>&);
template void save_checkpoint(const std::filesystem::path&, const ParamStore<float>&);
template void save_checkpoint(const std::filesystem::path&, const ParamStore<double>&);
template void assign_parameters(ParamStore<float>&, const TensorMap&);
template void assign_parameters(ParamStore<double>&, const TensorMap&);

}  // namespace collabnav::nn

#pragma once

#include <collabnav/nn/layers.hpp>
#include <collabnav/nn/tensor.hpp>
#include <collabnav/sample.hpp>

#include <array>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace collabnav::giwt {

enum class BetaMode { Exact, Taylor };

/// Information gain weight of a neighbor at distance r; q = min(r / r_fov, 1).
double info_gain_weight(double r, double r_fov, BetaMode mode);

enum class ModelKind { Giwt, Cnn };

std::string to_string(ModelKind kind);
ModelKind model_kind_from_string(const std::string& s);

struct GiwtDims {
  int map_size = 101;
  std::array<int, 3> channels{16, 32, 64};
  int feature = 128;        // encoder output F
  int fused = 128;          // F'
  int mlp_hidden = 16;
  int grid_cells = 49;
  int self_cell = 24;
  double leaky_slope = 0.2;
  double r_fov = 2.5;
  BetaMode beta = BetaMode::Taylor;

  /// Spatial side after the three pooling stages.
  int encoded_side() const { return ((map_size / 2) / 2) / 2; }
  void validate() const;
};

/// Mini-VGG: three blocks of (conv-bn-relu-maxpool, conv-bn-relu), flatten,
/// linear to F. Input [N, 1, S, S].
template <typename T>
class Encoder {
 public:
  Encoder(nn::ParamStore<T>& ps, const GiwtDims& dims);
  nn::Tensor<T> forward(nn::ParamStore<T>& ps, const nn::Tensor<T>& maps, nn::Mode mode);
  nn::Tensor<T> backward(nn::ParamStore<T>& ps, const nn::Tensor<T>& dfeatures);

 private:
  GiwtDims dims_;
  nn::Sequential<T> convs_;
  std::unique_ptr<nn::Linear<T>> fc_;
  nn::Shape conv_out_shape_;
};

/// Left/right classifier over key-point scenes. forward() returns [B, 2]
/// logits and caches what backward() needs; one instance is not meant to be
/// shared between threads.
template <typename T>
class DirectionModel {
 public:
  virtual ~DirectionModel() = default;
  virtual ModelKind kind() const = 0;
  virtual nn::Tensor<T> forward(std::span<const ExpertSample* const> batch, nn::Mode mode) = 0;
  virtual void backward(const nn::Tensor<T>& dlogits) = 0;

  /// [B, F'] fused features h of the last forward (GIWT) or encoder features (CNN).
  const nn::Tensor<T>& last_embedding() const { return embedding_; }

  nn::ParamStore<T>& params() { return ps_; }
  const nn::ParamStore<T>& params() const { return ps_; }
  const GiwtDims& dims() const { return dims_; }

  /// Softmax probabilities (p_left, p_right) in inference mode.
  std::array<double, 2> predict(const ExpertSample& sample);

 protected:
  DirectionModel(const GiwtDims& dims, std::uint64_t seed) : dims_(dims), ps_(seed) { dims_.validate(); }
  nn::Tensor<T> maps_tensor(const std::vector<const std::vector<std::uint8_t>*>& maps) const;

  GiwtDims dims_;
  nn::ParamStore<T> ps_;
  nn::Tensor<T> embedding_;
};

template <typename T>
class GiwtNet final : public DirectionModel<T> {
 public:
  GiwtNet(const GiwtDims& dims, std::uint64_t seed);
  ModelKind kind() const override { return ModelKind::Giwt; }
  nn::Tensor<T> forward(std::span<const ExpertSample* const> batch, nn::Mode mode) override;
  void backward(const nn::Tensor<T>& dlogits) override;

 private:
  struct Graph {
    std::size_t first = 0;  // row of the center node in the stacked node arrays
    std::size_t nodes = 0;  // center + neighbors
    std::vector<T> beta, score, alpha;
  };

  Encoder<T> encoder_;
  nn::Embedding<T> pe_;
  nn::Linear<T> pf_;
  nn::Linear<T> agg_;
  nn::ReLU<T> agg_act_;
  nn::Sequential<T> mlp_;
  std::vector<Graph> graphs_;
  nn::Tensor<T> pf_all_;  // [M, F'] PF of every node
  nn::Tensor<T> pooled_;  // [B, F'] sum_k (alpha + beta) PF_k
};

template <typename T>
class CnnNet final : public DirectionModel<T> {
 public:
  CnnNet(const GiwtDims& dims, std::uint64_t seed);
  ModelKind kind() const override { return ModelKind::Cnn; }
  nn::Tensor<T> forward(std::span<const ExpertSample* const> batch, nn::Mode mode) override;
  void backward(const nn::Tensor<T>& dlogits) override;

 private:
  Encoder<T> encoder_;
  nn::Sequential<T> mlp_;
};

template <typename T>
std::unique_ptr<DirectionModel<T>> make_model(ModelKind kind, const GiwtDims& dims, std::uint64_t seed);

/// Neighbor visiting order used by GiwtNet: ascending (r, theta, map bytes),
/// so the output does not depend on how neighbors are listed.
std::vector<std::size_t> canonical_order(const std::vector<NeighborObs>& neighbors);

struct RestoredShape {
  ModelKind kind = ModelKind::Giwt;
  GiwtDims dims;
};

/// Recovers model kind and layer widths from checkpoint tensor shapes; map
/// size, r_fov, slope and beta mode are taken from `base`. Throws ShapeMismatch
/// when the tensors do not fit `base.map_size`.
RestoredShape infer_shape(const std::map<std::string, nn::Tensor<float>>& tensors, const GiwtDims& base);

}  // namespace collabnav::giwt

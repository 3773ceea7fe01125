#include <collabnav/error.hpp>
#include <collabnav/giwt.hpp>
#include <collabnav/nn/optim.hpp>
#include <collabnav/sensing.hpp>

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <numbers>

namespace collabnav {

ExpertSample mirror(const ExpertSample& sample, int map_size) {
  auto flip = [map_size](const std::vector<std::uint8_t>& map) {
    std::vector<std::uint8_t> out(map.size());
    const auto s = static_cast<std::size_t>(map_size);
    for (std::size_t r = 0; r < s; ++r) std::copy_n(map.begin() + (s - 1 - r) * s, s, out.begin() + r * s);
    return out;
  };
  ExpertSample m;
  m.label = static_cast<std::uint8_t>(1 - sample.label);
  m.meta = sample.meta;
  m.center = flip(sample.center);
  for (const auto& n : sample.neighbors) {
    const int row = n.cell_id / sensing::kGridSide, col = n.cell_id % sensing::kGridSide;
    m.neighbors.push_back({n.r, -n.theta,
                           static_cast<std::uint8_t>(sensing::kGridSide * (sensing::kGridSide - 1 - row) + col),
                           flip(n.map)});
  }
  return m;
}

}  // namespace collabnav

namespace collabnav::giwt {

using nn::Mode;
using nn::Tensor;

double info_gain_weight(double r, double r_fov, BetaMode mode) {
  const double q = std::clamp(r / r_fov, 0.0, 1.0);
  constexpr double pi = std::numbers::pi;
  if (mode == BetaMode::Taylor) return 4.0 * q / pi - 2.0 * q * q * q / (3.0 * pi);
  return 1.0 - 2.0 * std::acos(q) / pi + 2.0 * q * std::sqrt(1.0 - q * q) / pi;
}

std::string to_string(ModelKind kind) { return kind == ModelKind::Giwt ? "giwt" : "cnn"; }

ModelKind model_kind_from_string(const std::string& s) {
  if (s == "giwt") return ModelKind::Giwt;
  if (s == "cnn") return ModelKind::Cnn;
  throw Error("unknown model kind '" + s + "' (expected giwt or cnn)");
}

void GiwtDims::validate() const {
  if (map_size < 8 || encoded_side() < 1) throw ShapeMismatch("giwt: map_size too small");
  for (int c : channels)
    if (c <= 0) throw ShapeMismatch("giwt: channel widths must be positive");
  if (feature <= 0 || fused <= 0 || mlp_hidden <= 0) throw ShapeMismatch("giwt: layer widths must be positive");
  if (self_cell < 0 || self_cell >= grid_cells) throw ShapeMismatch("giwt: self cell outside the grid");
}

// ---------------------------------------------------------------------------

template <typename T>
Encoder<T>::Encoder(nn::ParamStore<T>& ps, const GiwtDims& dims) : dims_(dims) {
  int in = 1;
  for (int b = 0; b < 3; ++b) {
    const int out = dims.channels[static_cast<std::size_t>(b)];
    const std::string a = "encoder.conv" + std::to_string(2 * b + 1);
    const std::string c = "encoder.conv" + std::to_string(2 * b + 2);
    const std::string bn_a = "encoder.bn" + std::to_string(2 * b + 1);
    const std::string bn_c = "encoder.bn" + std::to_string(2 * b + 2);
    convs_.push(std::make_unique<nn::Conv2d<T>>(ps, a, in, out, 3, 1, 1, false));
    convs_.push(std::make_unique<nn::BatchNorm2d<T>>(ps, bn_a, out));
    convs_.push(std::make_unique<nn::ReLU<T>>());
    convs_.push(std::make_unique<nn::MaxPool2d<T>>(2, 2));
    convs_.push(std::make_unique<nn::Conv2d<T>>(ps, c, out, out, 3, 1, 1, false));
    convs_.push(std::make_unique<nn::BatchNorm2d<T>>(ps, bn_c, out));
    convs_.push(std::make_unique<nn::ReLU<T>>());
    in = out;
  }
  const int side = dims.encoded_side();
  fc_ = std::make_unique<nn::Linear<T>>(ps, "encoder.fc", in * side * side, dims.feature);
}

template <typename T>
Tensor<T> Encoder<T>::forward(nn::ParamStore<T>& ps, const Tensor<T>& maps, Mode mode) {
  if (maps.rank() != 4 || maps.dim(1) != 1 || maps.dim(2) != dims_.map_size || maps.dim(3) != dims_.map_size) {
    throw ShapeMismatch("encoder: expected [N, 1, " + std::to_string(dims_.map_size) + ", " +
                        std::to_string(dims_.map_size) + "], got " + nn::to_string(maps.shape()));
  }
  auto x = convs_.forward(ps, maps, mode);
  conv_out_shape_ = x.shape();
  const int n = x.dim(0);
  return fc_->forward(ps, x.reshaped({n, static_cast<int>(x.size() / std::max(n, 1))}), mode);
}

template <typename T>
Tensor<T> Encoder<T>::backward(nn::ParamStore<T>& ps, const Tensor<T>& dfeatures) {
  auto dx = fc_->backward(ps, dfeatures);
  return convs_.backward(ps, dx.reshaped(conv_out_shape_));
}

// ---------------------------------------------------------------------------

template <typename T>
std::array<double, 2> DirectionModel<T>::predict(const ExpertSample& sample) {
  const ExpertSample* one[] = {&sample};
  const auto probs = nn::softmax(forward(one, Mode::Infer));
  return {static_cast<double>(probs[0]), static_cast<double>(probs[1])};
}

template <typename T>
Tensor<T> DirectionModel<T>::maps_tensor(const std::vector<const std::vector<std::uint8_t>*>& maps) const {
  const int s = dims_.map_size;
  const std::size_t cells = static_cast<std::size_t>(s) * s;
  Tensor<T> t({static_cast<int>(maps.size()), 1, s, s});
  for (std::size_t i = 0; i < maps.size(); ++i) {
    if (maps[i]->size() != cells) {
      throw ShapeMismatch("map has " + std::to_string(maps[i]->size()) + " cells, expected " + std::to_string(cells));
    }
    T* dst = t.data() + i * cells;
    for (std::size_t j = 0; j < cells; ++j) dst[j] = (*maps[i])[j] ? T(1) : T(0);
  }
  return t;
}

std::vector<std::size_t> canonical_order(const std::vector<NeighborObs>& neighbors) {
  std::vector<std::size_t> order(neighbors.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const auto& x = neighbors[a];
    const auto& y = neighbors[b];
    if (x.r != y.r) return x.r < y.r;
    if (x.theta != y.theta) return x.theta < y.theta;
    if (x.cell_id != y.cell_id) return x.cell_id < y.cell_id;
    if (x.map != y.map) return x.map < y.map;
    return a < b;
  });
  return order;
}

namespace {

template <typename T>
nn::Sequential<T> make_mlp(nn::ParamStore<T>& ps, int in, int hidden) {
  nn::Sequential<T> mlp;
  mlp.push(std::make_unique<nn::Linear<T>>(ps, "mlp.fc1", in, hidden));
  mlp.push(std::make_unique<nn::ReLU<T>>());
  mlp.push(std::make_unique<nn::Linear<T>>(ps, "mlp.fc2", hidden, 2));
  return mlp;
}

template <typename T>
using RowVec = Eigen::Matrix<T, 1, Eigen::Dynamic>;
template <typename T>
using VecMap = Eigen::Map<RowVec<T>>;
template <typename T>
using CVecMap = Eigen::Map<const RowVec<T>>;

}  // namespace

template <typename T>
GiwtNet<T>::GiwtNet(const GiwtDims& dims, std::uint64_t seed)
    : DirectionModel<T>(dims, seed),
      encoder_(this->ps_, dims),
      pe_(this->ps_, "pe", dims.grid_cells, dims.fused),
      pf_(this->ps_, "pf", dims.feature, dims.fused, false),
      agg_(this->ps_, "agg", dims.fused, dims.fused, false) {
  this->ps_.add("attn.vector", {2 * dims.fused}, nn::Init::HeUniform, 2 * dims.fused);
  mlp_ = make_mlp(this->ps_, dims.fused, dims.mlp_hidden);
}

template <typename T>
Tensor<T> GiwtNet<T>::forward(std::span<const ExpertSample* const> batch, Mode mode) {
  const int fp = this->dims_.fused;
  const T slope = static_cast<T>(this->dims_.leaky_slope);

  std::vector<const std::vector<std::uint8_t>*> maps;
  std::vector<int> cells;
  graphs_.assign(batch.size(), {});
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const ExpertSample& s = *batch[b];
    Graph& g = graphs_[b];
    g.first = maps.size();
    g.nodes = 1 + s.neighbors.size();
    maps.push_back(&s.center);
    cells.push_back(this->dims_.self_cell);
    g.beta.push_back(T(0));
    for (std::size_t k : canonical_order(s.neighbors)) {
      const auto& n = s.neighbors[k];
      maps.push_back(&n.map);
      cells.push_back(n.cell_id);
      g.beta.push_back(static_cast<T>(info_gain_weight(n.r, this->dims_.r_fov, this->dims_.beta)));
    }
  }

  const auto features = encoder_.forward(this->ps_, this->maps_tensor(maps), mode);
  pf_all_ = pf_.forward(this->ps_, features, mode);
  const auto pe = pe_.forward(this->ps_, cells);
  for (std::size_t i = 0; i < pf_all_.size(); ++i) pf_all_[i] += pe[i];

  const T* attn = this->ps_.value("attn.vector").data();
  CVecMap<T> a_center(attn, fp), a_other(attn + fp, fp);
  pooled_ = Tensor<T>({static_cast<int>(batch.size()), fp});
  for (std::size_t b = 0; b < batch.size(); ++b) {
    Graph& g = graphs_[b];
    CVecMap<T> centre(pf_all_.data() + g.first * fp, fp);
    const T base = a_center.dot(centre);
    g.score.resize(g.nodes);
    g.alpha.resize(g.nodes);
    T mx = -std::numeric_limits<T>::infinity();
    for (std::size_t k = 0; k < g.nodes; ++k) {
      CVecMap<T> node(pf_all_.data() + (g.first + k) * fp, fp);
      g.score[k] = base + a_other.dot(node);
      const T e = g.score[k] > T(0) ? g.score[k] : slope * g.score[k];
      g.alpha[k] = e;
      mx = std::max(mx, e);
    }
    T z = 0;
    for (auto& e : g.alpha) z += (e = std::exp(e - mx));
    for (auto& e : g.alpha) e /= z;
    VecMap<T> out(pooled_.data() + b * fp, fp);
    for (std::size_t k = 0; k < g.nodes; ++k) {
      out += (g.alpha[k] + g.beta[k]) * CVecMap<T>(pf_all_.data() + (g.first + k) * fp, fp);
    }
  }
  nn::check_finite(pooled_, "giwt aggregation");

  this->embedding_ = agg_act_.forward(this->ps_, agg_.forward(this->ps_, pooled_, mode), mode);
  return mlp_.forward(this->ps_, this->embedding_, mode);
}

template <typename T>
void GiwtNet<T>::backward(const Tensor<T>& dlogits) {
  const int fp = this->dims_.fused;
  const T slope = static_cast<T>(this->dims_.leaky_slope);
  const auto dh = mlp_.backward(this->ps_, dlogits);
  const auto dpooled = agg_.backward(this->ps_, agg_act_.backward(this->ps_, dh));

  const T* attn = this->ps_.value("attn.vector").data();
  CVecMap<T> a_center(attn, fp), a_other(attn + fp, fp);
  T* dattn = this->ps_.grad("attn.vector").data();
  VecMap<T> da_center(dattn, fp), da_other(dattn + fp, fp);

  Tensor<T> dpf(pf_all_.shape());
  for (std::size_t b = 0; b < graphs_.size(); ++b) {
    const Graph& g = graphs_[b];
    CVecMap<T> ds(dpooled.data() + b * fp, fp);
    std::vector<T> dalpha(g.nodes);
    T weighted = 0;
    for (std::size_t k = 0; k < g.nodes; ++k) {
      CVecMap<T> node(pf_all_.data() + (g.first + k) * fp, fp);
      VecMap<T>(dpf.data() + (g.first + k) * fp, fp) += (g.alpha[k] + g.beta[k]) * ds;
      dalpha[k] = ds.dot(node);
      weighted += g.alpha[k] * dalpha[k];
    }
    CVecMap<T> centre(pf_all_.data() + g.first * fp, fp);
    T dbase = 0;
    for (std::size_t k = 0; k < g.nodes; ++k) {
      const T de = g.alpha[k] * (dalpha[k] - weighted);
      const T du = g.score[k] > T(0) ? de : slope * de;
      dbase += du;
      CVecMap<T> node(pf_all_.data() + (g.first + k) * fp, fp);
      da_other += du * node;
      VecMap<T>(dpf.data() + (g.first + k) * fp, fp) += du * a_other;
    }
    da_center += dbase * centre;
    VecMap<T>(dpf.data() + g.first * fp, fp) += dbase * a_center;
  }
  nn::check_finite(dpf, "giwt attention backward");

  pe_.backward(this->ps_, dpf);
  encoder_.backward(this->ps_, pf_.backward(this->ps_, dpf));
}

template <typename T>
CnnNet<T>::CnnNet(const GiwtDims& dims, std::uint64_t seed)
    : DirectionModel<T>(dims, seed), encoder_(this->ps_, dims) {
  mlp_ = make_mlp(this->ps_, dims.feature, dims.mlp_hidden);
}

template <typename T>
Tensor<T> CnnNet<T>::forward(std::span<const ExpertSample* const> batch, Mode mode) {
  std::vector<const std::vector<std::uint8_t>*> maps;
  for (const auto* s : batch) maps.push_back(&s->center);
  this->embedding_ = encoder_.forward(this->ps_, this->maps_tensor(maps), mode);
  return mlp_.forward(this->ps_, this->embedding_, mode);
}

template <typename T>
void CnnNet<T>::backward(const Tensor<T>& dlogits) {
  encoder_.backward(this->ps_, mlp_.backward(this->ps_, dlogits));
}

template <typename T>
std::unique_ptr<DirectionModel<T>> make_model(ModelKind kind, const GiwtDims& dims, std::uint64_t seed) {
  if (kind == ModelKind::Giwt) return std::make_unique<GiwtNet<T>>(dims, seed);
  return std::make_unique<CnnNet<T>>(dims, seed);
}

RestoredShape infer_shape(const std::map<std::string, nn::Tensor<float>>& tensors, const GiwtDims& base) {
  auto shape_of = [&](const std::string& name) -> const nn::Shape& {
    auto it = tensors.find(name);
    if (it == tensors.end()) throw ShapeMismatch("checkpoint lacks '" + name + "'");
    return it->second.shape();
  };
  RestoredShape out;
  out.kind = tensors.count("pe.table") ? ModelKind::Giwt : ModelKind::Cnn;
  out.dims = base;
  for (int b = 0; b < 3; ++b) {
    out.dims.channels[static_cast<std::size_t>(b)] = shape_of("encoder.conv" + std::to_string(2 * b + 1) + ".weight")[0];
  }
  const auto& fc = shape_of("encoder.fc.weight");
  out.dims.feature = fc[0];
  const int side = out.dims.encoded_side();
  if (fc[1] != out.dims.channels[2] * side * side) {
    throw ShapeMismatch("checkpoint encoder does not match map size " + std::to_string(base.map_size));
  }
  out.dims.mlp_hidden = shape_of("mlp.fc1.weight")[0];
  if (out.kind == ModelKind::Giwt) {
    const auto& pe = shape_of("pe.table");
    out.dims.grid_cells = pe[0];
    out.dims.fused = pe[1];
  } else {
    out.dims.fused = shape_of("mlp.fc1.weight")[1];
  }
  return out;
}

template class Encoder<float>;
template class Encoder<double>;
template class DirectionModel<float>;
template class DirectionModel<double>;
template class GiwtNet<float>;
template class GiwtNet<double>;
template class CnnNet<float>;
template class CnnNet<double>;
template std::unique_ptr<DirectionModel<float>> make_model(ModelKind, const GiwtDims&, std::uint64_t);
template std::unique_ptr<DirectionModel<double>> make_model(ModelKind, const GiwtDims&, std::uint64_t);

}  // namespace collabnav::giwt

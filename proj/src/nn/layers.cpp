#include <collabnav/error.hpp>
#include <collabnav/nn/layers.hpp>

#include <Eigen/Core>

#include <cmath>
#include <memory>

namespace collabnav::nn {

namespace {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MapMat = Eigen::Map<RowMat<T>>;
template <typename T>
using CMapMat = Eigen::Map<const RowMat<T>>;

void expect_rank(const Shape& s, int rank, const std::string& who) {
  if (static_cast<int>(s.size()) != rank) {
    throw ShapeMismatch(who + ": expected rank " + std::to_string(rank) + ", got " + to_string(s));
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// Conv2d

template <typename T>
Conv2d<T>::Conv2d(ParamStore<T>& ps, std::string name, int in_ch, int out_ch, int kernel, int stride, int pad,
                  bool bias)
    : name_(std::move(name)), in_(in_ch), out_(out_ch), k_(kernel), stride_(stride), pad_(pad), bias_(bias) {
  ps.add(name_ + ".weight", {out_, in_, k_, k_}, Init::HeUniform, in_ * k_ * k_);
  if (bias_) ps.add(name_ + ".bias", {out_}, Init::Zeros);
}

template <typename T>
void Conv2d<T>::im2col(const T* image, int h, int w, T* col) const {
  const int hw = ho_ * wo_;
  for (int c = 0; c < in_; ++c) {
    for (int ky = 0; ky < k_; ++ky) {
      for (int kx = 0; kx < k_; ++kx) {
        T* row = col + static_cast<std::size_t>((c * k_ + ky) * k_ + kx) * hw;
        for (int oy = 0; oy < ho_; ++oy) {
          const int iy = oy * stride_ - pad_ + ky;
          T* dst = row + oy * wo_;
          if (iy < 0 || iy >= h) {
            std::fill(dst, dst + wo_, T(0));
            continue;
          }
          const T* src = image + (static_cast<std::size_t>(c) * h + iy) * w;
          for (int ox = 0; ox < wo_; ++ox) {
            const int ix = ox * stride_ - pad_ + kx;
            dst[ox] = (ix >= 0 && ix < w) ? src[ix] : T(0);
          }
        }
      }
    }
  }
}

template <typename T>
void Conv2d<T>::col2im(const T* col, int h, int w, T* image) const {
  const int hw = ho_ * wo_;
  for (int c = 0; c < in_; ++c) {
    for (int ky = 0; ky < k_; ++ky) {
      for (int kx = 0; kx < k_; ++kx) {
        const T* row = col + static_cast<std::size_t>((c * k_ + ky) * k_ + kx) * hw;
        for (int oy = 0; oy < ho_; ++oy) {
          const int iy = oy * stride_ - pad_ + ky;
          if (iy < 0 || iy >= h) continue;
          T* dst = image + (static_cast<std::size_t>(c) * h + iy) * w;
          for (int ox = 0; ox < wo_; ++ox) {
            const int ix = ox * stride_ - pad_ + kx;
            if (ix >= 0 && ix < w) dst[ix] += row[oy * wo_ + ox];
          }
        }
      }
    }
  }
}

template <typename T>
Tensor<T> Conv2d<T>::forward(ParamStore<T>& ps, const Tensor<T>& x, Mode) {
  expect_rank(x.shape(), 4, name_);
  if (x.dim(1) != in_) throw ShapeMismatch(name_ + ": channel mismatch " + to_string(x.shape()));
  const int n = x.dim(0), h = x.dim(2), w = x.dim(3);
  ho_ = (h + 2 * pad_ - k_) / stride_ + 1;
  wo_ = (w + 2 * pad_ - k_) / stride_ + 1;
  if (ho_ <= 0 || wo_ <= 0) throw ShapeMismatch(name_ + ": input too small " + to_string(x.shape()));
  input_ = x;

  const int ckk = in_ * k_ * k_, hw = ho_ * wo_;
  Tensor<T> y({n, out_, ho_, wo_});
  RowMat<T> col(ckk, hw);
  CMapMat<T> weight(ps.value(name_ + ".weight").data(), out_, ckk);
  for (int i = 0; i < n; ++i) {
    im2col(x.data() + static_cast<std::size_t>(i) * in_ * h * w, h, w, col.data());
    MapMat<T> yi(y.data() + static_cast<std::size_t>(i) * out_ * hw, out_, hw);
    yi.noalias() = weight * col;
    if (bias_) {
      const T* b = ps.value(name_ + ".bias").data();
      for (int o = 0; o < out_; ++o) yi.row(o).array() += b[o];
    }
  }
  check_finite(y, name_);
  return y;
}

template <typename T>
Tensor<T> Conv2d<T>::backward(ParamStore<T>& ps, const Tensor<T>& dy) {
  const int n = input_.dim(0), h = input_.dim(2), w = input_.dim(3);
  const int ckk = in_ * k_ * k_, hw = ho_ * wo_;
  if (dy.shape() != Shape{n, out_, ho_, wo_}) throw ShapeMismatch(name_ + ": bad output gradient shape");
  Tensor<T> dx(input_.shape());
  RowMat<T> col(ckk, hw), dcol(ckk, hw);
  CMapMat<T> weight(ps.value(name_ + ".weight").data(), out_, ckk);
  MapMat<T> dweight(ps.grad(name_ + ".weight").data(), out_, ckk);
  for (int i = 0; i < n; ++i) {
    const std::size_t in_off = static_cast<std::size_t>(i) * in_ * h * w;
    CMapMat<T> dyi(dy.data() + static_cast<std::size_t>(i) * out_ * hw, out_, hw);
    im2col(input_.data() + in_off, h, w, col.data());
    dweight.noalias() += dyi * col.transpose();
    dcol.noalias() = weight.transpose() * dyi;
    col2im(dcol.data(), h, w, dx.data() + in_off);
    if (bias_) {
      T* db = ps.grad(name_ + ".bias").data();
      for (int o = 0; o < out_; ++o) db[o] += dyi.row(o).sum();
    }
  }
  check_finite(dx, name_ + " backward");
  return dx;
}

// ---------------------------------------------------------------------------
// BatchNorm2d

template <typename T>
BatchNorm2d<T>::BatchNorm2d(ParamStore<T>& ps, std::string name, int channels, double eps, double momentum)
    : name_(std::move(name)), ch_(channels), eps_(eps), momentum_(momentum) {
  ps.add(name_ + ".gamma", {ch_}, Init::Ones);
  ps.add(name_ + ".beta", {ch_}, Init::Zeros);
  ps.add(name_ + ".running_mean", {ch_}, Init::Zeros, 1, false);
  ps.add(name_ + ".running_var", {ch_}, Init::Ones, 1, false);
}

template <typename T>
Tensor<T> BatchNorm2d<T>::forward(ParamStore<T>& ps, const Tensor<T>& x, Mode mode) {
  expect_rank(x.shape(), 4, name_);
  if (x.dim(1) != ch_) throw ShapeMismatch(name_ + ": channel mismatch " + to_string(x.shape()));
  const int n = x.dim(0);
  const std::size_t hw = static_cast<std::size_t>(x.dim(2)) * x.dim(3);
  const std::size_t m = static_cast<std::size_t>(n) * hw;
  mode_ = mode;
  const T* gamma = ps.value(name_ + ".gamma").data();
  const T* beta = ps.value(name_ + ".beta").data();
  T* rmean = ps.value(name_ + ".running_mean").data();
  T* rvar = ps.value(name_ + ".running_var").data();

  Tensor<T> y(x.shape());
  xhat_ = Tensor<T>(x.shape());
  inv_std_.assign(static_cast<std::size_t>(ch_), T(0));
  for (int c = 0; c < ch_; ++c) {
    T mean, var;
    if (mode == Mode::Train) {
      double s = 0.0;
      for (int i = 0; i < n; ++i) {
        const T* p = x.data() + (static_cast<std::size_t>(i) * ch_ + c) * hw;
        for (std::size_t j = 0; j < hw; ++j) s += p[j];
      }
      const double mu = s / static_cast<double>(m);
      double ss = 0.0;
      for (int i = 0; i < n; ++i) {
        const T* p = x.data() + (static_cast<std::size_t>(i) * ch_ + c) * hw;
        for (std::size_t j = 0; j < hw; ++j) ss += (p[j] - mu) * (p[j] - mu);
      }
      mean = static_cast<T>(mu);
      var = static_cast<T>(ss / static_cast<double>(m));
      const double unbiased = m > 1 ? ss / static_cast<double>(m - 1) : ss;
      rmean[c] = static_cast<T>((1.0 - momentum_) * rmean[c] + momentum_ * mu);
      rvar[c] = static_cast<T>((1.0 - momentum_) * rvar[c] + momentum_ * unbiased);
    } else {
      mean = rmean[c];
      var = rvar[c];
    }
    const T inv = static_cast<T>(1.0 / std::sqrt(static_cast<double>(var) + eps_));
    inv_std_[static_cast<std::size_t>(c)] = inv;
    for (int i = 0; i < n; ++i) {
      const std::size_t off = (static_cast<std::size_t>(i) * ch_ + c) * hw;
      for (std::size_t j = 0; j < hw; ++j) {
        const T xh = (x[off + j] - mean) * inv;
        xhat_[off + j] = xh;
        y[off + j] = gamma[c] * xh + beta[c];
      }
    }
  }
  check_finite(y, name_);
  return y;
}

template <typename T>
Tensor<T> BatchNorm2d<T>::backward(ParamStore<T>& ps, const Tensor<T>& dy) {
  if (dy.shape() != xhat_.shape()) throw ShapeMismatch(name_ + ": bad output gradient shape");
  const int n = dy.dim(0);
  const std::size_t hw = static_cast<std::size_t>(dy.dim(2)) * dy.dim(3);
  const double m = static_cast<double>(n) * static_cast<double>(hw);
  const T* gamma = ps.value(name_ + ".gamma").data();
  T* dgamma = ps.grad(name_ + ".gamma").data();
  T* dbeta = ps.grad(name_ + ".beta").data();
  Tensor<T> dx(dy.shape());
  for (int c = 0; c < ch_; ++c) {
    double sum_dy = 0.0, sum_dy_xh = 0.0;
    for (int i = 0; i < n; ++i) {
      const std::size_t off = (static_cast<std::size_t>(i) * ch_ + c) * hw;
      for (std::size_t j = 0; j < hw; ++j) {
        sum_dy += dy[off + j];
        sum_dy_xh += dy[off + j] * xhat_[off + j];
      }
    }
    dgamma[c] += static_cast<T>(sum_dy_xh);
    dbeta[c] += static_cast<T>(sum_dy);
    const T scale = gamma[c] * inv_std_[static_cast<std::size_t>(c)];
    for (int i = 0; i < n; ++i) {
      const std::size_t off = (static_cast<std::size_t>(i) * ch_ + c) * hw;
      for (std::size_t j = 0; j < hw; ++j) {
        if (mode_ == Mode::Train) {
          dx[off + j] = static_cast<T>(scale * (dy[off + j] - sum_dy / m - xhat_[off + j] * sum_dy_xh / m));
        } else {
          dx[off + j] = scale * dy[off + j];
        }
      }
    }
  }
  check_finite(dx, name_ + " backward");
  return dx;
}

// ---------------------------------------------------------------------------
// Activations and pooling

template <typename T>
Tensor<T> ReLU<T>::forward(ParamStore<T>&, const Tensor<T>& x, Mode) {
  input_ = x;
  Tensor<T> y(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] > T(0) ? x[i] : T(0);
  return y;
}

template <typename T>
Tensor<T> ReLU<T>::backward(ParamStore<T>&, const Tensor<T>& dy) {
  Tensor<T> dx(dy.shape());
  for (std::size_t i = 0; i < dy.size(); ++i) dx[i] = input_[i] > T(0) ? dy[i] : T(0);
  return dx;
}

template <typename T>
Tensor<T> LeakyReLU<T>::forward(ParamStore<T>&, const Tensor<T>& x, Mode) {
  input_ = x;
  Tensor<T> y(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] > T(0) ? x[i] : slope_ * x[i];
  return y;
}

template <typename T>
Tensor<T> LeakyReLU<T>::backward(ParamStore<T>&, const Tensor<T>& dy) {
  Tensor<T> dx(dy.shape());
  for (std::size_t i = 0; i < dy.size(); ++i) dx[i] = input_[i] > T(0) ? dy[i] : slope_ * dy[i];
  return dx;
}

template <typename T>
Tensor<T> MaxPool2d<T>::forward(ParamStore<T>&, const Tensor<T>& x, Mode) {
  expect_rank(x.shape(), 4, "maxpool");
  const int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  const int ho = (h - k_) / stride_ + 1, wo = (w - k_) / stride_ + 1;
  if (ho <= 0 || wo <= 0) throw ShapeMismatch("maxpool: input too small " + to_string(x.shape()));
  in_shape_ = x.shape();
  Tensor<T> y({n, c, ho, wo});
  argmax_.resize(y.size());
  std::size_t o = 0;
  for (int p = 0; p < n * c; ++p) {
    const std::size_t base = static_cast<std::size_t>(p) * h * w;
    for (int oy = 0; oy < ho; ++oy) {
      for (int ox = 0; ox < wo; ++ox, ++o) {
        std::size_t best = base + static_cast<std::size_t>(oy * stride_) * w + ox * stride_;
        for (int ky = 0; ky < k_; ++ky) {
          for (int kx = 0; kx < k_; ++kx) {
            const std::size_t idx = base + static_cast<std::size_t>(oy * stride_ + ky) * w + ox * stride_ + kx;
            if (x[idx] > x[best]) best = idx;
          }
        }
        argmax_[o] = best;
        y[o] = x[best];
      }
    }
  }
  return y;
}

template <typename T>
Tensor<T> MaxPool2d<T>::backward(ParamStore<T>&, const Tensor<T>& dy) {
  if (dy.size() != argmax_.size()) throw ShapeMismatch("maxpool: bad output gradient shape");
  Tensor<T> dx(in_shape_);
  for (std::size_t o = 0; o < dy.size(); ++o) dx[argmax_[o]] += dy[o];
  return dx;
}

// ---------------------------------------------------------------------------
// Linear

template <typename T>
Linear<T>::Linear(ParamStore<T>& ps, std::string name, int in, int out, bool bias)
    : name_(std::move(name)), in_(in), out_(out), bias_(bias) {
  ps.add(name_ + ".weight", {out_, in_}, Init::HeUniform, in_);
  if (bias_) ps.add(name_ + ".bias", {out_}, Init::Zeros);
}

template <typename T>
Tensor<T> Linear<T>::forward(ParamStore<T>& ps, const Tensor<T>& x, Mode) {
  expect_rank(x.shape(), 2, name_);
  if (x.dim(1) != in_) throw ShapeMismatch(name_ + ": expected " + std::to_string(in_) + " inputs, got " + to_string(x.shape()));
  const int n = x.dim(0);
  input_ = x;
  Tensor<T> y({n, out_});
  CMapMat<T> xm(x.data(), n, in_);
  CMapMat<T> wm(ps.value(name_ + ".weight").data(), out_, in_);
  MapMat<T> ym(y.data(), n, out_);
  ym.noalias() = xm * wm.transpose();
  if (bias_) {
    Eigen::Map<const Eigen::Matrix<T, 1, Eigen::Dynamic>> b(ps.value(name_ + ".bias").data(), out_);
    ym.rowwise() += b;
  }
  check_finite(y, name_);
  return y;
}

template <typename T>
Tensor<T> Linear<T>::backward(ParamStore<T>& ps, const Tensor<T>& dy) {
  const int n = input_.dim(0);
  if (dy.shape() != Shape{n, out_}) throw ShapeMismatch(name_ + ": bad output gradient shape");
  CMapMat<T> xm(input_.data(), n, in_);
  CMapMat<T> dym(dy.data(), n, out_);
  CMapMat<T> wm(ps.value(name_ + ".weight").data(), out_, in_);
  MapMat<T> dwm(ps.grad(name_ + ".weight").data(), out_, in_);
  dwm.noalias() += dym.transpose() * xm;
  if (bias_) {
    Eigen::Map<Eigen::Matrix<T, 1, Eigen::Dynamic>> db(ps.grad(name_ + ".bias").data(), out_);
    db += dym.colwise().sum();
  }
  Tensor<T> dx({n, in_});
  MapMat<T> dxm(dx.data(), n, in_);
  dxm.noalias() = dym * wm;
  check_finite(dx, name_ + " backward");
  return dx;
}

// ---------------------------------------------------------------------------
// Embedding

template <typename T>
Embedding<T>::Embedding(ParamStore<T>& ps, std::string name, int n, int dim)
    : name_(std::move(name)), n_(n), dim_(dim) {
  ps.add(name_ + ".table", {n_, dim_}, Init::Normal002);
}

template <typename T>
Tensor<T> Embedding<T>::forward(ParamStore<T>& ps, const std::vector<int>& ids) {
  for (int id : ids) {
    if (id < 0 || id >= n_) throw IdOutOfRange(name_ + ": id " + std::to_string(id) + " outside [0, " + std::to_string(n_) + ")");
  }
  ids_ = ids;
  const auto& table = ps.value(name_ + ".table");
  Tensor<T> y({static_cast<int>(ids.size()), dim_});
  for (std::size_t r = 0; r < ids.size(); ++r)
    std::copy_n(table.data() + static_cast<std::size_t>(ids[r]) * dim_, dim_, y.data() + r * dim_);
  return y;
}

template <typename T>
void Embedding<T>::backward(ParamStore<T>& ps, const Tensor<T>& dy) {
  auto& grad = ps.grad(name_ + ".table");
  for (std::size_t r = 0; r < ids_.size(); ++r) {
    T* g = grad.data() + static_cast<std::size_t>(ids_[r]) * dim_;
    for (int j = 0; j < dim_; ++j) g[j] += dy[r * dim_ + j];
  }
}

// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> Sequential<T>::forward(ParamStore<T>& ps, Tensor<T> x, Mode mode) {
  for (auto& l : layers_) x = l->forward(ps, x, mode);
  return x;
}

template <typename T>
Tensor<T> Sequential<T>::backward(ParamStore<T>& ps, Tensor<T> dy) {
  for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) dy = (*it)->backward(ps, dy);
  return dy;
}

#define COLLABNAV_INSTANTIATE(T) \
  template class Conv2d<T>;      \
  template class BatchNorm2d<T>; \
  template class ReLU<T>;        \
  template class LeakyReLU<T>;   \
  template class MaxPool2d<T>;   \
  template class Linear<T>;      \
  template class Embedding<T>;   \
  template class Sequential<T>;

COLLABNAV_INSTANTIATE(float)
COLLABNAV_INSTANTIATE(double)

}  // namespace collabnav::nn

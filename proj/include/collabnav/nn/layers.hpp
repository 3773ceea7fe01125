#pragma once

#include <collabnav/nn/tensor.hpp>

#include <memory>
#include <string>
#include <vector>

namespace collabnav::nn {

enum class Mode { Train, Infer };

/// A layer owns the names of its parameters in a ParamStore and caches what
/// its backward pass needs from the most recent forward call. Backward
/// accumulates into parameter gradients and returns the input gradient.
template <typename T>
class Layer {
 public:
  virtual ~Layer() = default;
  virtual Tensor<T> forward(ParamStore<T>& ps, const Tensor<T>& x, Mode mode) = 0;
  virtual Tensor<T> backward(ParamStore<T>& ps, const Tensor<T>& dy) = 0;
};

/// [N, C, H, W] -> [N, O, Ho, Wo], square kernel, zero padding.
template <typename T>
class Conv2d final : public Layer<T> {
 public:
  Conv2d(ParamStore<T>& ps, std::string name, int in_ch, int out_ch, int kernel, int stride = 1, int pad = 0,
         bool bias = true);
  Tensor<T> forward(ParamStore<T>& ps, const Tensor<T>& x, Mode mode) override;
  Tensor<T> backward(ParamStore<T>& ps, const Tensor<T>& dy) override;

 private:
  void im2col(const T* image, int h, int w, T* col) const;
  void col2im(const T* col, int h, int w, T* image) const;

  std::string name_;
  int in_, out_, k_, stride_, pad_;
  bool bias_;
  int ho_ = 0, wo_ = 0;
  Tensor<T> input_;
};

/// Per-channel normalization over (N, H, W). Train mode uses batch statistics
/// and updates the running estimates; Infer mode uses the running estimates.
template <typename T>
class BatchNorm2d final : public Layer<T> {
 public:
  BatchNorm2d(ParamStore<T>& ps, std::string name, int channels, double eps = 1e-5, double momentum = 0.1);
  Tensor<T> forward(ParamStore<T>& ps, const Tensor<T>& x, Mode mode) override;
  Tensor<T> backward(ParamStore<T>& ps, const Tensor<T>& dy) override;

 private:
  std::string name_;
  int ch_;
  double eps_, momentum_;
  Mode mode_ = Mode::Train;
  Tensor<T> xhat_;
  std::vector<T> inv_std_;
};

template <typename T>
class ReLU final : public Layer<T> {
 public:
  Tensor<T> forward(ParamStore<T>& ps, const Tensor<T>& x, Mode mode) override;
  Tensor<T> backward(ParamStore<T>& ps, const Tensor<T>& dy) override;

 private:
  Tensor<T> input_;
};

template <typename T>
class LeakyReLU final : public Layer<T> {
 public:
  explicit LeakyReLU(double slope = 0.2) : slope_(static_cast<T>(slope)) {}
  Tensor<T> forward(ParamStore<T>& ps, const Tensor<T>& x, Mode mode) override;
  Tensor<T> backward(ParamStore<T>& ps, const Tensor<T>& dy) override;

 private:
  T slope_;
  Tensor<T> input_;
};

/// Floor-mode max pooling on [N, C, H, W].
template <typename T>
class MaxPool2d final : public Layer<T> {
 public:
  explicit MaxPool2d(int kernel = 2, int stride = 2) : k_(kernel), stride_(stride) {}
  Tensor<T> forward(ParamStore<T>& ps, const Tensor<T>& x, Mode mode) override;
  Tensor<T> backward(ParamStore<T>& ps, const Tensor<T>& dy) override;

 private:
  int k_, stride_;
  Shape in_shape_;
  std::vector<std::size_t> argmax_;
};

/// [N, in] -> [N, out]; weight stored [out, in].
template <typename T>
class Linear final : public Layer<T> {
 public:
  Linear(ParamStore<T>& ps, std::string name, int in, int out, bool bias = true);
  Tensor<T> forward(ParamStore<T>& ps, const Tensor<T>& x, Mode mode) override;
  Tensor<T> backward(ParamStore<T>& ps, const Tensor<T>& dy) override;

 private:
  std::string name_;
  int in_, out_;
  bool bias_;
  Tensor<T> input_;
};

/// Row lookup into an [n, dim] table.
template <typename T>
class Embedding {
 public:
  Embedding(ParamStore<T>& ps, std::string name, int n, int dim);
  /// [ids.size(), dim]; throws IdOutOfRange.
  Tensor<T> forward(ParamStore<T>& ps, const std::vector<int>& ids);
  void backward(ParamStore<T>& ps, const Tensor<T>& dy);

 private:
  std::string name_;
  int n_, dim_;
  std::vector<int> ids_;
};

/// Runs layers in order and backpropagates in reverse.
template <typename T>
class Sequential {
 public:
  void push(std::unique_ptr<Layer<T>> layer) { layers_.push_back(std::move(layer)); }
  Tensor<T> forward(ParamStore<T>& ps, Tensor<T> x, Mode mode);
  Tensor<T> backward(ParamStore<T>& ps, Tensor<T> dy);
  std::size_t size() const { return layers_.size(); }

 private:
  std::vector<std::unique_ptr<Layer<T>>> layers_;
};

}  // namespace collabnav::nn

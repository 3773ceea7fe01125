#pragma once

#include <collabnav/nn/tensor.hpp>

#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace collabnav::nn {

/// Row-wise softmax of [N, C] logits (max-subtracted).
template <typename T>
Tensor<T> softmax(const Tensor<T>& logits);

/// Mean over rows of -log(probs[row, label]).
template <typename T>
double cross_entropy(const Tensor<T>& probs, const std::vector<int>& labels);

template <typename T>
struct LossResult {
  double loss = 0.0;
  Tensor<T> probs;
  Tensor<T> dlogits;  // gradient of the mean loss
};

template <typename T>
LossResult<T> softmax_cross_entropy(const Tensor<T>& logits, const std::vector<int>& labels);

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Adam with bias correction over the trainable entries of a ParamStore.
template <typename T>
class Adam {
 public:
  explicit Adam(AdamConfig cfg = {}) : cfg_(cfg) {}
  void step(ParamStore<T>& ps);
  int steps() const { return t_; }
  void set_lr(double lr) { cfg_.lr = lr; }

 private:
  AdamConfig cfg_;
  int t_ = 0;
  std::map<std::string, std::vector<double>> m_, v_;
};

/// ||a - b|| / max(||a||, ||b||), 0 when both vanish.
double relative_error(std::span<const double> a, std::span<const double> b);

/// Central finite differences of `loss` with respect to every element of `x`.
std::vector<double> numeric_gradient(const std::function<double()>& loss, Tensor<double>& x, double eps);

}  // namespace collabnav::nn

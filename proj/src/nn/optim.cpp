#include <collabnav/error.hpp>
#include <collabnav/nn/optim.hpp>

#include <algorithm>
#include <cmath>

namespace collabnav::nn {

template <typename T>
Tensor<T> softmax(const Tensor<T>& logits) {
  if (logits.rank() != 2) throw ShapeMismatch("softmax: expected [N, C], got " + to_string(logits.shape()));
  check_finite(logits, "softmax logits");
  const int n = logits.dim(0), c = logits.dim(1);
  Tensor<T> p(logits.shape());
  for (int i = 0; i < n; ++i) {
    const T* row = logits.data() + static_cast<std::size_t>(i) * c;
    const T mx = *std::max_element(row, row + c);
    double z = 0.0;
    for (int j = 0; j < c; ++j) z += std::exp(static_cast<double>(row[j] - mx));
    for (int j = 0; j < c; ++j) p[static_cast<std::size_t>(i) * c + j] = static_cast<T>(std::exp(static_cast<double>(row[j] - mx)) / z);
  }
  return p;
}

template <typename T>
double cross_entropy(const Tensor<T>& probs, const std::vector<int>& labels) {
  const int n = probs.dim(0), c = probs.dim(1);
  if (static_cast<int>(labels.size()) != n) throw ShapeMismatch("cross_entropy: label count mismatch");
  double total = 0.0;
  for (int i = 0; i < n; ++i) {
    if (labels[i] < 0 || labels[i] >= c) throw IdOutOfRange("cross_entropy: label out of range");
    const double p = std::max(static_cast<double>(probs[static_cast<std::size_t>(i) * c + labels[i]]), 1e-30);
    total -= std::log(p);
  }
  return total / n;
}

template <typename T>
LossResult<T> softmax_cross_entropy(const Tensor<T>& logits, const std::vector<int>& labels) {
  LossResult<T> r;
  r.probs = softmax(logits);
  const int n = logits.dim(0), c = logits.dim(1);
  if (static_cast<int>(labels.size()) != n) throw ShapeMismatch("cross_entropy: label count mismatch");
  for (int i = 0; i < n; ++i) {
    if (labels[i] < 0 || labels[i] >= c) throw IdOutOfRange("cross_entropy: label out of range");
    const T* row = logits.data() + static_cast<std::size_t>(i) * c;
    const double mx = static_cast<double>(*std::max_element(row, row + c));
    double z = 0.0;
    for (int j = 0; j < c; ++j) z += std::exp(static_cast<double>(row[j]) - mx);
    r.loss += mx + std::log(z) - static_cast<double>(row[labels[i]]);
  }
  r.loss /= n;
  if (!std::isfinite(r.loss)) throw NonFiniteValue("cross-entropy loss is not finite");
  r.dlogits = r.probs;
  for (int i = 0; i < n; ++i) {
    r.dlogits[static_cast<std::size_t>(i) * c + labels[i]] -= T(1);
    for (int j = 0; j < c; ++j) r.dlogits[static_cast<std::size_t>(i) * c + j] /= static_cast<T>(n);
  }
  return r;
}

template <typename T>
void Adam<T>::step(ParamStore<T>& ps) {
  ++t_;
  const double c1 = 1.0 - std::pow(cfg_.beta1, t_);
  const double c2 = 1.0 - std::pow(cfg_.beta2, t_);
  for (auto& [name, p] : ps.entries()) {
    if (!p.trainable) continue;
    check_finite(p.grad, "gradient of " + name);
    auto& m = m_[name];
    auto& v = v_[name];
    if (m.empty()) {
      m.assign(p.value.size(), 0.0);
      v.assign(p.value.size(), 0.0);
    }
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      const double g = p.grad[i];
      m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * g;
      v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * g * g;
      const double update = cfg_.lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + cfg_.eps);
      p.value[i] = static_cast<T>(p.value[i] - update);
    }
  }
}

double relative_error(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ShapeMismatch("relative_error: length mismatch");
  double diff = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff += (a[i] - b[i]) * (a[i] - b[i]);
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  const double denom = std::max(std::sqrt(na), std::sqrt(nb));
  return denom == 0.0 ? 0.0 : std::sqrt(diff) / denom;
}

std::vector<double> numeric_gradient(const std::function<double()>& loss, Tensor<double>& x, double eps) {
  std::vector<double> g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double keep = x[i];
    x[i] = keep + eps;
    const double up = loss();
    x[i] = keep - eps;
    const double down = loss();
    x[i] = keep;
    g[i] = (up - down) / (2.0 * eps);
  }
  return g;
}

template Tensor<float> softmax(const Tensor<float>&);
template Tensor<double> softmax(const Tensor<double>&);
template double cross_entropy(const Tensor<float>&, const std::vector<int>&);
template double cross_entropy(const Tensor<double>&, const std::vector<int>&);
template LossResult<float> softmax_cross_entropy(const Tensor<float>&, const std::vector<int>&);
template LossResult<double> softmax_cross_entropy(const Tensor<double>&, const std::vector<int>&);
template class Adam<float>;
template class Adam<double>;

}  // namespace collabnav::nn

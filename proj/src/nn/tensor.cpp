#include <collabnav/error.hpp>
#include <collabnav/nn/tensor.hpp>

#include <cmath>
#include <functional>
#include <numeric>

namespace collabnav::nn {

std::string to_string(const Shape& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) s += (i ? "," : "") + std::to_string(shape[i]);
  return s + "]";
}

std::size_t numel(const Shape& shape) {
  std::size_t n = 1;
  for (int d : shape) {
    if (d < 0) throw ShapeMismatch("negative dimension in " + to_string(shape));
    n *= static_cast<std::size_t>(d);
  }
  return n;
}

template <typename T>
Tensor<T>::Tensor(Shape shape, T fill) : shape_(std::move(shape)), data_(numel(shape_), fill) {}

template <typename T>
Tensor<T> Tensor<T>::reshaped(Shape shape) const {
  if (numel(shape) != size()) throw ShapeMismatch("cannot reshape " + to_string(shape_) + " to " + to_string(shape));
  Tensor out = *this;
  out.shape_ = std::move(shape);
  return out;
}

template <typename T>
void Tensor<T>::fill(T value) {
  std::fill(data_.begin(), data_.end(), value);
}

template <typename T>
void check_finite(const Tensor<T>& t, const std::string& where) {
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (!std::isfinite(t[i])) throw NonFiniteValue("non-finite value in " + where + " at index " + std::to_string(i));
  }
}

template <typename T>
Param<T>& ParamStore<T>::add(const std::string& name, Shape shape, Init init, int fan_in, bool trainable) {
  if (contains(name)) throw Error("parameter '" + name + "' registered twice");
  Param<T> p{Tensor<T>(shape), Tensor<T>(shape), trainable};
  switch (init) {
    case Init::Zeros:
      break;
    case Init::Ones:
      p.value.fill(T(1));
      break;
    case Init::HeUniform: {
      const double bound = std::sqrt(6.0 / std::max(fan_in, 1));
      for (auto& v : p.value.values()) v = static_cast<T>(rng_.uniform(-bound, bound));
      break;
    }
    case Init::Normal002:
      for (auto& v : p.value.values()) v = static_cast<T>(rng_.normal(0.0, 0.02));
      break;
  }
  return params_.emplace(name, std::move(p)).first->second;
}

template <typename T>
Param<T>& ParamStore<T>::at(const std::string& name) {
  auto it = params_.find(name);
  if (it == params_.end()) throw Error("unknown parameter '" + name + "'");
  return it->second;
}

template <typename T>
const Param<T>& ParamStore<T>::at(const std::string& name) const {
  auto it = params_.find(name);
  if (it == params_.end()) throw Error("unknown parameter '" + name + "'");
  return it->second;
}

template <typename T>
void ParamStore<T>::zero_grad() {
  for (auto& [name, p] : params_) p.grad.fill(T(0));
}

template <typename T>
std::size_t ParamStore<T>::scalar_count() const {
  std::size_t n = 0;
  for (const auto& [name, p] : params_)
    if (p.trainable) n += p.value.size();
  return n;
}

template class Tensor<float>;
template class Tensor<double>;
template class ParamStore<float>;
template class ParamStore<double>;
template void check_finite(const Tensor<float>&, const std::string&);
template void check_finite(const Tensor<double>&, const std::string&);

}  // namespace collabnav::nn

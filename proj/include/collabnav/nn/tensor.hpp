#pragma once

#include <collabnav/rng.hpp>

#include <cstddef>
#include <cstdint>
#include <map>
#include <new>
#include <string>
#include <vector>

namespace collabnav::nn {

using Shape = std::vector<int>;

std::string to_string(const Shape& shape);
std::size_t numel(const Shape& shape);

/// 64-byte aligned storage. Eigen peels unaligned heads before its vector
/// loops, so without a fixed alignment float sums depend on heap layout.
template <typename T>
struct AlignedAllocator {
  using value_type = T;
  static constexpr std::align_val_t kAlign{64};
  AlignedAllocator() = default;
  template <typename U>
  AlignedAllocator(const AlignedAllocator<U>&) {}
  T* allocate(std::size_t n) { return static_cast<T*>(::operator new(n * sizeof(T), kAlign)); }
  void deallocate(T* p, std::size_t) { ::operator delete(p, kAlign); }
  template <typename U>
  bool operator==(const AlignedAllocator<U>&) const { return true; }
};

template <typename T>
using AlignedVector = std::vector<T, AlignedAllocator<T>>;

/// Dense row-major array.
template <typename T>
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, T fill = T(0));

  const Shape& shape() const { return shape_; }
  int rank() const { return static_cast<int>(shape_.size()); }
  int dim(int i) const { return shape_[static_cast<std::size_t>(i)]; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }
  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }
  AlignedVector<T>& values() { return data_; }
  const AlignedVector<T>& values() const { return data_; }

  /// Same data, new shape with equal element count; throws ShapeMismatch.
  Tensor reshaped(Shape shape) const;
  void fill(T value);

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  Shape shape_;
  AlignedVector<T> data_;
};

/// Throws NonFiniteValue naming `where` if any element is NaN or infinite.
template <typename T>
void check_finite(const Tensor<T>& t, const std::string& where);

template <typename To, typename From>
Tensor<To> tensor_cast(const Tensor<From>& t) {
  Tensor<To> out(t.shape());
  for (std::size_t i = 0; i < t.size(); ++i) out[i] = static_cast<To>(t[i]);
  return out;
}

enum class Init { Zeros, Ones, HeUniform, Normal002 };

template <typename T>
struct Param {
  Tensor<T> value;
  Tensor<T> grad;
  bool trainable = true;
};

/// Named parameters (and non-trainable buffers such as batch-norm running
/// statistics) with deterministic seeded initialization. Iteration is in name order.
template <typename T>
class ParamStore {
 public:
  explicit ParamStore(std::uint64_t seed = 0) : seed_(seed), rng_(mix_seed(seed, 0x706172616d)) {}

  /// Registers and initializes a parameter. `fan_in` is used by HeUniform.
  Param<T>& add(const std::string& name, Shape shape, Init init, int fan_in = 1, bool trainable = true);

  bool contains(const std::string& name) const { return params_.count(name) != 0; }
  Param<T>& at(const std::string& name);
  const Param<T>& at(const std::string& name) const;
  Tensor<T>& value(const std::string& name) { return at(name).value; }
  Tensor<T>& grad(const std::string& name) { return at(name).grad; }

  std::map<std::string, Param<T>>& entries() { return params_; }
  const std::map<std::string, Param<T>>& entries() const { return params_; }

  void zero_grad();
  std::size_t scalar_count() const;
  std::uint64_t seed() const { return seed_; }

 private:
  std::uint64_t seed_;
  Rng rng_;
  std::map<std::string, Param<T>> params_;
};

}  // namespace collabnav::nn

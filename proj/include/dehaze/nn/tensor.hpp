#pragma once

#include <algorithm>
#include <array>
#include <cstddef>
#include <new>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace dhz::nn {

/// Cache-line aligned storage. Vectorized kernels choose their peeling from
/// the buffer address, so alignment keeps floating-point results independent
/// of where the allocator places a buffer.
template <typename T>
struct AlignedAllocator {
  using value_type = T;
  static constexpr std::align_val_t kAlignment{64};

  AlignedAllocator() = default;
  template <typename U>
  AlignedAllocator(const AlignedAllocator<U>&) {}

  T* allocate(std::size_t n) { return static_cast<T*>(::operator new(n * sizeof(T), kAlignment)); }
  void deallocate(T* p, std::size_t) { ::operator delete(p, kAlignment); }
  template <typename U>
  bool operator==(const AlignedAllocator<U>&) const { return true; }
};

template <typename T>
using AlignedVector = std::vector<T, AlignedAllocator<T>>;

/// NCHW dimensions.
struct Shape4 {
  int n = 0;
  int c = 0;
  int h = 0;
  int w = 0;

  std::size_t count() const { return static_cast<std::size_t>(n) * c * h * w; }
  std::size_t plane() const { return static_cast<std::size_t>(h) * w; }
  std::size_t sample() const { return static_cast<std::size_t>(c) * h * w; }
  bool operator==(const Shape4&) const = default;
  std::string str() const {
    return std::to_string(n) + "x" + std::to_string(c) + "x" + std::to_string(h) + "x" +
           std::to_string(w);
  }
};

/// Dense NCHW tensor. Gradients are allocated on demand.
template <typename T>
class Tensor4 {
 public:
  Tensor4() = default;
  explicit Tensor4(Shape4 shape, T fill = T{}) : shape_(shape) {
    if (shape.n < 1 || shape.c < 1 || shape.h < 1 || shape.w < 1) {
      throw std::invalid_argument("tensor dims must be positive, got " + shape.str());
    }
    values_.assign(shape.count(), fill);
  }
  Tensor4(int n, int c, int h, int w, T fill = T{}) : Tensor4(Shape4{n, c, h, w}, fill) {}

  const Shape4& shape() const { return shape_; }
  std::size_t size() const { return values_.size(); }
  bool empty() const { return values_.empty(); }

  T& at(int n, int c, int y, int x) { return values_[offset(n, c, y, x)]; }
  const T& at(int n, int c, int y, int x) const { return values_[offset(n, c, y, x)]; }

  std::span<T> values() { return values_; }
  std::span<const T> values() const { return values_; }
  T* data() { return values_.data(); }
  const T* data() const { return values_.data(); }

  /// Pointer to sample n's contiguous C*H*W block.
  T* sample(int n) { return values_.data() + static_cast<std::size_t>(n) * shape_.sample(); }
  const T* sample(int n) const {
    return values_.data() + static_cast<std::size_t>(n) * shape_.sample();
  }

  bool has_grad() const { return !grads_.empty(); }
  void zero_grad() { grads_.assign(values_.size(), T{}); }
  std::span<T> grads() { return grads_; }
  std::span<const T> grads() const { return grads_; }

 private:
  std::size_t offset(int n, int c, int y, int x) const {
    return ((static_cast<std::size_t>(n) * shape_.c + c) * shape_.h + y) * shape_.w + x;
  }

  Shape4 shape_;
  AlignedVector<T> values_;
  AlignedVector<T> grads_;
};

/// A learnable parameter with its gradient and Adagrad accumulator.
template <typename T>
struct Parameter {
  std::string name;
  std::vector<int> dims;
  AlignedVector<T> value;
  AlignedVector<T> grad;
  AlignedVector<T> accumulator;

  Parameter() = default;
  Parameter(std::string param_name, std::vector<int> param_dims)
      : name(std::move(param_name)), dims(std::move(param_dims)) {
    std::size_t n = 1;
    for (int d : dims) n *= static_cast<std::size_t>(d);
    value.assign(n, T{});
    grad.assign(n, T{});
    accumulator.assign(n, T{});
  }

  std::size_t size() const { return value.size(); }
  void zero_grad() { std::fill(grad.begin(), grad.end(), T{}); }
};

}  // namespace dhz::nn

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "dehaze/nn/tensor.hpp"

namespace dhz::nn {

/// Deterministic uniform generator shared by weight init and data sampling.
/// Produces identical streams on every platform for a given seed.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}
  std::uint64_t next() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ull);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }
  /// Uniform in [0,1).
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n) { return n == 0 ? 0 : next() % n; }

 private:
  std::uint64_t state_;
};

/// Convolution output size along one axis; throws when nonpositive.
int conv_output_size(int input, int kernel, int stride, int padding);
/// Transposed-convolution output size: (input - 1) * stride - 2 * padding + kernel.
int conv_transpose_output_size(int input, int kernel, int stride, int padding);

/// 2-D cross-correlation with bias. Weights are (out, in, k, k).
template <typename T>
class Conv2d {
 public:
  Conv2d(std::string name, int in_channels, int out_channels, int kernel, int stride, int padding);

  void init_glorot(SplitMix64& rng);
  Shape4 output_shape(const Shape4& in) const;

  Tensor4<T> forward(const Tensor4<T>& input);
  /// Accumulates parameter gradients and returns the input gradient.
  Tensor4<T> backward(const Tensor4<T>& grad_output);

  Parameter<T>& weight() { return weight_; }
  Parameter<T>& bias() { return bias_; }
  const Parameter<T>& weight() const { return weight_; }
  const Parameter<T>& bias() const { return bias_; }
  std::vector<Parameter<T>*> parameters() { return {&weight_, &bias_}; }

  int in_channels() const { return in_; }
  int out_channels() const { return out_; }
  int kernel() const { return k_; }
  int stride() const { return stride_; }
  int padding() const { return pad_; }

 private:
  int in_, out_, k_, stride_, pad_;
  Parameter<T> weight_;
  Parameter<T> bias_;
  std::optional<Tensor4<T>> cached_input_;
};

/// Adjoint of Conv2d with respect to its input, plus bias.
/// Weights are stored (in, out, k, k) so the forward pass is a single GEMM
/// against the flattened kernel.
template <typename T>
class ConvTranspose2d {
 public:
  ConvTranspose2d(std::string name, int in_channels, int out_channels, int kernel, int stride,
                  int padding);

  void init_glorot(SplitMix64& rng);
  Shape4 output_shape(const Shape4& in) const;

  Tensor4<T> forward(const Tensor4<T>& input);
  Tensor4<T> backward(const Tensor4<T>& grad_output);

  Parameter<T>& weight() { return weight_; }
  Parameter<T>& bias() { return bias_; }
  const Parameter<T>& weight() const { return weight_; }
  const Parameter<T>& bias() const { return bias_; }
  std::vector<Parameter<T>*> parameters() { return {&weight_, &bias_}; }

  int in_channels() const { return in_; }
  int out_channels() const { return out_; }
  int kernel() const { return k_; }
  int stride() const { return stride_; }
  int padding() const { return pad_; }

 private:
  int in_, out_, k_, stride_, pad_;
  Parameter<T> weight_;
  Parameter<T> bias_;
  std::optional<Tensor4<T>> cached_input_;
};

inline constexpr double kBatchNormEpsilon = 1e-5;
inline constexpr double kBatchNormMomentum = 0.9;

/// Per-channel batch normalization. Running statistics follow
/// running = momentum * running + (1 - momentum) * batch, using the biased
/// batch variance.
template <typename T>
class BatchNorm2d {
 public:
  BatchNorm2d(std::string name, int channels, double momentum = kBatchNormMomentum,
              double epsilon = kBatchNormEpsilon);

  Tensor4<T> forward(const Tensor4<T>& input, bool training);
  Tensor4<T> backward(const Tensor4<T>& grad_output);

  Parameter<T>& scale() { return scale_; }
  Parameter<T>& shift() { return shift_; }
  const Parameter<T>& scale() const { return scale_; }
  const Parameter<T>& shift() const { return shift_; }
  std::vector<Parameter<T>*> parameters() { return {&scale_, &shift_}; }

  std::vector<T>& running_mean() { return running_mean_; }
  std::vector<T>& running_var() { return running_var_; }
  const std::vector<T>& running_mean() const { return running_mean_; }
  const std::vector<T>& running_var() const { return running_var_; }
  const std::string& name() const { return name_; }

  int channels() const { return channels_; }
  double momentum() const { return momentum_; }
  double epsilon() const { return epsilon_; }

 private:
  std::string name_;
  int channels_;
  double momentum_;
  double epsilon_;
  Parameter<T> scale_;
  Parameter<T> shift_;
  std::vector<T> running_mean_;
  std::vector<T> running_var_;

  struct Cache {
    bool training = false;
    Tensor4<T> normalized;
    std::vector<T> inv_std;
  };
  std::optional<Cache> cache_;
};

enum class ActivationKind { kTanh, kSigmoid };

template <typename T>
class Activation {
 public:
  explicit Activation(ActivationKind kind) : kind_(kind) {}

  Tensor4<T> forward(const Tensor4<T>& input);
  Tensor4<T> backward(const Tensor4<T>& grad_output);
  ActivationKind kind() const { return kind_; }

 private:
  ActivationKind kind_;
  std::optional<Tensor4<T>> cached_output_;
};

/// Elementwise sum used by skip connections. Its backward is the identity on
/// both operands, so callers route the gradient directly.
template <typename T>
Tensor4<T> add(const Tensor4<T>& a, const Tensor4<T>& b);

extern template class Conv2d<float>;
extern template class Conv2d<double>;
extern template class ConvTranspose2d<float>;
extern template class ConvTranspose2d<double>;
extern template class BatchNorm2d<float>;
extern template class BatchNorm2d<double>;
extern template class Activation<float>;
extern template class Activation<double>;

}  // namespace dhz::nn

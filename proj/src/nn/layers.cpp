#include "dehaze/nn/layers.hpp"

#include <Eigen/Core>

#include <cmath>
#include <stdexcept>

namespace dhz::nn {
namespace {

template <typename T>
using RowMatrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatMap = Eigen::Map<RowMatrix<T>>;
template <typename T>
using ConstMatMap = Eigen::Map<const RowMatrix<T>>;

// Geometry of a strided sliding window between a "wide" grid (H, W) and the
// grid of window positions (outH, outW).
struct Window {
  int channels, height, width;
  int kernel, stride, pad;
  int out_height, out_width;

  int rows() const { return channels * kernel * kernel; }
  int cols() const { return out_height * out_width; }
};

// col[(c*k + ky)*k + kx][oy*outW + ox] = src[c][oy*s - p + ky][ox*s - p + kx]
template <typename T>
void im2col(const T* src, const Window& g, T* col) {
  const int k = g.kernel;
  for (int c = 0; c < g.channels; ++c) {
    const T* plane = src + static_cast<std::size_t>(c) * g.height * g.width;
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        T* row = col + static_cast<std::size_t>((c * k + ky) * k + kx) * g.cols();
        for (int oy = 0; oy < g.out_height; ++oy) {
          const int y = oy * g.stride - g.pad + ky;
          T* dst = row + static_cast<std::size_t>(oy) * g.out_width;
          if (y < 0 || y >= g.height) {
            for (int ox = 0; ox < g.out_width; ++ox) dst[ox] = T{};
            continue;
          }
          const T* line = plane + static_cast<std::size_t>(y) * g.width;
          for (int ox = 0; ox < g.out_width; ++ox) {
            const int x = ox * g.stride - g.pad + kx;
            dst[ox] = (x >= 0 && x < g.width) ? line[x] : T{};
          }
        }
      }
    }
  }
}

// Adjoint of im2col: scatter-adds columns back onto the wide grid.
template <typename T>
void col2im(const T* col, const Window& g, T* dst) {
  const int k = g.kernel;
  std::fill(dst, dst + static_cast<std::size_t>(g.channels) * g.height * g.width, T{});
  for (int c = 0; c < g.channels; ++c) {
    T* plane = dst + static_cast<std::size_t>(c) * g.height * g.width;
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        const T* row = col + static_cast<std::size_t>((c * k + ky) * k + kx) * g.cols();
        for (int oy = 0; oy < g.out_height; ++oy) {
          const int y = oy * g.stride - g.pad + ky;
          if (y < 0 || y >= g.height) continue;
          T* line = plane + static_cast<std::size_t>(y) * g.width;
          const T* src = row + static_cast<std::size_t>(oy) * g.out_width;
          for (int ox = 0; ox < g.out_width; ++ox) {
            const int x = ox * g.stride - g.pad + kx;
            if (x >= 0 && x < g.width) line[x] += src[ox];
          }
        }
      }
    }
  }
}

template <typename T>
void glorot_fill(Parameter<T>& p, int fan_in, int fan_out, SplitMix64& rng) {
  const double limit = std::sqrt(6.0 / (fan_in + fan_out));
  for (auto& v : p.value) v = static_cast<T>(rng.uniform(-limit, limit));
}

void check_layer_config(int in, int out, int kernel, int stride, int padding) {
  if (in < 1 || out < 1 || kernel < 1 || stride < 1 || padding < 0) {
    throw std::invalid_argument("invalid convolution configuration");
  }
}

// Sums per-sample parameter gradients in sample order so the result does not
// depend on how samples were distributed over threads.
template <typename T>
void reduce_into(AlignedVector<T>& target, const std::vector<AlignedVector<T>>& parts) {
  for (const auto& part : parts) {
    for (std::size_t i = 0; i < target.size(); ++i) target[i] += part[i];
  }
}

}  // namespace

int conv_output_size(int input, int kernel, int stride, int padding) {
  const int span = input + 2 * padding - kernel;
  if (span < 0) {
    throw std::invalid_argument("convolution output would be empty (input " +
                                std::to_string(input) + ", kernel " + std::to_string(kernel) + ")");
  }
  return span / stride + 1;
}

int conv_transpose_output_size(int input, int kernel, int stride, int padding) {
  const int out = (input - 1) * stride - 2 * padding + kernel;
  if (out < 1) throw std::invalid_argument("transposed convolution output would be empty");
  return out;
}

// --- Conv2d ---------------------------------------------------------------

template <typename T>
Conv2d<T>::Conv2d(std::string name, int in_channels, int out_channels, int kernel, int stride,
                  int padding)
    : in_(in_channels), out_(out_channels), k_(kernel), stride_(stride), pad_(padding) {
  check_layer_config(in_channels, out_channels, kernel, stride, padding);
  weight_ = Parameter<T>(name + ".weight", {out_, in_, k_, k_});
  bias_ = Parameter<T>(name + ".bias", {out_});
}

template <typename T>
void Conv2d<T>::init_glorot(SplitMix64& rng) {
  glorot_fill(weight_, in_ * k_ * k_, out_ * k_ * k_, rng);
  std::fill(bias_.value.begin(), bias_.value.end(), T{});
}

template <typename T>
Shape4 Conv2d<T>::output_shape(const Shape4& in) const {
  if (in.c != in_) {
    throw std::invalid_argument("conv2d expects " + std::to_string(in_) + " channels, got " +
                                std::to_string(in.c));
  }
  return {in.n, out_, conv_output_size(in.h, k_, stride_, pad_),
          conv_output_size(in.w, k_, stride_, pad_)};
}

template <typename T>
Tensor4<T> Conv2d<T>::forward(const Tensor4<T>& input) {
  const Shape4 in = input.shape();
  const Shape4 os = output_shape(in);
  Tensor4<T> output(os);
  const Window g{in_, in.h, in.w, k_, stride_, pad_, os.h, os.w};
  const ConstMatMap<T> w(weight_.value.data(), out_, g.rows());
  const Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 1>> b(bias_.value.data(), out_);

#pragma omp parallel
  {
    AlignedVector<T> col(static_cast<std::size_t>(g.rows()) * g.cols());
#pragma omp for schedule(static)
    for (int n = 0; n < in.n; ++n) {
      im2col(input.sample(n), g, col.data());
      MatMap<T> y(output.sample(n), out_, g.cols());
      y.noalias() = w * ConstMatMap<T>(col.data(), g.rows(), g.cols());
      y.colwise() += b;
    }
  }
  cached_input_ = input;
  return output;
}

template <typename T>
Tensor4<T> Conv2d<T>::backward(const Tensor4<T>& grad_output) {
  if (!cached_input_) throw std::logic_error("conv2d backward called without a recorded forward");
  const Tensor4<T>& input = *cached_input_;
  const Shape4 in = input.shape();
  const Shape4 os = output_shape(in);
  if (grad_output.shape() != os) throw std::invalid_argument("conv2d: gradient shape mismatch");

  Tensor4<T> grad_input(in);
  const Window g{in_, in.h, in.w, k_, stride_, pad_, os.h, os.w};
  const ConstMatMap<T> w(weight_.value.data(), out_, g.rows());
  std::vector<AlignedVector<T>> dw(in.n, AlignedVector<T>(weight_.size()));
  std::vector<AlignedVector<T>> db(in.n, AlignedVector<T>(bias_.size()));

#pragma omp parallel
  {
    AlignedVector<T> col(static_cast<std::size_t>(g.rows()) * g.cols());
    AlignedVector<T> dcol(col.size());
#pragma omp for schedule(static)
    for (int n = 0; n < in.n; ++n) {
      im2col(input.sample(n), g, col.data());
      const ConstMatMap<T> dy(grad_output.sample(n), out_, g.cols());
      const ConstMatMap<T> cm(col.data(), g.rows(), g.cols());
      MatMap<T>(dw[n].data(), out_, g.rows()).noalias() = dy * cm.transpose();
      Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, 1>>(db[n].data(), out_) = dy.rowwise().sum();
      MatMap<T>(dcol.data(), g.rows(), g.cols()).noalias() = w.transpose() * dy;
      col2im(dcol.data(), g, grad_input.sample(n));
    }
  }
  reduce_into(weight_.grad, dw);
  reduce_into(bias_.grad, db);
  cached_input_.reset();
  return grad_input;
}

// --- ConvTranspose2d ------------------------------------------------------

template <typename T>
ConvTranspose2d<T>::ConvTranspose2d(std::string name, int in_channels, int out_channels,
                                    int kernel, int stride, int padding)
    : in_(in_channels), out_(out_channels), k_(kernel), stride_(stride), pad_(padding) {
  check_layer_config(in_channels, out_channels, kernel, stride, padding);
  weight_ = Parameter<T>(name + ".weight", {in_, out_, k_, k_});
  bias_ = Parameter<T>(name + ".bias", {out_});
}

template <typename T>
void ConvTranspose2d<T>::init_glorot(SplitMix64& rng) {
  glorot_fill(weight_, in_ * k_ * k_, out_ * k_ * k_, rng);
  std::fill(bias_.value.begin(), bias_.value.end(), T{});
}

template <typename T>
Shape4 ConvTranspose2d<T>::output_shape(const Shape4& in) const {
  if (in.c != in_) {
    throw std::invalid_argument("conv_transpose2d expects " + std::to_string(in_) +
                                " channels, got " + std::to_string(in.c));
  }
  return {in.n, out_, conv_transpose_output_size(in.h, k_, stride_, pad_),
          conv_transpose_output_size(in.w, k_, stride_, pad_)};
}

template <typename T>
Tensor4<T> ConvTranspose2d<T>::forward(const Tensor4<T>& input) {
  const Shape4 in = input.shape();
  const Shape4 os = output_shape(in);
  Tensor4<T> output(os);
  // The window runs over the output grid; window positions are input pixels.
  const Window g{out_, os.h, os.w, k_, stride_, pad_, in.h, in.w};
  const ConstMatMap<T> w(weight_.value.data(), in_, g.rows());

#pragma omp parallel
  {
    AlignedVector<T> col(static_cast<std::size_t>(g.rows()) * g.cols());
#pragma omp for schedule(static)
    for (int n = 0; n < in.n; ++n) {
      const ConstMatMap<T> x(input.sample(n), in_, g.cols());
      MatMap<T>(col.data(), g.rows(), g.cols()).noalias() = w.transpose() * x;
      T* y = output.sample(n);
      col2im(col.data(), g, y);
      for (int c = 0; c < out_; ++c) {
        T* plane = y + static_cast<std::size_t>(c) * os.plane();
        for (std::size_t i = 0; i < os.plane(); ++i) plane[i] += bias_.value[c];
      }
    }
  }
  cached_input_ = input;
  return output;
}

template <typename T>
Tensor4<T> ConvTranspose2d<T>::backward(const Tensor4<T>& grad_output) {
  if (!cached_input_) {
    throw std::logic_error("conv_transpose2d backward called without a recorded forward");
  }
  const Tensor4<T>& input = *cached_input_;
  const Shape4 in = input.shape();
  const Shape4 os = output_shape(in);
  if (grad_output.shape() != os) {
    throw std::invalid_argument("conv_transpose2d: gradient shape mismatch");
  }

  Tensor4<T> grad_input(in);
  const Window g{out_, os.h, os.w, k_, stride_, pad_, in.h, in.w};
  const ConstMatMap<T> w(weight_.value.data(), in_, g.rows());
  std::vector<AlignedVector<T>> dw(in.n, AlignedVector<T>(weight_.size()));
  std::vector<AlignedVector<T>> db(in.n, AlignedVector<T>(bias_.size(), T{}));

#pragma omp parallel
  {
    AlignedVector<T> dcol(static_cast<std::size_t>(g.rows()) * g.cols());
#pragma omp for schedule(static)
    for (int n = 0; n < in.n; ++n) {
      const T* dy = grad_output.sample(n);
      for (int c = 0; c < out_; ++c) {
        const T* plane = dy + static_cast<std::size_t>(c) * os.plane();
        T acc{};
        for (std::size_t i = 0; i < os.plane(); ++i) acc += plane[i];
        db[n][c] = acc;
      }
      im2col(dy, g, dcol.data());
      const ConstMatMap<T> dc(dcol.data(), g.rows(), g.cols());
      const ConstMatMap<T> x(input.sample(n), in_, g.cols());
      MatMap<T>(grad_input.sample(n), in_, g.cols()).noalias() = w * dc;
      MatMap<T>(dw[n].data(), in_, g.rows()).noalias() = x * dc.transpose();
    }
  }
  reduce_into(weight_.grad, dw);
  reduce_into(bias_.grad, db);
  cached_input_.reset();
  return grad_input;
}

// --- BatchNorm2d ----------------------------------------------------------

template <typename T>
BatchNorm2d<T>::BatchNorm2d(std::string name, int channels, double momentum, double epsilon)
    : name_(std::move(name)), channels_(channels), momentum_(momentum), epsilon_(epsilon) {
  if (channels < 1) throw std::invalid_argument("batch norm needs at least one channel");
  if (!(momentum > 0.0 && momentum < 1.0)) throw std::invalid_argument("momentum must be in (0,1)");
  if (!(epsilon > 0.0)) throw std::invalid_argument("epsilon must be positive");
  scale_ = Parameter<T>(name_ + ".scale", {channels});
  shift_ = Parameter<T>(name_ + ".shift", {channels});
  std::fill(scale_.value.begin(), scale_.value.end(), T{1});
  running_mean_.assign(channels, T{});
  running_var_.assign(channels, T{1});
}

template <typename T>
Tensor4<T> BatchNorm2d<T>::forward(const Tensor4<T>& input, bool training) {
  const Shape4 s = input.shape();
  if (s.c != channels_) {
    throw std::invalid_argument("batch norm expects " + std::to_string(channels_) +
                                " channels, got " + std::to_string(s.c));
  }
  Cache cache;
  cache.training = training;
  cache.normalized = Tensor4<T>(s);
  cache.inv_std.assign(channels_, T{});
  Tensor4<T> output(s);
  const std::size_t plane = s.plane();
  const double count = static_cast<double>(s.n) * plane;

  for (int c = 0; c < channels_; ++c) {
    double mean, var;
    if (training) {
      double sum = 0.0;
      for (int n = 0; n < s.n; ++n) {
        const T* p = input.sample(n) + c * plane;
        for (std::size_t i = 0; i < plane; ++i) sum += p[i];
      }
      mean = sum / count;
      double sq = 0.0;
      for (int n = 0; n < s.n; ++n) {
        const T* p = input.sample(n) + c * plane;
        for (std::size_t i = 0; i < plane; ++i) {
          const double d = p[i] - mean;
          sq += d * d;
        }
      }
      var = sq / count;
      running_mean_[c] = static_cast<T>(momentum_ * running_mean_[c] + (1.0 - momentum_) * mean);
      running_var_[c] = static_cast<T>(momentum_ * running_var_[c] + (1.0 - momentum_) * var);
    } else {
      mean = running_mean_[c];
      var = running_var_[c];
    }
    const double inv_std = 1.0 / std::sqrt(var + epsilon_);
    cache.inv_std[c] = static_cast<T>(inv_std);
    const T gamma = scale_.value[c];
    const T beta = shift_.value[c];
    for (int n = 0; n < s.n; ++n) {
      const T* p = input.sample(n) + c * plane;
      T* xh = cache.normalized.sample(n) + c * plane;
      T* out = output.sample(n) + c * plane;
      for (std::size_t i = 0; i < plane; ++i) {
        xh[i] = static_cast<T>((p[i] - mean) * inv_std);
        out[i] = gamma * xh[i] + beta;
      }
    }
  }
  cache_ = std::move(cache);
  return output;
}

template <typename T>
Tensor4<T> BatchNorm2d<T>::backward(const Tensor4<T>& grad_output) {
  if (!cache_) throw std::logic_error("batch norm backward called without a recorded forward");
  const Cache& cache = *cache_;
  const Shape4 s = cache.normalized.shape();
  if (grad_output.shape() != s) throw std::invalid_argument("batch norm: gradient shape mismatch");
  Tensor4<T> grad_input(s);
  const std::size_t plane = s.plane();
  const double count = static_cast<double>(s.n) * plane;

  for (int c = 0; c < channels_; ++c) {
    double sum_dy = 0.0;
    double sum_dy_xh = 0.0;
    for (int n = 0; n < s.n; ++n) {
      const T* dy = grad_output.sample(n) + c * plane;
      const T* xh = cache.normalized.sample(n) + c * plane;
      for (std::size_t i = 0; i < plane; ++i) {
        sum_dy += dy[i];
        sum_dy_xh += static_cast<double>(dy[i]) * xh[i];
      }
    }
    scale_.grad[c] += static_cast<T>(sum_dy_xh);
    shift_.grad[c] += static_cast<T>(sum_dy);

    const double gamma = scale_.value[c];
    const double inv_std = cache.inv_std[c];
    for (int n = 0; n < s.n; ++n) {
      const T* dy = grad_output.sample(n) + c * plane;
      const T* xh = cache.normalized.sample(n) + c * plane;
      T* dx = grad_input.sample(n) + c * plane;
      if (cache.training) {
        const double mean_dy = sum_dy / count;
        const double mean_dy_xh = sum_dy_xh / count;
        for (std::size_t i = 0; i < plane; ++i) {
          dx[i] = static_cast<T>(gamma * inv_std * (dy[i] - mean_dy - xh[i] * mean_dy_xh));
        }
      } else {
        for (std::size_t i = 0; i < plane; ++i) dx[i] = static_cast<T>(gamma * inv_std * dy[i]);
      }
    }
  }
  cache_.reset();
  return grad_input;
}

// --- Activation -----------------------------------------------------------

template <typename T>
Tensor4<T> Activation<T>::forward(const Tensor4<T>& input) {
  Tensor4<T> output(input.shape());
  auto in = input.values();
  auto out = output.values();
  if (kind_ == ActivationKind::kTanh) {
    for (std::size_t i = 0; i < in.size(); ++i) out[i] = std::tanh(in[i]);
  } else {
    for (std::size_t i = 0; i < in.size(); ++i) out[i] = T{1} / (T{1} + std::exp(-in[i]));
  }
  cached_output_ = output;
  return output;
}

template <typename T>
Tensor4<T> Activation<T>::backward(const Tensor4<T>& grad_output) {
  if (!cached_output_) throw std::logic_error("activation backward called without a recorded forward");
  const Tensor4<T>& y = *cached_output_;
  if (grad_output.shape() != y.shape()) throw std::invalid_argument("activation: gradient shape mismatch");
  Tensor4<T> grad_input(y.shape());
  auto yv = y.values();
  auto dy = grad_output.values();
  auto dx = grad_input.values();
  if (kind_ == ActivationKind::kTanh) {
    for (std::size_t i = 0; i < yv.size(); ++i) dx[i] = dy[i] * (T{1} - yv[i] * yv[i]);
  } else {
    for (std::size_t i = 0; i < yv.size(); ++i) dx[i] = dy[i] * yv[i] * (T{1} - yv[i]);
  }
  cached_output_.reset();
  return grad_input;
}

template <typename T>
Tensor4<T> add(const Tensor4<T>& a, const Tensor4<T>& b) {
  if (a.shape() != b.shape()) {
    throw std::invalid_argument("add: shape mismatch " + a.shape().str() + " vs " + b.shape().str());
  }
  Tensor4<T> out(a.shape());
  auto av = a.values();
  auto bv = b.values();
  auto ov = out.values();
  for (std::size_t i = 0; i < av.size(); ++i) ov[i] = av[i] + bv[i];
  return out;
}

template class Conv2d<float>;
template class Conv2d<double>;
template class ConvTranspose2d<float>;
template class ConvTranspose2d<double>;
template class BatchNorm2d<float>;
template class BatchNorm2d<double>;
template class Activation<float>;
template class Activation<double>;
template Tensor4<float> add(const Tensor4<float>&, const Tensor4<float>&);
template Tensor4<double> add(const Tensor4<double>&, const Tensor4<double>&);

}  // namespace dhz::nn

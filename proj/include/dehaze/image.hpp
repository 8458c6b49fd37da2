#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace dhz {

/// Dense row-major raster with interleaved channels (HWC).
///
/// The tag parameter keeps semantically different rasters (a hazy observation,
/// an illumination map, a transmittance map, a depth map) from being passed
/// where another is expected, even when they share a memory layout.
template <typename T, int C, typename Tag>
class Raster {
 public:
  using value_type = T;
  static constexpr int kChannels = C;

  Raster() = default;
  Raster(int height, int width, T fill = T{}) : height_(height), width_(width) {
    if (height < 1 || width < 1) {
      throw std::invalid_argument("raster dimensions must be positive, got " +
                                  std::to_string(height) + "x" + std::to_string(width));
    }
    data_.assign(static_cast<std::size_t>(height) * width * C, fill);
  }

  int height() const { return height_; }
  int width() const { return width_; }
  std::size_t pixel_count() const { return static_cast<std::size_t>(height_) * width_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  T& at(int y, int x, int c = 0) { return data_[index(y, x, c)]; }
  const T& at(int y, int x, int c = 0) const { return data_[index(y, x, c)]; }

  T* pixel(int y, int x) { return data_.data() + index(y, x, 0); }
  const T* pixel(int y, int x) const { return data_.data() + index(y, x, 0); }

  std::span<T> values() { return data_; }
  std::span<const T> values() const { return data_; }

  template <typename U, int D, typename G>
  bool same_shape(const Raster<U, D, G>& other) const {
    return height_ == other.height() && width_ == other.width();
  }

  bool operator==(const Raster&) const = default;

 private:
  std::size_t index(int y, int x, int c) const {
    return (static_cast<std::size_t>(y) * width_ + x) * C + c;
  }

  int height_ = 0;
  int width_ = 0;
  std::vector<T> data_;
};

struct ImageTag {};
struct ColorMapTag {};
struct ScalarMapTag {};
struct DepthMapTag {};
struct MaskTag {};

/// Scene radiance or observation, RGB in [0,1].
using Image = Raster<float, 3, ImageTag>;
/// Per-pixel environmental illumination, RGB in [0,1].
using ColorMap = Raster<float, 3, ColorMapTag>;
/// Per-pixel transmittance in [0,1].
using ScalarMap = Raster<float, 1, ScalarMapTag>;
/// Scene depth in meters, nonnegative.
using DepthMap = Raster<float, 1, DepthMapTag>;
/// 1 where an estimate exists.
using Mask = Raster<std::uint8_t, 1, MaskTag>;

/// Copies the pixels of one raster into another raster kind with the same layout.
template <typename To, typename From>
To retag(const From& from) {
  static_assert(To::kChannels == From::kChannels, "channel count must match");
  To out(from.height(), from.width());
  auto src = from.values();
  auto dst = out.values();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] = static_cast<typename To::value_type>(src[i]);
  return out;
}

/// True when every value is finite and inside [lo, hi].
template <typename R>
bool values_within(const R& r, double lo, double hi) {
  for (auto v : r.values()) {
    if (!std::isfinite(static_cast<double>(v)) || v < lo || v > hi) return false;
  }
  return true;
}

template <typename R>
void require_unit_range(const R& r, const char* what) {
  if (!values_within(r, 0.0, 1.0)) {
    throw std::invalid_argument(std::string(what) + " must hold finite values in [0,1]");
  }
}

template <typename A, typename B>
void require_same_shape(const A& a, const B& b, const char* what) {
  if (!a.same_shape(b)) {
    throw std::invalid_argument(std::string(what) + ": dimension mismatch (" +
                                std::to_string(a.height()) + "x" + std::to_string(a.width()) +
                                " vs " + std::to_string(b.height()) + "x" +
                                std::to_string(b.width()) + ")");
  }
}

/// Crops a rectangle; used for patch extraction.
template <typename R>
R crop(const R& src, int y0, int x0, int h, int w) {
  if (y0 < 0 || x0 < 0 || y0 + h > src.height() || x0 + w > src.width()) {
    throw std::invalid_argument("crop rectangle outside raster");
  }
  R out(h, w);
  constexpr int C = R::kChannels;
  for (int y = 0; y < h; ++y) {
    const auto* s = src.pixel(y0 + y, x0);
    auto* d = out.pixel(y, 0);
    for (int i = 0; i < w * C; ++i) d[i] = s[i];
  }
  return out;
}

}  // namespace dhz

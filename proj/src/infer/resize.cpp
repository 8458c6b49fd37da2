#include "dehaze/infer/resize.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace dhz::infer {
namespace {

struct Tap {
  int i0, i1;
  float w1;
};

std::vector<Tap> taps(int src, int dst) {
  std::vector<Tap> out(dst);
  const double scale = static_cast<double>(src) / dst;
  for (int d = 0; d < dst; ++d) {
    const double pos = std::clamp((d + 0.5) * scale - 0.5, 0.0, static_cast<double>(src - 1));
    const int i0 = static_cast<int>(std::floor(pos));
    const int i1 = std::min(i0 + 1, src - 1);
    out[d] = {i0, i1, static_cast<float>(pos - i0)};
  }
  return out;
}

}  // namespace

template <typename R>
R resize_bilinear(const R& src, int height, int width) {
  if (height == src.height() && width == src.width()) return src;
  constexpr int C = R::kChannels;
  R out(height, width);
  const auto ty = taps(src.height(), height);
  const auto tx = taps(src.width(), width);
  for (int y = 0; y < height; ++y) {
    const Tap& a = ty[y];
    for (int x = 0; x < width; ++x) {
      const Tap& b = tx[x];
      const auto* p00 = src.pixel(a.i0, b.i0);
      const auto* p01 = src.pixel(a.i0, b.i1);
      const auto* p10 = src.pixel(a.i1, b.i0);
      const auto* p11 = src.pixel(a.i1, b.i1);
      auto* d = out.pixel(y, x);
      for (int c = 0; c < C; ++c) {
        const float top = p00[c] + (p01[c] - p00[c]) * b.w1;
        const float bottom = p10[c] + (p11[c] - p10[c]) * b.w1;
        d[c] = top + (bottom - top) * a.w1;
      }
    }
  }
  return out;
}

template Image resize_bilinear(const Image&, int, int);
template ScalarMap resize_bilinear(const ScalarMap&, int, int);
template ColorMap resize_bilinear(const ColorMap&, int, int);

}  // namespace dhz::infer

#include "dehaze/haze_model.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace dhz {

ScalarMap transmittance_from_depth(const DepthMap& depth, double beta) {
  if (!(beta > 0.0) || !std::isfinite(beta)) {
    throw std::invalid_argument("beta must be positive and finite");
  }
  if (depth.empty()) throw std::invalid_argument("empty depth map");
  ScalarMap t(depth.height(), depth.width());
  auto d = depth.values();
  auto out = t.values();
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (!std::isfinite(d[i]) || d[i] < 0.f) {
      throw std::invalid_argument("depth must be finite and nonnegative");
    }
    out[i] = static_cast<float>(std::exp(-beta * static_cast<double>(d[i])));
  }
  return t;
}

Image synthesize_haze(const Image& clean, const ScalarMap& t, const ColorMap& a) {
  require_same_shape(clean, t, "synthesize_haze");
  require_same_shape(clean, a, "synthesize_haze");
  Image hazy(clean.height(), clean.width());
  const int h = clean.height();
  const int w = clean.width();
#pragma omp parallel for schedule(static)
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const float tx = t.at(y, x);
      const float* j = clean.pixel(y, x);
      const float* ax = a.pixel(y, x);
      float* out = hazy.pixel(y, x);
      for (int c = 0; c < 3; ++c) {
        out[c] = std::clamp(j[c] * tx + (1.f - tx) * ax[c], 0.f, 1.f);
      }
    }
  }
  return hazy;
}

Image recover_scene(const Image& hazy, const ScalarMap& t, const ColorMap& a) {
  require_same_shape(hazy, t, "recover_scene");
  require_same_shape(hazy, a, "recover_scene");
  Image clean(hazy.height(), hazy.width());
  const int h = hazy.height();
  const int w = hazy.width();
#pragma omp parallel for schedule(static)
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const float tx = t.at(y, x);
      const float denom = std::max(kMinRecoveryTransmittance, tx);
      const float* i = hazy.pixel(y, x);
      const float* ax = a.pixel(y, x);
      float* out = clean.pixel(y, x);
      for (int c = 0; c < 3; ++c) {
        const float j = (i[c] - (1.f - tx) * ax[c]) / denom;
        // NaN inputs propagate as 0 rather than poisoning downstream metrics.
        out[c] = std::isfinite(j) ? std::clamp(j, 0.f, 1.f) : 0.f;
      }
    }
  }
  return clean;
}

}  // namespace dhz

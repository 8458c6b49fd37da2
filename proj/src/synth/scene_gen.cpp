#include "dehaze/synth/scene_gen.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>

#include "dehaze/nn/layers.hpp"

namespace dhz::synth {
namespace {

using Color = std::array<float, 3>;

Color dark(nn::SplitMix64& rng) {
  return {static_cast<float>(rng.uniform(0.0, 0.15)), static_cast<float>(rng.uniform(0.0, 0.15)),
          static_cast<float>(rng.uniform(0.0, 0.15))};
}

Color bright(nn::SplitMix64& rng) {
  return {static_cast<float>(rng.uniform(0.8, 1.0)), static_cast<float>(rng.uniform(0.8, 1.0)),
          static_cast<float>(rng.uniform(0.8, 1.0))};
}

}  // namespace

Scene make_scene(const SceneOptions& o) {
  if (o.height < 1 || o.width < 1) throw std::invalid_argument("scene dimensions must be positive");
  if (!(o.min_depth >= 0.0 && o.min_depth <= o.max_depth)) throw std::invalid_argument("invalid depth range");
  nn::SplitMix64 rng(o.seed * 0xD1B54A32D192ED03ull + 0x2545F4914F6CDD1Dull);
  Scene s{Image(o.height, o.width), DepthMap(o.height, o.width)};

  // Background: checkerboard with a random cell size and palette.
  const int cell = 4 + static_cast<int>(rng.below(10));
  const Color c0 = dark(rng);
  const Color c1 = bright(rng);
  // Stripe overlay on one diagonal half.
  const int stripe = 3 + static_cast<int>(rng.below(6));
  const bool stripes_first = rng.uniform() < 0.5;
  for (int y = 0; y < o.height; ++y) {
    for (int x = 0; x < o.width; ++x) {
      const bool lower = (y * o.width > x * o.height) == stripes_first;
      const bool on = lower ? (((x + y) / stripe) % 2 == 0) : (((x / cell) + (y / cell)) % 2 == 0);
      const Color& c = on ? c1 : c0;
      for (int k = 0; k < 3; ++k) s.rgb.at(y, x, k) = c[k];
    }
  }

  // Depth: tilted plane spanning the range.
  const double gx = rng.uniform(-1.0, 1.0);
  const double gy = rng.uniform(0.2, 1.0);
  const double span = o.max_depth - o.min_depth;
  for (int y = 0; y < o.height; ++y) {
    for (int x = 0; x < o.width; ++x) {
      const double u = (gx * x / o.width + gy * y / o.height + 1.0) / 3.0;
      s.depth.at(y, x) = static_cast<float>(o.min_depth + span * std::clamp(u, 0.0, 1.0));
    }
  }

  // Foreground blocks: closer, with their own texture.
  const int blocks = 2 + static_cast<int>(rng.below(3));
  for (int b = 0; b < blocks; ++b) {
    const int bh = std::max(1, static_cast<int>(o.height * rng.uniform(0.15, 0.4)));
    const int bw = std::max(1, static_cast<int>(o.width * rng.uniform(0.15, 0.4)));
    const int y0 = static_cast<int>(rng.below(std::max(1, o.height - bh)));
    const int x0 = static_cast<int>(rng.below(std::max(1, o.width - bw)));
    const float d = static_cast<float>(o.min_depth + span * rng.uniform(0.0, 0.3));
    const Color f0 = dark(rng);
    const Color f1 = bright(rng);
    const int fcell = 3 + static_cast<int>(rng.below(8));
    for (int y = y0; y < std::min(o.height, y0 + bh); ++y) {
      for (int x = x0; x < std::min(o.width, x0 + bw); ++x) {
        const bool on = ((y - y0) / fcell) % 2 == 0;
        const Color& c = on ? f1 : f0;
        for (int k = 0; k < 3; ++k) s.rgb.at(y, x, k) = c[k];
        s.depth.at(y, x) = d;
      }
    }
  }
  return s;
}

}  // namespace dhz::synth

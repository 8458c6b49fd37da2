#pragma once

#include <functional>
#include <span>
#include <vector>

#include "dehaze/image.hpp"

namespace dhz::net {
class DehazeNet;
}

namespace dhz::infer {

/// Maps a batch of omega x omega patches to per-patch transmittance and
/// illumination maps of the same size.
using PatchEstimator =
    std::function<void(std::span<const Image> patches, std::vector<ScalarMap>& t, std::vector<ColorMap>& a)>;

/// Wraps a network in inference mode. The network must outlive the estimator.
PatchEstimator network_estimator(net::DehazeNet& net, int batch_size = 16);

/// Number of pyramid levels: floor(log2(min(H,W)) - log2(omega) + 1).
int level_count(int height, int width, int omega);

/// Patch side at 1-based level i: min(H,W) / 2^(i-1).
int level_patch_size(int height, int width, int level);

struct LevelOptions {
  int omega = 64;
  double variance_threshold = 0.08;
  /// Patch stride is patch_size / stride_divisor.
  int stride_divisor = 2;
};

/// Full-size maps from one pyramid level. Pixels with coverage 0 carry no
/// estimate and their map values are meaningless.
struct LevelEstimate {
  int level = 0;
  ScalarMap t;
  ColorMap a;
  Mask coverage;
};

LevelEstimate estimate_level(const Image& image, int level, const PatchEstimator& estimator,
                             const LevelOptions& options = {});

struct AggregationWeights {
  std::vector<double> t;
  std::vector<double> a;

  static AggregationWeights uniform(int levels);
  void validate(std::size_t levels) const;
};

struct AggregatedMaps {
  ScalarMap t;
  ColorMap a;
  Mask t_coverage;  ///< a positively weighted level covers the pixel
  Mask a_coverage;
  Mask coverage;    ///< union of level coverage masks
};

/// Per-pixel weighted average over the levels that cover each pixel.
AggregatedMaps aggregate_levels(std::span<const LevelEstimate> estimates, const AggregationWeights& weights);

}  // namespace dhz::infer

#pragma once

#include <initializer_list>
#include <optional>
#include <vector>

#include "dehaze/image.hpp"
#include "dehaze/infer/multilevel.hpp"
#include "dehaze/mrf/regularizer.hpp"

namespace dhz::pipeline {

struct DehazeOptions {
  infer::LevelOptions levels;
  /// Empty means weight 1 for every level.
  std::optional<infer::AggregationWeights> weights;
  mrf::RegularizerParams regularizer;
};

struct DehazeResult {
  Image dehazed;
  ScalarMap t;        ///< regularized
  ColorMap a;         ///< regularized
  ScalarMap raw_t;    ///< aggregated, before regularization
  ColorMap raw_a;
  Mask coverage;
  int levels = 0;
};

/// Multilevel estimation, aggregation, regularization and recovery.
/// Throws std::invalid_argument when no patch passes the variance gate.
DehazeResult dehaze_image(const Image& hazy, const infer::PatchEstimator& estimator,
                          const DehazeOptions& options = {});

/// Recovery with externally supplied maps, bypassing estimation.
Image oracle_dehaze(const Image& hazy, const ScalarMap& t, const ColorMap& a);

/// Images placed left to right with equal height.
Image side_by_side(std::initializer_list<const Image*> panels);

/// Replicates a scalar map into a gray RGB image, for visual comparison.
Image gray_to_rgb(const ScalarMap& map);

}  // namespace dhz::pipeline

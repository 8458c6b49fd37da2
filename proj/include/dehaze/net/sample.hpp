#pragma once

#include "dehaze/image.hpp"

namespace dhz::net {

/// One training patch with its ground truth. The illumination is constant
/// over the patch but stored as a full map to match the network's A head.
struct TrainSample {
  Image hazy;
  Image clean;
  ScalarMap t;
  ColorMap a;
};

/// Checks shapes (all omega x omega), value ranges and constant illumination.
void validate_sample(const TrainSample& s);

}  // namespace dhz::net

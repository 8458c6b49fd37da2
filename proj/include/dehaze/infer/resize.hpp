#pragma once

#include "dehaze/image.hpp"

namespace dhz::infer {

/// Bilinear resampling with half-pixel centers and edge clamping.
/// Same-size requests return an exact copy.
template <typename R>
R resize_bilinear(const R& src, int height, int width);

}  // namespace dhz::infer

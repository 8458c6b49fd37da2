#pragma once

#include "dehaze/image.hpp"

namespace dhz {

/// Lower bound applied to the transmittance in the recovery denominator.
inline constexpr float kMinRecoveryTransmittance = 0.1f;

/// t(x) = exp(-beta * d(x)).
ScalarMap transmittance_from_depth(const DepthMap& depth, double beta);

/// Relaxed scattering model with spatially varying illumination:
/// I = J * t + (1 - t) * A, per pixel and channel.
Image synthesize_haze(const Image& clean, const ScalarMap& t, const ColorMap& a);

/// Inverts the scattering model. The denominator is max(0.1, t) and the
/// result is clamped to [0,1].
Image recover_scene(const Image& hazy, const ScalarMap& t, const ColorMap& a);

}  // namespace dhz

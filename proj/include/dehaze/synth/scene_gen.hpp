#pragma once

#include <cstdint>

#include "dehaze/image.hpp"

namespace dhz::synth {

/// Procedural RGB-D scene: high-contrast blocky textures over a smooth depth
/// ramp with a few closer rectangular objects. Used for demos and tests in
/// place of a captured RGB-D corpus.
struct SceneOptions {
  int height = 256;
  int width = 256;
  double min_depth = 0.0;
  double max_depth = 0.4;
  std::uint64_t seed = 0;
};

struct Scene {
  Image rgb;
  DepthMap depth;
};

Scene make_scene(const SceneOptions& options);

}  // namespace dhz::synth

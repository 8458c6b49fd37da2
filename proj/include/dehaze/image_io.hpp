#pragma once

#include <filesystem>

#include "dehaze/image.hpp"

namespace dhz::io {

// Format is chosen by extension: .png (8/16-bit), .ppm/.pgm (binary, maxval up
// to 65535) and .pfm (32-bit float, little-endian, bottom-to-top rows).
// Integer formats are normalized by 255 or 65535 on load.

Image load_image(const std::filesystem::path& path);
/// bit_depth applies to .png/.ppm only (8 or 16); .pfm is always float.
void save_image(const std::filesystem::path& path, const Image& image, int bit_depth = 8);

/// Single-channel map in [0,1]; color inputs are reduced by channel mean.
ScalarMap load_scalar_map(const std::filesystem::path& path);
void save_scalar_map(const std::filesystem::path& path, const ScalarMap& map, int bit_depth = 8);

ColorMap load_color_map(const std::filesystem::path& path);
void save_color_map(const std::filesystem::path& path, const ColorMap& map, int bit_depth = 8);

/// Depth is PFM-only: single channel, meters.
DepthMap load_depth(const std::filesystem::path& path);
void save_depth(const std::filesystem::path& path, const DepthMap& depth);

}  // namespace dhz::io

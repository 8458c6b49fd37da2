#pragma once

#include <array>
#include <string>

#include "dehaze/image.hpp"

namespace dhz::metrics {

/// Reported for identical inputs, where the ratio is unbounded.
inline constexpr double kPsnrCap = 99.0;

/// 10 log10(1 / MSE) over all pixel-channels, capped at kPsnrCap.
double psnr(const Image& a, const Image& b);

/// Mean local SSIM over 11x11 Gaussian windows (sigma 1.5) on Rec.601 luma,
/// K1 = 0.01, K2 = 0.03, dynamic range 1. Only windows fully inside the image
/// contribute. Requires both sides to be at least 11 pixels.
double ssim(const Image& a, const Image& b);

struct Lab {
  double l = 0.0, a = 0.0, b = 0.0;
};

/// sRGB in [0,1] to CIELAB under D65 with the 2 degree observer.
Lab srgb_to_lab(double r, double g, double b);

/// CIEDE2000 color difference with kL = kC = kH = 1.
double ciede2000(const Lab& x, const Lab& y);

/// Mean per-pixel CIEDE2000.
double ciede2000(const Image& a, const Image& b);

struct Scores {
  double psnr = 0.0;
  double ssim = 0.0;
  double ciede2000 = 0.0;
};

Scores score(const Image& result, const Image& reference);

inline constexpr const char* kCsvHeader = "id,psnr,ssim,ciede2000";

/// One CSV row: id,psnr,ssim,ciede2000.
std::string csv_row(const std::string& id, const Scores& s);

}  // namespace dhz::metrics

#include "dehaze/metrics/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <stdexcept>
#include <vector>

namespace dhz::metrics {
namespace {

constexpr int kSsimRadius = 5;
constexpr double kSsimSigma = 1.5;

std::vector<double> luma(const Image& img) {
  std::vector<double> out(img.pixel_count());
  const auto v = img.values();
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = 0.299 * v[3 * i] + 0.587 * v[3 * i + 1] + 0.114 * v[3 * i + 2];
  }
  return out;
}

// Separable Gaussian filter evaluated only at centers whose window fits the image.
std::vector<double> filter_valid(const std::vector<double>& src, int h, int w, const std::array<double, 11>& k) {
  const int r = kSsimRadius;
  const int vh = h - 2 * r;
  const int vw = w - 2 * r;
  std::vector<double> rows(static_cast<std::size_t>(h) * vw);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < vw; ++x) {
      double s = 0.0;
      for (int j = 0; j <= 2 * r; ++j) s += k[j] * src[static_cast<std::size_t>(y) * w + x + j];
      rows[static_cast<std::size_t>(y) * vw + x] = s;
    }
  }
  std::vector<double> out(static_cast<std::size_t>(vh) * vw);
  for (int y = 0; y < vh; ++y) {
    for (int x = 0; x < vw; ++x) {
      double s = 0.0;
      for (int j = 0; j <= 2 * r; ++j) s += k[j] * rows[static_cast<std::size_t>(y + j) * vw + x];
      out[static_cast<std::size_t>(y) * vw + x] = s;
    }
  }
  return out;
}

double lab_f(double t) {
  constexpr double kEps = 0.008856;
  return t > kEps ? std::cbrt(t) : 7.787 * t + 16.0 / 116.0;
}

double srgb_linear(double c) { return c <= 0.04045 ? c / 12.92 : std::pow((c + 0.055) / 1.055, 2.4); }

double deg(double rad) { return rad * 180.0 / std::numbers::pi; }
double rad(double deg) { return deg * std::numbers::pi / 180.0; }

}  // namespace

double psnr(const Image& a, const Image& b) {
  require_same_shape(a, b, "psnr");
  const auto x = a.values();
  const auto y = b.values();
  double se = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = static_cast<double>(x[i]) - y[i];
    se += d * d;
  }
  const double mse = se / static_cast<double>(x.size());
  if (mse == 0.0) return kPsnrCap;
  return std::min(kPsnrCap, 10.0 * std::log10(1.0 / mse));
}

double ssim(const Image& a, const Image& b) {
  require_same_shape(a, b, "ssim");
  const int h = a.height();
  const int w = a.width();
  if (h < 2 * kSsimRadius + 1 || w < 2 * kSsimRadius + 1) {
    throw std::invalid_argument("ssim needs images of at least 11x11");
  }
  std::array<double, 11> k{};
  double ks = 0.0;
  for (int j = -kSsimRadius; j <= kSsimRadius; ++j) {
    k[j + kSsimRadius] = std::exp(-0.5 * j * j / (kSsimSigma * kSsimSigma));
    ks += k[j + kSsimRadius];
  }
  for (double& v : k) v /= ks;

  const auto x = luma(a);
  const auto y = luma(b);
  std::vector<double> xx(x.size()), yy(x.size()), xy(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    xx[i] = x[i] * x[i];
    yy[i] = y[i] * y[i];
    xy[i] = x[i] * y[i];
  }
  const auto ux = filter_valid(x, h, w, k);
  const auto uy = filter_valid(y, h, w, k);
  const auto uxx = filter_valid(xx, h, w, k);
  const auto uyy = filter_valid(yy, h, w, k);
  const auto uxy = filter_valid(xy, h, w, k);

  constexpr double c1 = 0.01 * 0.01;
  constexpr double c2 = 0.03 * 0.03;
  double total = 0.0;
  for (std::size_t i = 0; i < ux.size(); ++i) {
    const double vx = uxx[i] - ux[i] * ux[i];
    const double vy = uyy[i] - uy[i] * uy[i];
    const double cxy = uxy[i] - ux[i] * uy[i];
    total += ((2 * ux[i] * uy[i] + c1) * (2 * cxy + c2)) /
             ((ux[i] * ux[i] + uy[i] * uy[i] + c1) * (vx + vy + c2));
  }
  return total / static_cast<double>(ux.size());
}

Lab srgb_to_lab(double r, double g, double b) {
  const double lr = srgb_linear(r), lg = srgb_linear(g), lb = srgb_linear(b);
  const double x = 0.412453 * lr + 0.357580 * lg + 0.180423 * lb;
  const double y = 0.212671 * lr + 0.715160 * lg + 0.072169 * lb;
  const double z = 0.019334 * lr + 0.119193 * lg + 0.950227 * lb;
  const double fx = lab_f(x / 0.95047);
  const double fy = lab_f(y / 1.0);
  const double fz = lab_f(z / 1.08883);
  return {116.0 * fy - 16.0, 500.0 * (fx - fy), 200.0 * (fy - fz)};
}

double ciede2000(const Lab& p, const Lab& q) {
  const double c1 = std::hypot(p.a, p.b);
  const double c2 = std::hypot(q.a, q.b);
  const double cbar = 0.5 * (c1 + c2);
  const double cbar7 = std::pow(cbar, 7);
  const double g = 0.5 * (1.0 - std::sqrt(cbar7 / (cbar7 + std::pow(25.0, 7))));
  const double a1 = (1.0 + g) * p.a;
  const double a2 = (1.0 + g) * q.a;
  const double cp1 = std::hypot(a1, p.b);
  const double cp2 = std::hypot(a2, q.b);

  auto hue = [](double b, double a) {
    if (a == 0.0 && b == 0.0) return 0.0;
    double h = deg(std::atan2(b, a));
    return h < 0.0 ? h + 360.0 : h;
  };
  const double h1 = hue(p.b, a1);
  const double h2 = hue(q.b, a2);

  const double dl = q.l - p.l;
  const double dc = cp2 - cp1;
  double dh = 0.0;
  if (cp1 * cp2 != 0.0) {
    dh = h2 - h1;
    if (dh > 180.0) dh -= 360.0;
    else if (dh < -180.0) dh += 360.0;
  }
  const double dhh = 2.0 * std::sqrt(cp1 * cp2) * std::sin(rad(dh / 2.0));

  const double lbar = 0.5 * (p.l + q.l);
  const double cpbar = 0.5 * (cp1 + cp2);
  double hbar = h1 + h2;
  if (cp1 * cp2 != 0.0) {
    if (std::abs(h1 - h2) <= 180.0) hbar /= 2.0;
    else if (h1 + h2 < 360.0) hbar = (hbar + 360.0) / 2.0;
    else hbar = (hbar - 360.0) / 2.0;
  }

  const double t = 1.0 - 0.17 * std::cos(rad(hbar - 30.0)) + 0.24 * std::cos(rad(2.0 * hbar)) +
                   0.32 * std::cos(rad(3.0 * hbar + 6.0)) - 0.20 * std::cos(rad(4.0 * hbar - 63.0));
  const double dtheta = 30.0 * std::exp(-std::pow((hbar - 275.0) / 25.0, 2));
  const double cpbar7 = std::pow(cpbar, 7);
  const double rc = 2.0 * std::sqrt(cpbar7 / (cpbar7 + std::pow(25.0, 7)));
  const double l50 = (lbar - 50.0) * (lbar - 50.0);
  const double sl = 1.0 + 0.015 * l50 / std::sqrt(20.0 + l50);
  const double sc = 1.0 + 0.045 * cpbar;
  const double sh = 1.0 + 0.015 * cpbar * t;
  const double rt = -std::sin(rad(2.0 * dtheta)) * rc;

  const double tl = dl / sl;
  const double tc = dc / sc;
  const double th = dhh / sh;
  return std::sqrt(tl * tl + tc * tc + th * th + rt * tc * th);
}

double ciede2000(const Image& a, const Image& b) {
  require_same_shape(a, b, "ciede2000");
  const auto x = a.values();
  const auto y = b.values();
  const std::size_t n = a.pixel_count();
  std::vector<double> de(n);
#pragma omp parallel for schedule(static)
  for (std::size_t i = 0; i < n; ++i) {
    const Lab p = srgb_to_lab(x[3 * i], x[3 * i + 1], x[3 * i + 2]);
    const Lab q = srgb_to_lab(y[3 * i], y[3 * i + 1], y[3 * i + 2]);
    de[i] = ciede2000(p, q);
  }
  // Serial sum keeps the mean independent of the thread count.
  double total = 0.0;
  for (double v : de) total += v;
  return total / static_cast<double>(n);
}

Scores score(const Image& result, const Image& reference) {
  return {psnr(result, reference), ssim(result, reference), ciede2000(result, reference)};
}

std::string csv_row(const std::string& id, const Scores& s) {
  char buf[128];
  std::snprintf(buf, sizeof buf, ",%.6f,%.6f,%.6f", s.psnr, s.ssim, s.ciede2000);
  return id + buf;
}

}  // namespace dhz::metrics

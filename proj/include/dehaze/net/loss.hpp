#pragma once

#include <cmath>
#include <span>
#include <stdexcept>
#include <string>

#include "dehaze/image.hpp"
#include "dehaze/net/sample.hpp"

namespace dhz::net {

inline constexpr double kDefaultGamma = 15.0;

/// Which reconstruction terms contribute to the training loss.
///
/// l1: ground-truth t, predicted A.  l2: predicted t, ground-truth A.
/// l3: both predicted. mse_maps replaces the reconstruction view with a plain
/// squared error on the two maps (ablation baseline).
struct LossWeights {
  double gamma = kDefaultGamma;
  bool l1 = true;
  bool l2 = true;
  bool l3 = true;
  bool mse_maps = false;

  void validate() const {
    if (!(gamma >= 1.0) || !std::isfinite(gamma)) throw std::invalid_argument("gamma must be >= 1");
    if (!l1 && !l2 && !l3 && !mse_maps) throw std::invalid_argument("at least one loss term must be enabled");
  }

  /// Parses "l1,l2,l3", "l3", "mse", ... (case-insensitive, comma separated).
  static LossWeights from_list(const std::string& list, double gamma = kDefaultGamma);
  std::string to_list() const;
};

/// Attenuates terms that rely on the predicted illumination where haze is thin:
/// eta = 1 - (exp(gamma * t) - 1) / (exp(gamma) - 1).
inline double eta(double t_true, double gamma) {
  if (!(gamma >= 1.0)) throw std::invalid_argument("gamma must be >= 1");
  if (!(t_true >= 0.0 && t_true <= 1.0)) throw std::invalid_argument("eta expects t in [0,1]");
  return 1.0 - std::expm1(gamma * t_true) / std::expm1(gamma);
}

/// Per-pixel means of the unweighted residual sums, independent of the toggles.
struct LossTerms {
  double l1 = 0.0;  ///< mean over pixels of sum_c |I - J t' - (1 - t') A_p|
  double l2 = 0.0;  ///< mean over pixels of sum_c |I - J t_p - (1 - t_p) A'|
  double l3 = 0.0;  ///< mean over pixels of sum_c |I - J t_p - (1 - t_p) A_p|
  double mse = 0.0; ///< mean over pixels of (t_p - t')^2 + sum_c (A_p - A')^2
};

struct LossResult {
  double value = 0.0;
  LossTerms terms;
  ScalarMap grad_t;
  ColorMap grad_a;
};

namespace detail {

inline double sign(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

}  // namespace detail

/// Core loss over flat per-pixel buffers (3 values per pixel for colors).
/// Writes d(loss)/d(t_pred) and d(loss)/d(a_pred) scaled by grad_scale.
/// Templated on the buffer type so gradient checks can run in double.
template <typename T>
double reconstruction_loss(std::span<const T> hazy, std::span<const T> clean, std::span<const T> t_true,
                           std::span<const T> a_true, std::span<const T> t_pred, std::span<const T> a_pred,
                           const LossWeights& w, std::span<T> grad_t, std::span<T> grad_a,
                           LossTerms* terms = nullptr, double grad_scale = 1.0) {
  w.validate();
  const std::size_t n = t_true.size();
  if (n == 0) throw std::invalid_argument("loss over an empty patch");
  if (hazy.size() != 3 * n || clean.size() != 3 * n || a_true.size() != 3 * n || t_pred.size() != n ||
      a_pred.size() != 3 * n || grad_t.size() != n || grad_a.size() != 3 * n) {
    throw std::invalid_argument("loss: shape mismatch");
  }
  const double inv_n = 1.0 / static_cast<double>(n);
  const double denom = std::expm1(w.gamma);
  LossTerms acc;
  double total = 0.0;
  for (std::size_t p = 0; p < n; ++p) {
    const double tt = t_true[p];
    const double tp = t_pred[p];
    const double e = 1.0 - std::expm1(w.gamma * tt) / denom;
    double dt = 0.0;
    double l1 = 0.0, l2 = 0.0, l3 = 0.0, mse = 0.0;
    for (int c = 0; c < 3; ++c) {
      const std::size_t i = 3 * p + c;
      const double I = hazy[i], J = clean[i], At = a_true[i], Ap = a_pred[i];
      const double r1 = I - J * tt - (1.0 - tt) * Ap;
      const double r2 = I - J * tp - (1.0 - tp) * At;
      const double r3 = I - J * tp - (1.0 - tp) * Ap;
      l1 += std::abs(r1);
      l2 += std::abs(r2);
      l3 += std::abs(r3);
      mse += (Ap - At) * (Ap - At);
      double da = 0.0;
      if (w.l1) da += e * detail::sign(r1) * -(1.0 - tt);
      if (w.l2) dt += detail::sign(r2) * -(J - At);
      if (w.l3) {
        dt += e * detail::sign(r3) * -(J - Ap);
        da += e * detail::sign(r3) * -(1.0 - tp);
      }
      if (w.mse_maps) da += 2.0 * (Ap - At);
      grad_a[i] = static_cast<T>(da * inv_n * grad_scale);
    }
    mse += (tp - tt) * (tp - tt);
    if (w.mse_maps) dt += 2.0 * (tp - tt);
    grad_t[p] = static_cast<T>(dt * inv_n * grad_scale);

    acc.l1 += l1;
    acc.l2 += l2;
    acc.l3 += l3;
    acc.mse += mse;
    total += (w.l1 ? e * l1 : 0.0) + (w.l2 ? l2 : 0.0) + (w.l3 ? e * l3 : 0.0) + (w.mse_maps ? mse : 0.0);
  }
  if (terms) {
    terms->l1 = acc.l1 * inv_n;
    terms->l2 = acc.l2 * inv_n;
    terms->l3 = acc.l3 * inv_n;
    terms->mse = acc.mse * inv_n;
  }
  return total * inv_n;
}

/// Loss and gradients for one patch given the network's predictions.
LossResult total_loss(const TrainSample& sample, const ScalarMap& t_pred, const ColorMap& a_pred,
                      const LossWeights& weights);

}  // namespace dhz::net

#pragma once

#include <span>
#include <utility>
#include <vector>

#include "dehaze/image.hpp"

namespace dhz::mrf {

inline constexpr double kDefaultLambda = 1.0;
inline constexpr double kDefaultEdgeEpsilon = 1e-3;

/// Quadratic energy over one map channel on the 4-connected pixel grid:
///
///   E(a) = sum_x s(x) (a(x) - obs(x))^2
///        + lambda * sum_{edges xy} (a(x) - a(y))^2 / (|I(x) - I(y)|^2 + epsilon)
///
/// Each undirected edge is counted once. Color distances are taken in RGB.
struct EnergyProblem {
  const Image& guide;
  std::span<const double> observed;
  std::span<const std::uint8_t> mask;
  double lambda = kDefaultLambda;
  double epsilon = kDefaultEdgeEpsilon;

  void validate() const;
};

/// Symmetric system A x = b in compressed sparse row form.
struct SparseSystem {
  int size = 0;
  std::vector<int> row_ptr;
  std::vector<int> col;
  std::vector<double> value;
  std::vector<double> rhs;

  void multiply(std::span<const double> x, std::span<double> y) const;
  double diagonal(int row) const;
};

/// Normal equations of the energy: (diag(s) + lambda * L_w) a = s * obs.
/// Throws NumericalError when no pixel carries data (the system is singular).
SparseSystem build_system(const EnergyProblem& problem);

/// Evaluates the energy at a candidate solution.
double energy(const EnergyProblem& problem, std::span<const double> a);

struct CgOptions {
  double tol = 1e-6;
  int max_iter = 10000;
  /// Iterations without a new best residual before the solve is declared divergent.
  int stall_window = 1000;
};

struct CgResult {
  std::vector<double> x;
  int iterations = 0;
  double relative_residual = 0.0;  ///< |b - A x| / |b|, recomputed from x
  bool converged = false;          ///< false when max_iter was hit
};

/// Jacobi-preconditioned conjugate gradients. Throws NumericalError on
/// non-finite values or a stalled residual.
CgResult solve_cg(const SparseSystem& system, const CgOptions& options = {}, std::span<const double> x0 = {});

struct RegularizerParams {
  double lambda = kDefaultLambda;
  double epsilon = kDefaultEdgeEpsilon;
  CgOptions cg;
};

/// Smooths and fills one channel. Throws std::invalid_argument if the mask is empty.
std::vector<double> regularize_channel(const Image& guide, std::span<const double> observed, const Mask& mask,
                                       const RegularizerParams& params, CgResult* info = nullptr);

/// Smooths transmittance and each illumination channel separately against the
/// guide image; outputs are clamped to [0,1].
std::pair<ScalarMap, ColorMap> regularize_maps(const ScalarMap& t, const ColorMap& a, const Mask& mask,
                                               const Image& guide, const RegularizerParams& params = {});

/// Same, with separate data masks for the two maps.
std::pair<ScalarMap, ColorMap> regularize_maps(const ScalarMap& t, const Mask& t_mask, const ColorMap& a,
                                               const Mask& a_mask, const Image& guide,
                                               const RegularizerParams& params = {});

}  // namespace dhz::mrf

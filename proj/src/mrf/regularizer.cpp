#include "dehaze/mrf/regularizer.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <exception>
#include <limits>
#include <stdexcept>
#include <string>

#include "dehaze/errors.hpp"

namespace dhz::mrf {
namespace {

double edge_weight(const Image& guide, int y0, int x0, int y1, int x1, double epsilon) {
  const float* p = guide.pixel(y0, x0);
  const float* q = guide.pixel(y1, x1);
  double d2 = 0.0;
  for (int c = 0; c < 3; ++c) {
    const double d = static_cast<double>(p[c]) - q[c];
    d2 += d * d;
  }
  return 1.0 / (d2 + epsilon);
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm(std::span<const double> a) { return std::sqrt(dot(a, a)); }

void residual(const SparseSystem& sys, std::span<const double> x, std::span<double> r) {
  sys.multiply(x, r);
  for (int i = 0; i < sys.size; ++i) r[i] = sys.rhs[i] - r[i];
}

}  // namespace

void EnergyProblem::validate() const {
  const std::size_t n = guide.pixel_count();
  if (n == 0) throw std::invalid_argument("guide image is empty");
  if (observed.size() != n || mask.size() != n) {
    throw std::invalid_argument("observed map and mask must match the guide image size");
  }
  for (auto s : mask) {
    if (s > 1) throw std::invalid_argument("data mask must be 0/1");
  }
  if (!(lambda > 0.0) || !std::isfinite(lambda)) throw std::invalid_argument("lambda must be positive");
  if (!(epsilon > 0.0) || !std::isfinite(epsilon)) throw std::invalid_argument("edge epsilon must be positive");
}

void SparseSystem::multiply(std::span<const double> x, std::span<double> y) const {
  for (int i = 0; i < size; ++i) {
    double s = 0.0;
    for (int k = row_ptr[i]; k < row_ptr[i + 1]; ++k) s += value[k] * x[col[k]];
    y[i] = s;
  }
}

double SparseSystem::diagonal(int row) const {
  for (int k = row_ptr[row]; k < row_ptr[row + 1]; ++k) {
    if (col[k] == row) return value[k];
  }
  return 0.0;
}

SparseSystem build_system(const EnergyProblem& problem) {
  problem.validate();
  const Image& g = problem.guide;
  const int h = g.height();
  const int w = g.width();
  const int n = h * w;

  bool any = false;
  for (auto s : problem.mask) any = any || s != 0;
  // A 4-connected grid is connected, so without a data term the matrix is the
  // bare Laplacian whose kernel is the constants.
  if (!any) throw NumericalError("regularizer system is singular: data mask is empty");

  SparseSystem sys;
  sys.size = n;
  sys.row_ptr.assign(n + 1, 0);
  sys.col.reserve(static_cast<std::size_t>(n) * 5);
  sys.value.reserve(static_cast<std::size_t>(n) * 5);
  sys.rhs.assign(n, 0.0);

  // Columns within a row are emitted in ascending order: up, left, self, right, down.
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const int i = y * w + x;
      const double s = problem.mask[i];
      std::array<std::pair<int, double>, 4> nb{};
      int count = 0;
      if (y > 0) nb[count++] = {i - w, problem.lambda * edge_weight(g, y, x, y - 1, x, problem.epsilon)};
      if (x > 0) nb[count++] = {i - 1, problem.lambda * edge_weight(g, y, x, y, x - 1, problem.epsilon)};
      const int before_self = count;
      if (x + 1 < w) nb[count++] = {i + 1, problem.lambda * edge_weight(g, y, x, y, x + 1, problem.epsilon)};
      if (y + 1 < h) nb[count++] = {i + w, problem.lambda * edge_weight(g, y, x, y + 1, x, problem.epsilon)};

      double diag = s;
      for (int k = 0; k < count; ++k) diag += nb[k].second;
      for (int k = 0; k < count; ++k) {
        if (k == before_self) {
          sys.col.push_back(i);
          sys.value.push_back(diag);
        }
        sys.col.push_back(nb[k].first);
        sys.value.push_back(-nb[k].second);
      }
      if (before_self == count) {
        sys.col.push_back(i);
        sys.value.push_back(diag);
      }
      sys.row_ptr[i + 1] = static_cast<int>(sys.col.size());
      sys.rhs[i] = s * problem.observed[i];
    }
  }
  return sys;
}

double energy(const EnergyProblem& problem, std::span<const double> a) {
  problem.validate();
  const Image& g = problem.guide;
  const int h = g.height();
  const int w = g.width();
  if (a.size() != g.pixel_count()) throw std::invalid_argument("candidate size does not match the guide image");
  double data = 0.0, smooth = 0.0;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const int i = y * w + x;
      const double r = a[i] - problem.observed[i];
      data += problem.mask[i] * r * r;
      if (x + 1 < w) {
        const double d = a[i] - a[i + 1];
        smooth += d * d * edge_weight(g, y, x, y, x + 1, problem.epsilon);
      }
      if (y + 1 < h) {
        const double d = a[i] - a[i + w];
        smooth += d * d * edge_weight(g, y, x, y + 1, x, problem.epsilon);
      }
    }
  }
  return data + problem.lambda * smooth;
}

CgResult solve_cg(const SparseSystem& sys, const CgOptions& options, std::span<const double> x0) {
  if (!(options.tol > 0.0)) throw std::invalid_argument("CG tolerance must be positive");
  if (options.max_iter < 1) throw std::invalid_argument("CG max_iter must be positive");
  if (options.stall_window < 1) throw std::invalid_argument("CG stall window must be positive");
  const int n = sys.size;
  if (static_cast<int>(sys.rhs.size()) != n || static_cast<int>(sys.row_ptr.size()) != n + 1) {
    throw std::invalid_argument("malformed sparse system");
  }
  if (!x0.empty() && static_cast<int>(x0.size()) != n) throw std::invalid_argument("initial guess has wrong size");

  std::vector<double> inv_diag(n);
  for (int i = 0; i < n; ++i) {
    const double d = sys.diagonal(i);
    if (!(d > 0.0)) throw NumericalError("CG needs a positive diagonal, row " + std::to_string(i) + " has " + std::to_string(d));
    inv_diag[i] = 1.0 / d;
  }

  CgResult res;
  res.x.assign(n, 0.0);
  if (!x0.empty()) std::copy(x0.begin(), x0.end(), res.x.begin());

  const double b_norm = norm(sys.rhs);
  if (b_norm == 0.0 && x0.empty()) {
    res.converged = true;
    return res;
  }
  const double scale = b_norm > 0.0 ? b_norm : 1.0;

  std::vector<double> r(n), z(n), p(n), q(n);
  residual(sys, res.x, r);
  double best = norm(r) / scale;
  int best_at = 0;

  auto restart = [&]() -> double {
    for (int i = 0; i < n; ++i) {
      z[i] = inv_diag[i] * r[i];
      p[i] = z[i];
    }
    return dot(r, z);
  };
  double rz = restart();

  for (int it = 1; it <= options.max_iter; ++it) {
    if (best <= options.tol) break;
    sys.multiply(p, q);
    const double pq = dot(p, q);
    if (!std::isfinite(pq) || pq <= 0.0) {
      throw NumericalError("CG breakdown: direction has non-positive curvature");
    }
    const double alpha = rz / pq;
    for (int i = 0; i < n; ++i) {
      res.x[i] += alpha * p[i];
      r[i] -= alpha * q[i];
    }
    res.iterations = it;
    double rel = norm(r) / scale;
    if (!std::isfinite(rel)) throw NumericalError("CG produced a non-finite residual");

    if (rel <= options.tol) {
      // Confirm against the true residual; drift in the recurrence triggers a restart.
      residual(sys, res.x, r);
      rel = norm(r) / scale;
      if (rel > options.tol) {
        rz = restart();
        if (rel < best) {
          best = rel;
          best_at = it;
        }
        continue;
      }
    }
    if (rel < best) {
      best = rel;
      best_at = it;
    } else if (it - best_at >= options.stall_window) {
      throw NumericalError("CG diverged: residual has not decreased in " + std::to_string(options.stall_window) +
                           " iterations (best " + std::to_string(best) + ")");
    }
    if (rel <= options.tol) break;

    for (int i = 0; i < n; ++i) z[i] = inv_diag[i] * r[i];
    const double rz_next = dot(r, z);
    const double beta = rz_next / rz;
    rz = rz_next;
    for (int i = 0; i < n; ++i) p[i] = z[i] + beta * p[i];
  }

  residual(sys, res.x, r);
  res.relative_residual = norm(r) / scale;
  res.converged = res.relative_residual <= options.tol;
  for (double v : res.x) {
    if (!std::isfinite(v)) throw NumericalError("CG produced a non-finite solution");
  }
  return res;
}

std::vector<double> regularize_channel(const Image& guide, std::span<const double> observed, const Mask& mask,
                                       const RegularizerParams& params, CgResult* info) {
  require_same_shape(guide, mask, "regularizer mask");
  bool any = false;
  for (auto s : mask.values()) any = any || s != 0;
  if (!any) throw std::invalid_argument("regularizer: nothing to interpolate, the coverage mask is empty");
  const EnergyProblem problem{guide, observed, mask.values(), params.lambda, params.epsilon};
  const SparseSystem sys = build_system(problem);
  CgResult res = solve_cg(sys, params.cg);
  std::vector<double> x = std::move(res.x);
  if (info) {
    res.x.clear();
    *info = std::move(res);
  }
  return x;
}

std::pair<ScalarMap, ColorMap> regularize_maps(const ScalarMap& t, const Mask& t_mask, const ColorMap& a,
                                               const Mask& a_mask, const Image& guide,
                                               const RegularizerParams& params) {
  require_same_shape(guide, t, "regularizer transmittance");
  require_same_shape(guide, a, "regularizer illumination");
  require_same_shape(guide, t_mask, "regularizer transmittance mask");
  require_same_shape(guide, a_mask, "regularizer illumination mask");
  const std::size_t n = guide.pixel_count();

  std::array<std::vector<double>, 4> in;
  for (auto& v : in) v.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    in[0][i] = t.values()[i];
    for (int c = 0; c < 3; ++c) in[1 + c][i] = a.values()[3 * i + c];
  }

  std::array<std::vector<double>, 4> out;
  std::array<std::exception_ptr, 4> errors;
#pragma omp parallel for schedule(dynamic, 1)
  for (int ch = 0; ch < 4; ++ch) {
    try {
      out[ch] = regularize_channel(guide, in[ch], ch == 0 ? t_mask : a_mask, params);
    } catch (...) {
      errors[ch] = std::current_exception();
    }
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  ScalarMap t_out(guide.height(), guide.width());
  ColorMap a_out(guide.height(), guide.width());
  for (std::size_t i = 0; i < n; ++i) {
    t_out.values()[i] = static_cast<float>(std::clamp(out[0][i], 0.0, 1.0));
    for (int c = 0; c < 3; ++c) a_out.values()[3 * i + c] = static_cast<float>(std::clamp(out[1 + c][i], 0.0, 1.0));
  }
  return {std::move(t_out), std::move(a_out)};
}

std::pair<ScalarMap, ColorMap> regularize_maps(const ScalarMap& t, const ColorMap& a, const Mask& mask,
                                               const Image& guide, const RegularizerParams& params) {
  return regularize_maps(t, mask, a, mask, guide, params);
}

}  // namespace dhz::mrf

#include "dehaze/infer/multilevel.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "dehaze/infer/resize.hpp"
#include "dehaze/net/dehaze_net.hpp"
#include "dehaze/synth/synthesis.hpp"

namespace dhz::infer {
namespace {

constexpr std::size_t kChunk = 64;

// Window corners along one axis: stride steps from 0 plus a final window flush
// with the far edge, so the tiling covers the whole extent.
std::vector<int> corners(int extent, int size, int stride) {
  std::vector<int> out;
  for (int p = 0; p + size <= extent; p += stride) out.push_back(p);
  if (out.empty() || out.back() + size < extent) out.push_back(extent - size);
  return out;
}

}  // namespace

PatchEstimator network_estimator(net::DehazeNet& network, int batch_size) {
  if (batch_size < 1) throw std::invalid_argument("batch size must be positive");
  return [&network, batch_size](std::span<const Image> patches, std::vector<ScalarMap>& t,
                                std::vector<ColorMap>& a) {
    t.clear();
    a.clear();
    for (std::size_t start = 0; start < patches.size(); start += batch_size) {
      const std::size_t n = std::min<std::size_t>(batch_size, patches.size() - start);
      auto p = network.predict(patches.subspan(start, n));
      for (auto& m : p.t) t.push_back(std::move(m));
      for (auto& m : p.a) a.push_back(std::move(m));
    }
  };
}

int level_count(int height, int width, int omega) {
  if (omega < 1) throw std::invalid_argument("omega must be positive");
  const int p = std::min(height, width);
  if (p < omega) {
    throw std::invalid_argument("image " + std::to_string(height) + "x" + std::to_string(width) +
                                " is smaller than the network patch size " + std::to_string(omega));
  }
  // floor(log2(P / omega)) + 1, in integers.
  int m = 1;
  while (static_cast<long long>(omega) << m <= p) ++m;
  return m;
}

int level_patch_size(int height, int width, int level) {
  if (level < 1) throw std::invalid_argument("levels are 1-based");
  return std::min(height, width) >> (level - 1);
}

LevelEstimate estimate_level(const Image& image, int level, const PatchEstimator& estimator,
                             const LevelOptions& options) {
  const int h = image.height();
  const int w = image.width();
  const int size = level_patch_size(h, w, level);
  if (size < options.omega) throw std::invalid_argument("level patch size falls below omega");
  if (options.stride_divisor < 1) throw std::invalid_argument("stride divisor must be positive");
  const int stride = std::max(1, size / options.stride_divisor);

  struct Corner {
    int y, x;
  };
  std::vector<Corner> kept;
  for (int y : corners(h, size, stride)) {
    for (int x : corners(w, size, stride)) {
      const Image patch = crop(image, y, x, size, size);
      if (synth::passes_variance_gate(synth::patch_variance(patch), options.variance_threshold)) {
        kept.push_back({y, x});
      }
    }
  }

  std::vector<double> t_sum(static_cast<std::size_t>(h) * w, 0.0);
  std::vector<double> a_sum(static_cast<std::size_t>(h) * w * 3, 0.0);
  std::vector<int> count(static_cast<std::size_t>(h) * w, 0);

  for (std::size_t start = 0; start < kept.size(); start += kChunk) {
    const std::size_t end = std::min(kept.size(), start + kChunk);
    std::vector<Image> batch;
    for (std::size_t i = start; i < end; ++i) {
      batch.push_back(resize_bilinear(crop(image, kept[i].y, kept[i].x, size, size), options.omega, options.omega));
    }
    std::vector<ScalarMap> ts;
    std::vector<ColorMap> as;
    estimator(batch, ts, as);
    if (ts.size() != batch.size() || as.size() != batch.size()) {
      throw std::logic_error("patch estimator returned the wrong number of maps");
    }
    for (std::size_t i = start; i < end; ++i) {
      const ScalarMap tp = resize_bilinear(ts[i - start], size, size);
      const ColorMap ap = resize_bilinear(as[i - start], size, size);
      const Corner c = kept[i];
      for (int y = 0; y < size; ++y) {
        for (int x = 0; x < size; ++x) {
          const std::size_t p = static_cast<std::size_t>(c.y + y) * w + (c.x + x);
          t_sum[p] += tp.at(y, x);
          for (int k = 0; k < 3; ++k) a_sum[3 * p + k] += ap.at(y, x, k);
          ++count[p];
        }
      }
    }
  }

  LevelEstimate est{level, ScalarMap(h, w), ColorMap(h, w), Mask(h, w)};
  for (std::size_t p = 0; p < count.size(); ++p) {
    if (count[p] == 0) continue;
    est.coverage.values()[p] = 1;
    est.t.values()[p] = static_cast<float>(t_sum[p] / count[p]);
    for (int k = 0; k < 3; ++k) est.a.values()[3 * p + k] = static_cast<float>(a_sum[3 * p + k] / count[p]);
  }
  return est;
}

AggregationWeights AggregationWeights::uniform(int levels) {
  return {std::vector<double>(levels, 1.0), std::vector<double>(levels, 1.0)};
}

void AggregationWeights::validate(std::size_t levels) const {
  if (t.size() != levels || a.size() != levels) {
    throw std::invalid_argument("need one aggregation weight per level (" + std::to_string(levels) + ")");
  }
  auto check = [](const std::vector<double>& w, const char* which) {
    bool positive = false;
    for (double v : w) {
      if (!(v >= 0.0) || !std::isfinite(v)) throw std::invalid_argument(std::string(which) + " weights must be >= 0");
      positive = positive || v > 0.0;
    }
    if (!positive) throw std::invalid_argument(std::string(which) + " weights need at least one positive entry");
  };
  check(t, "transmittance");
  check(a, "illumination");
}

AggregatedMaps aggregate_levels(std::span<const LevelEstimate> estimates, const AggregationWeights& weights) {
  if (estimates.empty()) throw std::invalid_argument("no level estimates to aggregate");
  weights.validate(estimates.size());
  const int h = estimates.front().t.height();
  const int w = estimates.front().t.width();
  for (const auto& e : estimates) {
    if (e.t.height() != h || e.t.width() != w || !e.t.same_shape(e.a) || !e.t.same_shape(e.coverage)) {
      throw std::invalid_argument("level estimates differ in size");
    }
  }
  AggregatedMaps out{ScalarMap(h, w), ColorMap(h, w), Mask(h, w), Mask(h, w), Mask(h, w)};
  const std::size_t n = static_cast<std::size_t>(h) * w;
  for (std::size_t p = 0; p < n; ++p) {
    double tw = 0.0, ts = 0.0, aw = 0.0;
    double as[3] = {0.0, 0.0, 0.0};
    bool any = false;
    for (std::size_t i = 0; i < estimates.size(); ++i) {
      const auto& e = estimates[i];
      if (!e.coverage.values()[p]) continue;
      any = true;
      tw += weights.t[i];
      ts += weights.t[i] * e.t.values()[p];
      aw += weights.a[i];
      for (int k = 0; k < 3; ++k) as[k] += weights.a[i] * e.a.values()[3 * p + k];
    }
    out.coverage.values()[p] = any ? 1 : 0;
    if (tw > 0.0) {
      out.t_coverage.values()[p] = 1;
      out.t.values()[p] = static_cast<float>(ts / tw);
    }
    if (aw > 0.0) {
      out.a_coverage.values()[p] = 1;
      for (int k = 0; k < 3; ++k) out.a.values()[3 * p + k] = static_cast<float>(as[k] / aw);
    }
  }
  return out;
}

}  // namespace dhz::infer

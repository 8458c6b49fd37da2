#include "dehaze/pipeline/dehaze_pipeline.hpp"

#include <stdexcept>

#include "dehaze/haze_model.hpp"

namespace dhz::pipeline {

DehazeResult dehaze_image(const Image& hazy, const infer::PatchEstimator& estimator, const DehazeOptions& options) {
  require_unit_range(hazy, "hazy image");
  const int m = infer::level_count(hazy.height(), hazy.width(), options.levels.omega);
  std::vector<infer::LevelEstimate> estimates;
  estimates.reserve(m);
  for (int level = 1; level <= m; ++level) {
    estimates.push_back(infer::estimate_level(hazy, level, estimator, options.levels));
  }
  const auto weights = options.weights.value_or(infer::AggregationWeights::uniform(m));
  infer::AggregatedMaps agg = infer::aggregate_levels(estimates, weights);

  bool any = false;
  for (auto c : agg.coverage.values()) any = any || c != 0;
  if (!any) throw std::invalid_argument("no patch passed the variance gate; nothing to estimate from");

  auto [t, a] = mrf::regularize_maps(agg.t, agg.t_coverage, agg.a, agg.a_coverage, hazy, options.regularizer);
  DehazeResult r;
  r.dehazed = recover_scene(hazy, t, a);
  r.t = std::move(t);
  r.a = std::move(a);
  r.raw_t = std::move(agg.t);
  r.raw_a = std::move(agg.a);
  r.coverage = std::move(agg.coverage);
  r.levels = m;
  return r;
}

Image oracle_dehaze(const Image& hazy, const ScalarMap& t, const ColorMap& a) {
  require_same_shape(hazy, t, "oracle transmittance");
  require_same_shape(hazy, a, "oracle illumination");
  require_unit_range(hazy, "hazy image");
  require_unit_range(t, "transmittance");
  require_unit_range(a, "illumination");
  return recover_scene(hazy, t, a);
}

Image side_by_side(std::initializer_list<const Image*> panels) {
  if (panels.size() == 0) throw std::invalid_argument("side_by_side needs at least one image");
  const int h = (*panels.begin())->height();
  int w = 0;
  for (const Image* p : panels) {
    if (p->height() != h) throw std::invalid_argument("side_by_side panels differ in height");
    w += p->width();
  }
  Image out(h, w);
  int x0 = 0;
  for (const Image* p : panels) {
    for (int y = 0; y < h; ++y) {
      const float* s = p->pixel(y, 0);
      float* d = out.pixel(y, x0);
      for (int i = 0; i < p->width() * 3; ++i) d[i] = s[i];
    }
    x0 += p->width();
  }
  return out;
}

Image gray_to_rgb(const ScalarMap& map) {
  Image out(map.height(), map.width());
  const auto s = map.values();
  auto d = out.values();
  for (std::size_t i = 0; i < s.size(); ++i) d[3 * i] = d[3 * i + 1] = d[3 * i + 2] = s[i];
  return out;
}

}  // namespace dhz::pipeline

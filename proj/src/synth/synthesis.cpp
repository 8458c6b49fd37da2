#include "dehaze/synth/synthesis.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "dehaze/config.hpp"
#include "dehaze/errors.hpp"
#include "dehaze/haze_model.hpp"
#include "dehaze/image_io.hpp"
#include "dehaze/nn/layers.hpp"

namespace dhz::synth {

void SynthesisConfig::validate() const {
  if (!(beta_min > 0.0 && beta_min <= beta_max)) throw std::invalid_argument("need 0 < beta_min <= beta_max");
  if (!(a_min >= 0.0 && a_min <= a_max && a_max <= 1.0)) {
    throw std::invalid_argument("need 0 <= a_min <= a_max <= 1");
  }
  if (patch_size < 8) throw std::invalid_argument("patch size must be at least 8");
  if (!(variance_threshold >= 0.0)) throw std::invalid_argument("variance threshold must be nonnegative");
  if (patches_per_image < 0) throw std::invalid_argument("patches per image must be nonnegative");
}

DatasetManifest DatasetManifest::load_csv(const std::filesystem::path& csv) {
  std::ifstream in(csv);
  if (!in) throw IoError("cannot open manifest " + csv.string());
  DatasetManifest m;
  const auto base = csv.parent_path();
  std::string line;
  if (!std::getline(in, line) || trim(line) != "rgb,depth") {
    throw std::invalid_argument("manifest " + csv.string() + " must start with header 'rgb,depth'");
  }
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty()) continue;
    const auto comma = t.find(',');
    if (comma == std::string::npos || t.find(',', comma + 1) != std::string::npos) {
      throw std::invalid_argument("manifest line " + std::to_string(lineno) + ": expected rgb,depth");
    }
    std::filesystem::path rgb = trim(t.substr(0, comma));
    std::filesystem::path depth = trim(t.substr(comma + 1));
    if (rgb.is_relative()) rgb = base / rgb;
    if (depth.is_relative()) depth = base / depth;
    m.entries.push_back({rgb, depth});
  }
  return m;
}

double patch_variance(const Image& patch) {
  if (patch.empty()) throw std::invalid_argument("variance of an empty patch");
  const std::size_t n = patch.pixel_count();
  auto v = patch.values();
  double sum = 0.0;
  double sq = 0.0;
  for (std::size_t p = 0; p < n; ++p) {
    const double g = (static_cast<double>(v[3 * p]) + v[3 * p + 1] + v[3 * p + 2]) / 3.0;
    sum += g;
    sq += g * g;
  }
  const double mean = sum / n;
  return std::max(0.0, sq / n - mean * mean);
}

HazeDraw draw_haze(const SynthesisConfig& config, std::size_t index) {
  nn::SplitMix64 rng(config.seed * 0x9E3779B97F4A7C15ull + index + 1);
  HazeDraw d;
  d.beta = rng.uniform(config.beta_min, config.beta_max);
  for (auto& a : d.airlight) a = static_cast<float>(rng.uniform(config.a_min, config.a_max));
  const int half = std::max(1, config.patch_size / 2);
  d.offset_y = static_cast<int>(rng.below(half));
  d.offset_x = static_cast<int>(rng.below(half));
  d.subset_seed = rng.next();
  return d;
}

std::vector<int> grid_positions(int extent, int size, int stride, int offset) {
  std::vector<int> out;
  if (extent < size || stride < 1) return out;
  const int last = extent - size;
  for (int p = std::min(offset, last); p <= last; p += stride) out.push_back(p);
  return out;
}

std::vector<net::TrainSample> synthesize_pair(const Image& clean, const DepthMap& depth, const HazeDraw& draw,
                                              const SynthesisConfig& config, PatchCounts* counts) {
  config.validate();
  require_same_shape(clean, depth, "RGB-D pair");
  const ScalarMap t = transmittance_from_depth(depth, draw.beta);
  ColorMap a(clean.height(), clean.width());
  for (std::size_t p = 0; p < a.pixel_count(); ++p) {
    for (int c = 0; c < 3; ++c) a.values()[3 * p + c] = draw.airlight[c];
  }
  const Image hazy = synthesize_haze(clean, t, a);

  const int w = config.patch_size;
  const int stride = std::max(1, w / 2);
  PatchCounts local;
  struct Corner {
    int y, x;
  };
  std::vector<Corner> kept;
  for (int y : grid_positions(clean.height(), w, stride, draw.offset_y)) {
    for (int x : grid_positions(clean.width(), w, stride, draw.offset_x)) {
      if (passes_variance_gate(patch_variance(crop(hazy, y, x, w, w)), config.variance_threshold)) {
        kept.push_back({y, x});
      } else {
        ++local.rejected;
      }
    }
  }
  if (config.patches_per_image > 0 && kept.size() > static_cast<std::size_t>(config.patches_per_image)) {
    // Seeded subset, emitted in grid order.
    nn::SplitMix64 rng(draw.subset_seed);
    std::vector<std::size_t> idx(kept.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    for (std::size_t i = idx.size(); i > 1; --i) std::swap(idx[i - 1], idx[rng.below(i)]);
    idx.resize(config.patches_per_image);
    std::sort(idx.begin(), idx.end());
    std::vector<Corner> chosen;
    for (auto i : idx) chosen.push_back(kept[i]);
    local.rejected += kept.size() - chosen.size();
    kept = std::move(chosen);
  }

  std::vector<net::TrainSample> out;
  out.reserve(kept.size());
  for (const auto& c : kept) {
    out.push_back({crop(hazy, c.y, c.x, w, w), crop(clean, c.y, c.x, w, w), crop(t, c.y, c.x, w, w),
                   crop(a, c.y, c.x, w, w)});
  }
  local.kept = out.size();
  if (counts) *counts = local;
  return out;
}

SynthesisReport generate_samples(const DatasetManifest& manifest, const SynthesisConfig& config,
                                 const SampleSink& sink) {
  config.validate();
  SynthesisReport report;
  for (std::size_t i = 0; i < manifest.entries.size(); ++i) {
    const auto& e = manifest.entries[i];
    std::vector<net::TrainSample> samples;
    PatchCounts counts;
    try {
      const Image clean = io::load_image(e.rgb);
      const DepthMap depth = io::load_depth(e.depth);
      if (!clean.same_shape(depth)) {
        throw std::invalid_argument("RGB and depth dimensions differ");
      }
      samples = synthesize_pair(clean, depth, draw_haze(config, i), config, &counts);
    } catch (const std::exception& ex) {
      report.errors.push_back(e.rgb.string() + ": " + ex.what());
      continue;
    }
    ++report.images;
    report.kept += counts.kept;
    report.rejected += counts.rejected;
    for (auto& s : samples) sink(std::move(s));
  }
  return report;
}

}  // namespace dhz::synth

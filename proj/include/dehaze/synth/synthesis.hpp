#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "dehaze/image.hpp"
#include "dehaze/net/sample.hpp"

namespace dhz::synth {

inline constexpr double kVarianceThreshold = 0.08;

struct SynthesisConfig {
  double beta_min = 0.5;
  double beta_max = 1.0;
  double a_min = 0.45;
  double a_max = 1.0;
  int patch_size = 64;
  double variance_threshold = kVarianceThreshold;
  /// Upper bound on kept patches per source image; 0 keeps every passing patch.
  int patches_per_image = 0;
  std::uint64_t seed = 0;

  void validate() const;
};

struct ManifestEntry {
  std::filesystem::path rgb;
  std::filesystem::path depth;
};

struct DatasetManifest {
  std::vector<ManifestEntry> entries;
  std::filesystem::path output_dir;

  std::size_t record_count() const { return entries.size(); }

  /// CSV with header `rgb,depth`; relative paths resolve against the CSV's directory.
  static DatasetManifest load_csv(const std::filesystem::path& csv);
};

/// Population variance of the per-pixel channel mean.
double patch_variance(const Image& patch);

/// Patches are kept only when strictly above the threshold.
inline bool passes_variance_gate(double variance, double threshold) { return variance > threshold; }

/// Haze parameters drawn once per source image.
struct HazeDraw {
  double beta = 0.0;
  std::array<float, 3> airlight{};
  int offset_y = 0;
  int offset_x = 0;
  std::uint64_t subset_seed = 0;  ///< drives the patches_per_image subset
};

/// Deterministic draw for image `index` under `config.seed`.
HazeDraw draw_haze(const SynthesisConfig& config, std::size_t index);

/// Top-left corners of a stride-`stride` grid of `size` windows covering
/// [0, extent), starting at `offset`.
std::vector<int> grid_positions(int extent, int size, int stride, int offset);

struct PatchCounts {
  std::size_t kept = 0;
  std::size_t rejected = 0;
};

/// Synthesizes haze over one RGB-D pair with a given draw and extracts gated patches.
std::vector<net::TrainSample> synthesize_pair(const Image& clean, const DepthMap& depth, const HazeDraw& draw,
                                              const SynthesisConfig& config, PatchCounts* counts = nullptr);

struct SynthesisReport {
  std::size_t images = 0;
  std::size_t kept = 0;
  std::size_t rejected = 0;
  std::vector<std::string> errors;  ///< one message per skipped record
};

using SampleSink = std::function<void(net::TrainSample&&)>;

/// Streams samples for every manifest entry in manifest order. Unreadable or
/// mismatched records are skipped and reported.
SynthesisReport generate_samples(const DatasetManifest& manifest, const SynthesisConfig& config,
                                 const SampleSink& sink);

}  // namespace dhz::synth

#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "dehaze/net/sample.hpp"
#include "dehaze/nn/container.hpp"

namespace dhz::synth {

// On-disk dataset layout:
//   <dir>/index.csv             header `id,file`, one row per sample
//   <dir>/samples/<id>.dhzw     container with records hazy, clean, t, a
// Raster records are stored HWC with dims (H, W, C).

std::vector<nn::TensorRecord> sample_to_records(const net::TrainSample& sample);
net::TrainSample sample_from_records(const std::vector<nn::TensorRecord>& records);

/// Writes samples in order; appends to an index created by the first call.
class SampleWriter {
 public:
  explicit SampleWriter(std::filesystem::path dir);
  void write(const net::TrainSample& sample);
  void finish();
  std::size_t count() const { return count_; }

 private:
  std::filesystem::path dir_;
  std::vector<std::string> ids_;
  std::size_t count_ = 0;
};

std::vector<net::TrainSample> load_dataset(const std::filesystem::path& dir);

}  // namespace dhz::synth

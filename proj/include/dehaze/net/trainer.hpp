#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <vector>

#include "dehaze/net/dehaze_net.hpp"
#include "dehaze/net/loss.hpp"
#include "dehaze/net/sample.hpp"

namespace dhz::net {

struct TrainConfig {
  double learning_rate = 0.01;
  int epochs = 150;
  int batch_size = 32;
  std::uint64_t seed = 0;
  LossWeights loss;
};

/// Called after each epoch with its 1-based index and mean training loss.
using EpochCallback = std::function<void(int epoch, double mean_loss)>;

/// Adagrad training with per-epoch reshuffling. Samples inside a batch are
/// processed in ascending dataset order so batch statistics depend only on
/// batch membership. Returns the mean per-sample loss of every epoch.
std::vector<double> train(DehazeNet& net, std::span<const TrainSample> data, const TrainConfig& config,
                          const EpochCallback& on_epoch = {});

struct TrainedNetwork {
  DehazeNet net;
  std::vector<double> epoch_loss;
};

/// Builds a network from spec (initialized with config.seed) and trains it.
TrainedNetwork train(std::span<const TrainSample> data, const NetworkSpec& spec, const TrainConfig& config,
                     const EpochCallback& on_epoch = {});

struct Evaluation {
  double loss = 0.0;
  LossTerms terms;
};

/// Inference-mode loss over a dataset, averaged per sample.
Evaluation evaluate(DehazeNet& net, std::span<const TrainSample> data, const LossWeights& weights,
                    int batch_size = 32);

/// CSV with header `epoch,loss`.
void write_loss_log(const std::filesystem::path& path, const std::vector<double>& epoch_loss);

}  // namespace dhz::net

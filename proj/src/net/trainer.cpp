#include "dehaze/net/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

#include "dehaze/errors.hpp"
#include "dehaze/nn/adagrad.hpp"

namespace dhz::net {
namespace {

constexpr std::uint64_t kShuffleStream = 0x5DEECE66Dull;

struct Batch {
  std::vector<Image> hazy;
  std::vector<const TrainSample*> samples;
};

Batch gather(std::span<const TrainSample> data, std::span<const std::size_t> idx) {
  Batch b;
  for (std::size_t i : idx) {
    b.samples.push_back(&data[i]);
    b.hazy.push_back(data[i].hazy);
  }
  return b;
}

// Summed per-sample loss over a batch; head gradients are for the batch mean.
double batch_loss(const Batch& b, const DehazeNet::Output& out, const LossWeights& w, Tensor* grad_t,
                  Tensor* grad_a, LossTerms* terms) {
  const int n = static_cast<int>(b.samples.size());
  double total = 0.0;
  LossTerms sum;
  std::vector<ScalarMap> gt;
  std::vector<ColorMap> ga;
  for (int i = 0; i < n; ++i) {
    const ScalarMap tp = tensor_to_scalar_map(out.t, i);
    const ColorMap ap = tensor_to_color_map(out.a, i);
    const TrainSample& s = *b.samples[i];
    ScalarMap dt(tp.height(), tp.width());
    ColorMap da(ap.height(), ap.width());
    LossTerms t;
    total += reconstruction_loss<float>(s.hazy.values(), s.clean.values(), s.t.values(), s.a.values(),
                                        tp.values(), ap.values(), w, dt.values(), da.values(), &t,
                                        1.0 / n);
    sum.l1 += t.l1;
    sum.l2 += t.l2;
    sum.l3 += t.l3;
    sum.mse += t.mse;
    if (grad_t) {
      gt.push_back(std::move(dt));
      ga.push_back(std::move(da));
    }
  }
  if (grad_t) {
    *grad_t = scalar_maps_to_tensor(gt);
    *grad_a = color_maps_to_tensor(ga);
  }
  if (terms) *terms = sum;
  return total;
}

}  // namespace

std::vector<double> train(DehazeNet& net, std::span<const TrainSample> data, const TrainConfig& config,
                          const EpochCallback& on_epoch) {
  if (data.empty()) throw std::invalid_argument("training set is empty");
  if (config.epochs < 0) throw std::invalid_argument("epochs must be nonnegative");
  if (config.batch_size < 1) throw std::invalid_argument("batch size must be positive");
  config.loss.validate();
  for (const auto& s : data) {
    validate_sample(s);
    if (s.hazy.height() != net.spec().patch_size) {
      throw std::invalid_argument("sample size does not match the network patch size");
    }
  }

  nn::Adagrad optimizer(net.parameters(), config.learning_rate);
  nn::SplitMix64 rng(config.seed ^ kShuffleStream);
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<double> curve;

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
    double epoch_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      std::vector<std::size_t> idx(order.begin() + start, order.begin() + end);
      std::sort(idx.begin(), idx.end());
      const Batch b = gather(data, idx);

      optimizer.zero_grad();
      const auto out = net.forward(images_to_tensor(b.hazy), true);
      Tensor grad_t, grad_a;
      const double loss = batch_loss(b, out, config.loss, &grad_t, &grad_a, nullptr);
      if (!std::isfinite(loss)) throw NumericalError("training loss became non-finite");
      net.backward(grad_t, grad_a);
      optimizer.step();
      epoch_sum += loss;
    }
    const double mean = epoch_sum / static_cast<double>(data.size());
    curve.push_back(mean);
    if (on_epoch) on_epoch(epoch, mean);
  }
  return curve;
}

TrainedNetwork train(std::span<const TrainSample> data, const NetworkSpec& spec, const TrainConfig& config,
                     const EpochCallback& on_epoch) {
  TrainedNetwork out{DehazeNet(spec, config.seed), {}};
  out.epoch_loss = train(out.net, data, config, on_epoch);
  return out;
}

Evaluation evaluate(DehazeNet& net, std::span<const TrainSample> data, const LossWeights& weights,
                    int batch_size) {
  if (data.empty()) throw std::invalid_argument("evaluation set is empty");
  if (batch_size < 1) throw std::invalid_argument("batch size must be positive");
  Evaluation ev;
  for (std::size_t start = 0; start < data.size(); start += batch_size) {
    const std::size_t end = std::min(data.size(), start + batch_size);
    std::vector<std::size_t> idx(end - start);
    std::iota(idx.begin(), idx.end(), start);
    const Batch b = gather(data, idx);
    const auto out = net.forward(images_to_tensor(b.hazy), false);
    LossTerms t;
    ev.loss += batch_loss(b, out, weights, nullptr, nullptr, &t);
    ev.terms.l1 += t.l1;
    ev.terms.l2 += t.l2;
    ev.terms.l3 += t.l3;
    ev.terms.mse += t.mse;
  }
  const double total = static_cast<double>(data.size());
  ev.loss /= total;
  ev.terms.l1 /= total;
  ev.terms.l2 /= total;
  ev.terms.l3 /= total;
  ev.terms.mse /= total;
  return ev;
}

void write_loss_log(const std::filesystem::path& path, const std::vector<double>& epoch_loss) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path.string());
  out << "epoch,loss\n";
  char buf[64];
  for (std::size_t i = 0; i < epoch_loss.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%zu,%.9g\n", i + 1, epoch_loss[i]);
    out << buf;
  }
}

}  // namespace dhz::net

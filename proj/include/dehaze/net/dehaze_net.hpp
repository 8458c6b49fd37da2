#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "dehaze/image.hpp"
#include "dehaze/net/network_spec.hpp"
#include "dehaze/nn/container.hpp"
#include "dehaze/nn/layers.hpp"

namespace dhz::net {

using Tensor = nn::Tensor4<float>;

/// Packs omega x omega images into an N x 3 x H x W tensor.
Tensor images_to_tensor(std::span<const Image> images);
ScalarMap tensor_to_scalar_map(const Tensor& t, int n);
ColorMap tensor_to_color_map(const Tensor& t, int n);
Tensor scalar_maps_to_tensor(std::span<const ScalarMap> maps);
Tensor color_maps_to_tensor(std::span<const ColorMap> maps);

/// Two-way forked fully convolutional network.
///
/// Trunk: conv -> tanh, repeated. Each branch: transposed conv -> batch norm
/// -> (+ skip from the trunk) -> tanh, with sigmoid on the final stage so the
/// transmittance and illumination maps land in (0,1).
class DehazeNet {
 public:
  struct Output {
    Tensor t;  ///< N x 1 x H x W
    Tensor a;  ///< N x 3 x H x W
  };

  DehazeNet(NetworkSpec spec, std::uint64_t seed);

  const NetworkSpec& spec() const { return spec_; }

  Output forward(const Tensor& input, bool training);
  /// Backpropagates gradients of the loss with respect to both heads,
  /// accumulating parameter gradients. Returns the input gradient.
  Tensor backward(const Tensor& grad_t, const Tensor& grad_a);

  std::vector<nn::Parameter<float>*> parameters();
  void zero_grad();
  std::size_t parameter_count();

  /// Inference-mode prediction for a batch of omega x omega patches.
  struct Prediction {
    std::vector<ScalarMap> t;
    std::vector<ColorMap> a;
  };
  Prediction predict(std::span<const Image> patches);

  std::vector<nn::TensorRecord> export_weights() const;
  void import_weights(const std::vector<nn::TensorRecord>& records);
  void save(const std::filesystem::path& path) const;
  void load(const std::filesystem::path& path);

 private:
  struct Branch {
    std::vector<nn::ConvTranspose2d<float>> deconv;
    std::vector<nn::BatchNorm2d<float>> norm;
    std::vector<nn::Activation<float>> act;
  };

  Tensor forward_branch(Branch& b, const Tensor& features, bool training);
  void backward_branch(Branch& b, const Tensor& grad_output, std::vector<Tensor>& trunk_grads);

  NetworkSpec spec_;
  std::vector<nn::Conv2d<float>> trunk_;
  std::vector<nn::Activation<float>> trunk_act_;
  Branch t_branch_;
  Branch a_branch_;
  std::vector<Tensor> trunk_out_;
  bool recorded_ = false;
};

}  // namespace dhz::net

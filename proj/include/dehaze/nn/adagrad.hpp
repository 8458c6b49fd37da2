#pragma once

#include <vector>

#include "dehaze/nn/tensor.hpp"

namespace dhz::nn {

inline constexpr double kAdagradEpsilon = 1e-8;

/// accumulator += g^2; value -= lr * g / (sqrt(accumulator) + eps)
template <typename T>
void adagrad_step(Parameter<T>& param, double learning_rate, double epsilon = kAdagradEpsilon);

/// Applies adagrad_step to a fixed parameter set.
class Adagrad {
 public:
  Adagrad(std::vector<Parameter<float>*> params, double learning_rate,
          double epsilon = kAdagradEpsilon);

  void step();
  void zero_grad();
  double learning_rate() const { return learning_rate_; }

 private:
  std::vector<Parameter<float>*> params_;
  double learning_rate_;
  double epsilon_;
};

}  // namespace dhz::nn

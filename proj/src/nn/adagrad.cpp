#include "dehaze/nn/adagrad.hpp"

#include <cmath>
#include <stdexcept>

namespace dhz::nn {

template <typename T>
void adagrad_step(Parameter<T>& param, double learning_rate, double epsilon) {
  if (param.grad.size() != param.value.size() || param.accumulator.size() != param.value.size()) {
    throw std::logic_error("adagrad: parameter '" + param.name + "' has no gradient storage");
  }
  for (std::size_t i = 0; i < param.value.size(); ++i) {
    const double g = param.grad[i];
    const double acc = static_cast<double>(param.accumulator[i]) + g * g;
    param.accumulator[i] = static_cast<T>(acc);
    param.value[i] = static_cast<T>(param.value[i] - learning_rate * g / (std::sqrt(acc) + epsilon));
  }
}

template void adagrad_step(Parameter<float>&, double, double);
template void adagrad_step(Parameter<double>&, double, double);

Adagrad::Adagrad(std::vector<Parameter<float>*> params, double learning_rate, double epsilon)
    : params_(std::move(params)), learning_rate_(learning_rate), epsilon_(epsilon) {
  if (!(learning_rate >= 0.0)) throw std::invalid_argument("learning rate must be nonnegative");
}

void Adagrad::step() {
  for (auto* p : params_) adagrad_step(*p, learning_rate_, epsilon_);
}

void Adagrad::zero_grad() {
  for (auto* p : params_) p->zero_grad();
}

}  // namespace dhz::nn

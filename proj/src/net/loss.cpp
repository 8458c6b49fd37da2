#include "dehaze/net/loss.hpp"

#include <algorithm>
#include <cctype>
#include <sstream>

#include "dehaze/config.hpp"

namespace dhz::net {

LossWeights LossWeights::from_list(const std::string& list, double gamma) {
  LossWeights w;
  w.gamma = gamma;
  w.l1 = w.l2 = w.l3 = w.mse_maps = false;
  std::istringstream in(list);
  std::string item;
  while (std::getline(in, item, ',')) {
    std::string t = trim(item);
    std::transform(t.begin(), t.end(), t.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (t.empty()) continue;
    if (t == "l1") w.l1 = true;
    else if (t == "l2") w.l2 = true;
    else if (t == "l3") w.l3 = true;
    else if (t == "mse") w.mse_maps = true;
    else throw std::invalid_argument("unknown loss term '" + t + "' (expected l1, l2, l3 or mse)");
  }
  w.validate();
  return w;
}

std::string LossWeights::to_list() const {
  std::string out;
  auto add = [&](bool on, const char* name) {
    if (!on) return;
    if (!out.empty()) out += ",";
    out += name;
  };
  add(l1, "l1");
  add(l2, "l2");
  add(l3, "l3");
  add(mse_maps, "mse");
  return out;
}

LossResult total_loss(const TrainSample& sample, const ScalarMap& t_pred, const ColorMap& a_pred,
                      const LossWeights& weights) {
  require_same_shape(sample.hazy, sample.clean, "total_loss");
  require_same_shape(sample.hazy, sample.t, "total_loss");
  require_same_shape(sample.hazy, sample.a, "total_loss");
  require_same_shape(sample.hazy, t_pred, "total_loss");
  require_same_shape(sample.hazy, a_pred, "total_loss");
  LossResult r;
  r.grad_t = ScalarMap(t_pred.height(), t_pred.width());
  r.grad_a = ColorMap(a_pred.height(), a_pred.width());
  r.value = reconstruction_loss<float>(sample.hazy.values(), sample.clean.values(), sample.t.values(),
                                       sample.a.values(), t_pred.values(), a_pred.values(), weights,
                                       r.grad_t.values(), r.grad_a.values(), &r.terms);
  return r;
}

}  // namespace dhz::net

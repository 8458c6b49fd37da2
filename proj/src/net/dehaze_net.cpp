#include "dehaze/net/dehaze_net.hpp"

#include <algorithm>
#include <stdexcept>

#include "dehaze/errors.hpp"
#include "dehaze/net/sample.hpp"

namespace dhz::net {

namespace {

template <typename R>
Tensor rasters_to_tensor(std::span<const R> rasters) {
  if (rasters.empty()) throw std::invalid_argument("empty batch");
  constexpr int C = R::kChannels;
  const int h = rasters.front().height();
  const int w = rasters.front().width();
  Tensor out(static_cast<int>(rasters.size()), C, h, w);
  for (std::size_t n = 0; n < rasters.size(); ++n) {
    const R& r = rasters[n];
    if (r.height() != h || r.width() != w) throw std::invalid_argument("batch members differ in size");
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const auto* p = r.pixel(y, x);
        for (int c = 0; c < C; ++c) out.at(static_cast<int>(n), c, y, x) = p[c];
      }
    }
  }
  return out;
}

template <typename R>
R tensor_to_raster(const Tensor& t, int n) {
  constexpr int C = R::kChannels;
  const auto s = t.shape();
  if (s.c != C) throw std::invalid_argument("tensor channel count does not match raster");
  if (n < 0 || n >= s.n) throw std::out_of_range("batch index out of range");
  R out(s.h, s.w);
  for (int y = 0; y < s.h; ++y) {
    for (int x = 0; x < s.w; ++x) {
      auto* p = out.pixel(y, x);
      for (int c = 0; c < C; ++c) p[c] = t.at(n, c, y, x);
    }
  }
  return out;
}

Tensor sum(const Tensor& a, const Tensor& b) { return nn::add(a, b); }

void accumulate(Tensor& into, const Tensor& g) {
  if (into.empty()) {
    into = g;
    return;
  }
  auto dst = into.values();
  auto src = g.values();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

}  // namespace

Tensor images_to_tensor(std::span<const Image> images) { return rasters_to_tensor(images); }
Tensor scalar_maps_to_tensor(std::span<const ScalarMap> maps) { return rasters_to_tensor(maps); }
Tensor color_maps_to_tensor(std::span<const ColorMap> maps) { return rasters_to_tensor(maps); }
ScalarMap tensor_to_scalar_map(const Tensor& t, int n) { return tensor_to_raster<ScalarMap>(t, n); }
ColorMap tensor_to_color_map(const Tensor& t, int n) { return tensor_to_raster<ColorMap>(t, n); }

void validate_sample(const TrainSample& s) {
  const int w = s.hazy.width();
  if (s.hazy.empty() || s.hazy.height() != w) throw std::invalid_argument("sample patches must be square");
  require_same_shape(s.hazy, s.clean, "train sample");
  require_same_shape(s.hazy, s.t, "train sample");
  require_same_shape(s.hazy, s.a, "train sample");
  require_unit_range(s.hazy, "hazy patch");
  require_unit_range(s.clean, "clean patch");
  require_unit_range(s.t, "transmittance");
  require_unit_range(s.a, "illumination");
  const float* a0 = s.a.pixel(0, 0);
  for (std::size_t p = 0; p < s.a.pixel_count(); ++p) {
    for (int c = 0; c < 3; ++c) {
      if (s.a.values()[p * 3 + c] != a0[c]) {
        throw std::invalid_argument("illumination must be constant over a training patch");
      }
    }
  }
}

DehazeNet::DehazeNet(NetworkSpec spec, std::uint64_t seed) : spec_(std::move(spec)) {
  spec_.validate();
  nn::SplitMix64 rng(seed);

  int channels = spec_.input_channels;
  for (std::size_t i = 0; i < spec_.trunk.size(); ++i) {
    const auto& st = spec_.trunk[i];
    trunk_.emplace_back("trunk." + std::to_string(i), channels, st.channels, st.kernel, st.stride,
                        NetworkSpec::conv_padding(st));
    trunk_.back().init_glorot(rng);
    trunk_act_.emplace_back(nn::ActivationKind::kTanh);
    channels = st.channels;
  }
  const int trunk_channels = channels;

  auto build_branch = [&](Branch& b, const std::string& prefix, int out_channels) {
    int in = trunk_channels;
    for (std::size_t j = 0; j < spec_.branch.size(); ++j) {
      const auto& st = spec_.branch[j];
      const bool last = j + 1 == spec_.branch.size();
      const int out = last ? out_channels : st.channels;
      const std::string name = prefix + "." + std::to_string(j);
      b.deconv.emplace_back(name, in, out, st.kernel, st.stride, NetworkSpec::transpose_padding(st));
      b.deconv.back().init_glorot(rng);
      b.norm.emplace_back(name + ".bn", out);
      b.act.emplace_back(last ? nn::ActivationKind::kSigmoid : nn::ActivationKind::kTanh);
      in = out;
    }
  };
  build_branch(t_branch_, "t", kTransmittanceChannels);
  build_branch(a_branch_, "a", kIlluminationChannels);
}

Tensor DehazeNet::forward_branch(Branch& b, const Tensor& features, bool training) {
  Tensor h = features;
  for (std::size_t j = 0; j < b.deconv.size(); ++j) {
    Tensor z = b.norm[j].forward(b.deconv[j].forward(h), training);
    for (const auto& sk : spec_.skips) {
      if (sk.branch_layer == static_cast<int>(j)) z = sum(z, trunk_out_[sk.trunk_layer]);
    }
    h = b.act[j].forward(z);
  }
  return h;
}

DehazeNet::Output DehazeNet::forward(const Tensor& input, bool training) {
  const auto s = input.shape();
  if (s.c != spec_.input_channels || s.h != spec_.patch_size || s.w != spec_.patch_size) {
    throw std::invalid_argument("network expects N x " + std::to_string(spec_.input_channels) + " x " +
                                std::to_string(spec_.patch_size) + " x " + std::to_string(spec_.patch_size) +
                                " input, got " + s.str());
  }
  trunk_out_.clear();
  Tensor h = input;
  for (std::size_t i = 0; i < trunk_.size(); ++i) {
    h = trunk_act_[i].forward(trunk_[i].forward(h));
    trunk_out_.push_back(h);
  }
  Output out;
  out.t = forward_branch(t_branch_, h, training);
  out.a = forward_branch(a_branch_, h, training);
  recorded_ = true;
  return out;
}

void DehazeNet::backward_branch(Branch& b, const Tensor& grad_output, std::vector<Tensor>& trunk_grads) {
  Tensor g = grad_output;
  for (std::size_t jj = b.deconv.size(); jj-- > 0;) {
    Tensor gz = b.act[jj].backward(g);
    for (const auto& sk : spec_.skips) {
      if (sk.branch_layer == static_cast<int>(jj)) accumulate(trunk_grads[sk.trunk_layer], gz);
    }
    g = b.deconv[jj].backward(b.norm[jj].backward(gz));
  }
  accumulate(trunk_grads.back(), g);
}

Tensor DehazeNet::backward(const Tensor& grad_t, const Tensor& grad_a) {
  if (!recorded_) throw std::logic_error("network backward called without a recorded forward");
  recorded_ = false;
  std::vector<Tensor> trunk_grads(trunk_.size());
  backward_branch(t_branch_, grad_t, trunk_grads);
  backward_branch(a_branch_, grad_a, trunk_grads);
  Tensor g;
  for (std::size_t ii = trunk_.size(); ii-- > 0;) {
    Tensor gi = trunk_grads[ii];
    if (!g.empty()) accumulate(gi, g);
    g = trunk_[ii].backward(trunk_act_[ii].backward(gi));
  }
  trunk_out_.clear();
  return g;
}

std::vector<nn::Parameter<float>*> DehazeNet::parameters() {
  std::vector<nn::Parameter<float>*> out;
  auto append = [&](std::vector<nn::Parameter<float>*> ps) { out.insert(out.end(), ps.begin(), ps.end()); };
  for (auto& c : trunk_) append(c.parameters());
  for (Branch* b : {&t_branch_, &a_branch_}) {
    for (std::size_t j = 0; j < b->deconv.size(); ++j) {
      append(b->deconv[j].parameters());
      append(b->norm[j].parameters());
    }
  }
  return out;
}

void DehazeNet::zero_grad() {
  for (auto* p : parameters()) p->zero_grad();
}

std::size_t DehazeNet::parameter_count() {
  std::size_t n = 0;
  for (auto* p : parameters()) n += p->size();
  return n;
}

DehazeNet::Prediction DehazeNet::predict(std::span<const Image> patches) {
  Prediction out;
  if (patches.empty()) return out;
  const Output o = forward(images_to_tensor(patches), false);
  recorded_ = false;
  for (int n = 0; n < static_cast<int>(patches.size()); ++n) {
    out.t.push_back(tensor_to_scalar_map(o.t, n));
    out.a.push_back(tensor_to_color_map(o.a, n));
  }
  return out;
}

std::vector<nn::TensorRecord> DehazeNet::export_weights() const {
  std::vector<nn::TensorRecord> out;
  auto put = [&](const nn::Parameter<float>& p) {
    nn::TensorRecord r;
    r.name = p.name;
    for (int d : p.dims) r.dims.push_back(static_cast<std::uint32_t>(d));
    r.data.assign(p.value.begin(), p.value.end());
    out.push_back(std::move(r));
  };
  auto put_stats = [&](const nn::BatchNorm2d<float>& bn) {
    const auto c = static_cast<std::uint32_t>(bn.channels());
    out.push_back({bn.name() + ".running_mean", {c}, bn.running_mean()});
    out.push_back({bn.name() + ".running_var", {c}, bn.running_var()});
  };
  for (const auto& c : trunk_) {
    put(c.weight());
    put(c.bias());
  }
  for (const Branch* b : {&t_branch_, &a_branch_}) {
    for (std::size_t j = 0; j < b->deconv.size(); ++j) {
      put(b->deconv[j].weight());
      put(b->deconv[j].bias());
      put(b->norm[j].scale());
      put(b->norm[j].shift());
      put_stats(b->norm[j]);
    }
  }
  return out;
}

void DehazeNet::import_weights(const std::vector<nn::TensorRecord>& records) {
  auto take = [&](const std::string& name, const std::vector<int>& dims, auto& dst) {
    const auto& r = nn::find_record(records, name);
    std::vector<std::uint32_t> want(dims.begin(), dims.end());
    if (r.dims != want) throw IoError("record '" + name + "' has dims that do not match the network spec");
    dst.assign(r.data.begin(), r.data.end());
  };
  for (auto* p : parameters()) take(p->name, p->dims, p->value);
  for (Branch* b : {&t_branch_, &a_branch_}) {
    for (auto& bn : b->norm) {
      take(bn.name() + ".running_mean", {bn.channels()}, bn.running_mean());
      take(bn.name() + ".running_var", {bn.channels()}, bn.running_var());
    }
  }
  const std::size_t expected = export_weights().size();
  if (records.size() != expected) {
    throw IoError("weight file has " + std::to_string(records.size()) + " records, network expects " +
                  std::to_string(expected));
  }
}

void DehazeNet::save(const std::filesystem::path& path) const { nn::write_container(path, export_weights()); }

void DehazeNet::load(const std::filesystem::path& path) { import_weights(nn::read_container(path)); }

}  // namespace dhz::net

#include <doctest.h>

#include <cmath>
#include <fstream>

#include "dehaze/errors.hpp"
#include "dehaze/haze_model.hpp"
#include "dehaze/net/dehaze_net.hpp"
#include "dehaze/net/loss.hpp"
#include "dehaze/net/trainer.hpp"
#include "support/test_support.hpp"

using namespace dhz;
using namespace dhz::net;

namespace {

// Hazy patch synthesized exactly from random clean content with constant t and A.
TrainSample make_sample(int size, nn::SplitMix64& rng) {
  TrainSample s;
  s.clean = test::random_raster<Image>(size, size, rng);
  s.t = ScalarMap(size, size);
  for (auto& v : s.t.values()) v = static_cast<float>(rng.uniform(0.5, 0.95));
  s.a = ColorMap(size, size);
  const float a[3] = {static_cast<float>(rng.uniform(0.45, 1.0)), static_cast<float>(rng.uniform(0.45, 1.0)),
                      static_cast<float>(rng.uniform(0.45, 1.0))};
  for (std::size_t p = 0; p < s.a.pixel_count(); ++p)
    for (int c = 0; c < 3; ++c) s.a.values()[3 * p + c] = a[c];
  s.hazy = synthesize_haze(s.clean, s.t, s.a);
  return s;
}

NetworkSpec small_spec() {
  auto spec = NetworkSpec::defaults();
  spec.patch_size = 16;
  for (auto& st : spec.trunk) st.channels = std::max(2, st.channels / 8);
  for (auto& st : spec.branch) st.channels = std::max(2, st.channels / 8);
  return spec;
}

}  // namespace

TEST_CASE("default network shapes and output range") {
  DehazeNet net(NetworkSpec::defaults(), 1);
  nn::SplitMix64 rng(1);
  std::vector<Image> patches = {test::random_raster<Image>(64, 64, rng), test::random_raster<Image>(64, 64, rng)};
  const auto out = net.forward(images_to_tensor(patches), false);
  CHECK(out.t.shape() == nn::Shape4{2, 1, 64, 64});
  CHECK(out.a.shape() == nn::Shape4{2, 3, 64, 64});
  for (float v : out.t.values()) CHECK((v > 0.0f && v < 1.0f));
  for (float v : out.a.values()) CHECK((v > 0.0f && v < 1.0f));

  const auto pred = net.predict(patches);
  REQUIRE(pred.t.size() == 2);
  CHECK(pred.t[0].height() == 64);
  CHECK(pred.a[1].width() == 64);
}

TEST_CASE("same seed gives identical weights") {
  DehazeNet a(NetworkSpec::defaults(), 42), b(NetworkSpec::defaults(), 42), c(NetworkSpec::defaults(), 43);
  CHECK(a.export_weights() == b.export_weights());
  CHECK(a.export_weights() != c.export_weights());
}

TEST_CASE("network spec validation and config round trip") {
  const auto spec = NetworkSpec::defaults();
  CHECK_NOTHROW(spec.validate());
  CHECK(spec.trunk.size() == 4);
  CHECK(spec.branch.size() == 4);
  CHECK(NetworkSpec::from_config(spec.to_config()) == spec);

  auto odd = spec;
  odd.patch_size = 62;
  CHECK_THROWS_AS(odd.validate(), std::invalid_argument);
  auto uneven = spec;
  uneven.branch.pop_back();
  CHECK_THROWS_AS(uneven.validate(), std::invalid_argument);
  auto bad_skip = spec;
  bad_skip.skips.push_back({0, 0});
  CHECK_THROWS_AS(bad_skip.validate(), std::invalid_argument);
  auto into_head = spec;
  into_head.skips.push_back({0, 3});
  CHECK_THROWS_AS(into_head.validate(), std::invalid_argument);
}

TEST_CASE("weights save and load") {
  test::TempDir dir("weights");
  DehazeNet a(small_spec(), 5);
  nn::SplitMix64 rng(5);
  std::vector<Image> patches = {test::random_raster<Image>(16, 16, rng)};
  a.forward(images_to_tensor(patches), true);  // moves the batch-norm running statistics
  a.save(dir / "w.dhzw");
  DehazeNet b(small_spec(), 6);
  b.load(dir / "w.dhzw");
  CHECK(a.export_weights() == b.export_weights());
  const auto pa = a.predict(patches);
  const auto pb = b.predict(patches);
  CHECK(pa.t[0] == pb.t[0]);
  CHECK(pa.a[0] == pb.a[0]);

  DehazeNet wrong(NetworkSpec::defaults(), 0);
  CHECK_THROWS_AS(wrong.load(dir / "w.dhzw"), IoError);
}

TEST_CASE("backward before forward is rejected") {
  DehazeNet net(small_spec(), 1);
  CHECK_THROWS_AS(net.backward(Tensor(nn::Shape4{1, 1, 16, 16}), Tensor(nn::Shape4{1, 3, 16, 16})), std::logic_error);
}

TEST_CASE("eta examples and monotonicity") {
  CHECK(eta(0.0, 15.0) == 1.0);
  CHECK(eta(1.0, 15.0) == 0.0);
  CHECK(eta(0.5, 15.0) == doctest::Approx(0.999447).epsilon(1e-6));
  // Independent closed form: eta(1/2) = 1 - 1 / (exp(gamma / 2) + 1).
  CHECK(std::abs(eta(0.5, 15.0) - (1.0 - 1.0 / (std::exp(7.5) + 1.0))) < 1e-15);
  for (double gamma : {1.0, 2.0, 15.0}) {
    double prev = eta(0.0, gamma);
    for (int i = 1; i < 1000; ++i) {
      const double v = eta(i / 1000.0, gamma);
      CHECK(v < prev);
      prev = v;
    }
  }
  CHECK_THROWS_AS(eta(0.5, 0.5), std::invalid_argument);
  CHECK_THROWS_AS(eta(1.5, 15.0), std::invalid_argument);
}

TEST_CASE("loss examples") {
  nn::SplitMix64 rng(3);
  const auto s = make_sample(8, rng);
  const auto exact = total_loss(s, s.t, s.a, LossWeights{});
  CHECK(exact.value == doctest::Approx(0.0).epsilon(1e-6));

  TrainSample one{Image(1, 1, 0.6f), Image(1, 1, 0.2f), ScalarMap(1, 1, 0.5f), ColorMap(1, 1, 1.0f)};
  const auto r = total_loss(one, ScalarMap(1, 1, 0.5f), ColorMap(1, 1, 0.5f), LossWeights{});
  CHECK(r.terms.l1 == doctest::Approx(0.75).epsilon(1e-6));
  CHECK(r.terms.l2 == doctest::Approx(0.0).epsilon(1e-6));
  CHECK(r.terms.l3 == doctest::Approx(0.75).epsilon(1e-6));
  CHECK(r.value == doctest::Approx(1.49917).epsilon(1e-5));
  CHECK(r.value == doctest::Approx(2.0 * 0.75 * eta(0.5, 15.0)).epsilon(1e-6));
}

TEST_CASE("loss toggles are independent and nonnegative") {
  nn::SplitMix64 rng(9);
  const auto s = make_sample(8, rng);
  const auto tp = test::random_raster<ScalarMap>(8, 8, rng);
  const auto ap = test::random_raster<ColorMap>(8, 8, rng);
  const auto all = total_loss(s, tp, ap, LossWeights{});
  for (const char* list : {"l1", "l2", "l3", "l1,l2", "l2,l3", "l1,l3", "mse"}) {
    const auto r = total_loss(s, tp, ap, LossWeights::from_list(list));
    CHECK(r.terms.l1 == all.terms.l1);
    CHECK(r.terms.l2 == all.terms.l2);
    CHECK(r.terms.l3 == all.terms.l3);
    CHECK(r.value >= 0.0);
  }
  CHECK(LossWeights::from_list("L1, l3").to_list() == "l1,l3");
  CHECK_THROWS_AS(LossWeights::from_list("l4"), std::invalid_argument);
  CHECK_THROWS_AS(LossWeights::from_list(""), std::invalid_argument);
}

TEST_CASE("gradient checks: loss") {
  for (const auto& r : test::check_loss(707)) {
    INFO(r.what << " relative error " << r.error);
    CHECK(r.error <= test::kFdTolerance);
  }
}

TEST_CASE("sample validation") {
  nn::SplitMix64 rng(2);
  auto s = make_sample(8, rng);
  CHECK_NOTHROW(validate_sample(s));
  auto varying = s;
  varying.a.at(0, 0, 0) = 0.1f;
  CHECK_THROWS_AS(validate_sample(varying), std::invalid_argument);
  auto shape = s;
  shape.t = ScalarMap(8, 7);
  CHECK_THROWS_AS(validate_sample(shape), std::invalid_argument);
}

TEST_CASE("training with lr 0 keeps the loss constant") {
  nn::SplitMix64 rng(12);
  std::vector<TrainSample> data;
  for (int i = 0; i < 6; ++i) data.push_back(make_sample(16, rng));
  TrainConfig cfg;
  cfg.learning_rate = 0.0;
  cfg.epochs = 4;
  cfg.batch_size = 8;
  const auto curve = train(data, small_spec(), cfg).epoch_loss;
  REQUIRE(curve.size() == 4);
  for (double v : curve) CHECK(v == curve.front());
}

TEST_CASE("training is deterministic and reduces the loss") {
  nn::SplitMix64 rng(13);
  std::vector<TrainSample> data;
  for (int i = 0; i < 10; ++i) data.push_back(make_sample(16, rng));
  TrainConfig cfg;
  cfg.epochs = 15;
  cfg.batch_size = 4;
  cfg.seed = 77;
  int calls = 0;
  auto a = train(data, small_spec(), cfg, [&](int epoch, double) { CHECK(epoch == ++calls); });
  const auto b = train(data, small_spec(), cfg);
  CHECK(calls == 15);
  CHECK(a.epoch_loss == b.epoch_loss);
  CHECK(a.epoch_loss.back() < a.epoch_loss.front());

  const auto eval = evaluate(a.net, data, cfg.loss, 3);
  CHECK(std::isfinite(eval.loss));
  CHECK(eval.terms.l3 >= 0.0);
}

TEST_CASE("loss log format") {
  test::TempDir dir("losslog");
  write_loss_log(dir / "l.csv", {0.5, 0.25});
  std::ifstream in(dir / "l.csv");
  std::string header, r1, r2;
  std::getline(in, header);
  std::getline(in, r1);
  std::getline(in, r2);
  CHECK(header == "epoch,loss");
  CHECK(r1.rfind("1,", 0) == 0);
  CHECK(r2.rfind("2,", 0) == 0);
}

#include <doctest.h>

#include <cmath>

#include "dehaze/errors.hpp"
#include "dehaze/nn/adagrad.hpp"
#include "dehaze/nn/container.hpp"
#include "dehaze/nn/layers.hpp"
#include "support/test_support.hpp"

using namespace dhz;
using namespace dhz::nn;

namespace {

void require_gradients(const std::vector<test::GradReport>& reports) {
  for (const auto& r : reports) {
    INFO(r.what << " relative error " << r.error);
    CHECK(r.error <= test::kFdTolerance);
  }
}

}  // namespace

TEST_CASE("conv2d forward examples") {
  Conv2d<double> id("id", 1, 1, 1, 1, 0);
  id.weight().value = {1.0};
  id.bias().value = {0.0};
  Tensor4<double> x(1, 1, 3, 3);
  for (int i = 0; i < 9; ++i) x.values()[i] = i + 1;
  CHECK(id.forward(x).values()[4] == 5.0);
  CHECK(id.forward(x).shape() == x.shape());

  Conv2d<double> ones("ones", 1, 1, 2, 1, 0);
  ones.weight().value.assign(4, 1.0);
  ones.bias().value = {0.0};
  Tensor4<double> small(1, 1, 2, 2);
  small.values()[0] = 1;
  small.values()[1] = 2;
  small.values()[2] = 3;
  small.values()[3] = 4;
  const auto y = ones.forward(small);
  CHECK(y.shape() == Shape4{1, 1, 1, 1});
  CHECK(y.values()[0] == 10.0);

  Conv2d<double> strided("s", 1, 1, 3, 2, 1);
  CHECK(strided.output_shape({1, 1, 3, 3}) == Shape4{1, 1, 2, 2});
  CHECK_THROWS_AS(strided.output_shape({1, 2, 3, 3}), std::invalid_argument);
}

TEST_CASE("conv transpose forward examples") {
  ConvTranspose2d<double> id("id", 1, 1, 1, 1, 0);
  id.weight().value = {1.0};
  id.bias().value = {0.0};
  Tensor4<double> x(1, 1, 3, 3);
  for (int i = 0; i < 9; ++i) x.values()[i] = 0.5 * i;
  CHECK(id.forward(x).values()[7] == 3.5);

  ConvTranspose2d<double> up("up", 1, 1, 2, 2, 0);
  up.weight().value.assign(4, 1.0);
  up.bias().value = {0.0};
  const auto y = up.forward(Tensor4<double>(1, 1, 1, 1, 1.0));
  CHECK(y.shape() == Shape4{1, 1, 2, 2});
  for (double v : y.values()) CHECK(v == 1.0);
  CHECK(up.output_shape({1, 1, 2, 2}) == Shape4{1, 1, 4, 4});
  CHECK(conv_transpose_output_size(2, 2, 2, 0) == 4);
}

TEST_CASE("conv then matching transposed conv restores spatial size") {
  for (int size : {8, 16, 32, 64}) {
    for (auto [k, s, tk] : {std::tuple{3, 1, 3}, std::tuple{3, 2, 4}}) {
      const int down = conv_output_size(size, k, s, (k - 1) / 2);
      CHECK(conv_transpose_output_size(down, tk, s, (tk - s) / 2) == size);
    }
  }
}

TEST_CASE("batchnorm forward examples") {
  BatchNorm2d<double> bn("bn", 2);
  Tensor4<double> flat(3, 2, 2, 2, 0.7);
  const auto normed = bn.forward(flat, true);
  for (double v : normed.values()) CHECK(v == doctest::Approx(0.0).epsilon(1e-12));

  SplitMix64 rng(2);
  const auto x = test::random_tensor<double>({4, 2, 3, 3}, rng, -3.0, 5.0);
  const auto y = bn.forward(x, true);
  for (int c = 0; c < 2; ++c) {
    double mean = 0.0, sq = 0.0;
    int n = 0;
    for (int b = 0; b < 4; ++b)
      for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) {
          mean += y.at(b, c, i, j);
          sq += y.at(b, c, i, j) * y.at(b, c, i, j);
          ++n;
        }
    mean /= n;
    CHECK(std::abs(mean) < 1e-4);
    CHECK(std::abs(sq / n - mean * mean - 1.0) < 1e-4);
  }

  BatchNorm2d<double> infer("bn", 1);
  infer.scale().value = {2.0};
  infer.shift().value = {1.0};
  infer.running_mean() = {0.0};
  infer.running_var() = {1.0};
  const auto z = infer.forward(Tensor4<double>(1, 1, 1, 1, 0.5), false);
  CHECK(z.values()[0] == doctest::Approx(2.0 * 0.5 / std::sqrt(1.0 + 1e-5) + 1.0).epsilon(1e-12));
  CHECK(z.values()[0] == doctest::Approx(1.9999).epsilon(1e-4));
}

TEST_CASE("batchnorm running statistics") {
  BatchNorm2d<double> bn("bn", 1);
  Tensor4<double> x(2, 1, 1, 2);
  x.values()[0] = 1.0;
  x.values()[1] = 3.0;
  x.values()[2] = 5.0;
  x.values()[3] = 7.0;
  bn.forward(x, true);
  // Batch mean 4, biased variance 5.
  CHECK(bn.running_mean()[0] == doctest::Approx(0.9 * 0.0 + 0.1 * 4.0));
  CHECK(bn.running_var()[0] == doctest::Approx(0.9 * 1.0 + 0.1 * 5.0));
}

TEST_CASE("activation forward examples") {
  Activation<double> t(ActivationKind::kTanh);
  Activation<double> s(ActivationKind::kSigmoid);
  CHECK(t.forward(Tensor4<double>(1, 1, 1, 1, 0.0)).values()[0] == 0.0);
  CHECK(s.forward(Tensor4<double>(1, 1, 1, 1, 0.0)).values()[0] == 0.5);
  CHECK(s.forward(Tensor4<double>(1, 1, 1, 1, std::log(3.0))).values()[0] == doctest::Approx(0.75).epsilon(1e-15));
}

TEST_CASE("backward examples") {
  Conv2d<double> id("id", 1, 1, 1, 1, 0);
  id.weight().value = {1.0};
  id.bias().value = {0.0};
  Tensor4<double> x(2, 1, 2, 3);
  double sum = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) sum += x.values()[i] = 0.1 * static_cast<double>(i) - 0.3;
  id.forward(x);
  id.backward(Tensor4<double>(x.shape(), 1.0));
  CHECK(id.weight().grad[0] == doctest::Approx(sum).epsilon(1e-14));
  CHECK(id.bias().grad[0] == doctest::Approx(static_cast<double>(x.size())));

  SplitMix64 rng(4);
  Conv2d<double> c("c", 2, 3, 3, 1, 1);
  c.init_glorot(rng);
  c.weight().zero_grad();
  c.bias().zero_grad();
  c.forward(test::random_tensor<double>({1, 2, 5, 5}, rng));
  c.backward(Tensor4<double>({1, 3, 5, 5}, 0.0));
  for (double g : c.weight().grad) CHECK(g == 0.0);
  for (double g : c.bias().grad) CHECK(g == 0.0);

  CHECK_THROWS_AS(c.backward(Tensor4<double>({1, 3, 5, 5}, 0.0)), std::logic_error);
}

TEST_CASE("gradient checks: conv") { require_gradients(test::check_conv(101)); }
TEST_CASE("gradient checks: transposed conv") { require_gradients(test::check_conv_transpose(202)); }
TEST_CASE("gradient checks: batchnorm") { require_gradients(test::check_batchnorm(303)); }
TEST_CASE("gradient checks: tanh") { require_gradients(test::check_activation(ActivationKind::kTanh, 404)); }
TEST_CASE("gradient checks: sigmoid") { require_gradients(test::check_activation(ActivationKind::kSigmoid, 505)); }
TEST_CASE("gradient checks: composite chain") { require_gradients(test::check_composite(606)); }

TEST_CASE("glorot init bounds and determinism") {
  Conv2d<float> a("a", 16, 32, 3, 1, 1), b("b", 16, 32, 3, 1, 1);
  SplitMix64 r1(7), r2(7);
  a.init_glorot(r1);
  b.init_glorot(r2);
  CHECK(a.weight().value == b.weight().value);
  const double bound = std::sqrt(6.0 / (16 * 9 + 32 * 9));
  for (float v : a.weight().value) CHECK(std::abs(v) <= bound);
  for (float v : a.bias().value) CHECK(v == 0.0f);
}

TEST_CASE("forward is bit-identical for identical inputs") {
  SplitMix64 rng(8);
  Conv2d<float> c("c", 3, 4, 3, 2, 1);
  c.init_glorot(rng);
  const auto x = test::random_tensor<float>({3, 3, 8, 8}, rng);
  const auto y1 = c.forward(x);
  const auto y2 = c.forward(x);
  CHECK(std::equal(y1.values().begin(), y1.values().end(), y2.values().begin()));
}

TEST_CASE("adagrad examples") {
  Parameter<double> p("p", {3});
  p.value = {1.0, -2.0, 0.5};
  p.grad = {0.0, 0.0, 0.0};
  adagrad_step(p, 0.01);
  CHECK(p.value == AlignedVector<double>{1.0, -2.0, 0.5});

  Parameter<double> q("q", {2});
  q.value = {0.0, 0.0};
  q.grad = {3.0, -0.2};
  adagrad_step(q, 0.01);
  CHECK(q.value[0] == doctest::Approx(-0.01).epsilon(1e-8));
  CHECK(q.value[1] == doctest::Approx(0.01).epsilon(1e-6));

  Parameter<double> r("r", {1});
  r.grad = {1.0};
  adagrad_step(r, 0.01);
  const double first = r.value[0];
  adagrad_step(r, 0.01);
  CHECK(first - r.value[0] == doctest::Approx(0.01 / std::sqrt(2.0)).epsilon(1e-7));
  CHECK(first - r.value[0] == doctest::Approx(0.007071).epsilon(1e-4));
}

TEST_CASE("container round trip and corruption") {
  std::vector<TensorRecord> recs = {{"w", {2, 3}, {1, 2, 3, 4, 5, 6}}, {"bias", {1}, {-0.5f}}, {"empty dims", {}, {7.0f}}};
  const auto bytes = encode_container(recs);
  CHECK(bytes[0] == 'D');
  CHECK(bytes[3] == 'W');
  CHECK(decode_container(bytes) == recs);
  CHECK(find_record(recs, "bias").data[0] == -0.5f);
  CHECK_THROWS_AS(find_record(recs, "nope"), IoError);

  auto bad = bytes;
  bad[0] = 'X';
  CHECK_THROWS_AS(decode_container(bad), IoError);
  auto truncated = bytes;
  truncated.pop_back();
  CHECK_THROWS_AS(decode_container(truncated), IoError);
  auto trailing = bytes;
  trailing.push_back(0);
  CHECK_THROWS_AS(decode_container(trailing), IoError);
  auto version = bytes;
  version[4] = 9;
  CHECK_THROWS_AS(decode_container(version), IoError);

  test::TempDir dir("container");
  write_container(dir / "x.dhzw", recs);
  CHECK(read_container(dir / "x.dhzw") == recs);
  CHECK_THROWS_AS(read_container(dir / "missing.dhzw"), IoError);
}

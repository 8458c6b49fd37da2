// Runs every acceptance criterion and prints one PASS/FAIL line for each.
// Exits nonzero when any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iterator>
#include <sstream>
#include <string>
#include <vector>

#include "cli.hpp"
#include "dehaze/haze_model.hpp"
#include "dehaze/image_io.hpp"
#include "dehaze/infer/multilevel.hpp"
#include "dehaze/metrics/metrics.hpp"
#include "dehaze/mrf/regularizer.hpp"
#include "dehaze/net/loss.hpp"
#include "dehaze/net/trainer.hpp"
#include "dehaze/synth/scene_gen.hpp"
#include "dehaze/synth/synthesis.hpp"
#include "support/sharma_pairs.hpp"
#include "support/test_support.hpp"

using namespace dhz;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

int failures = 0;

void criterion(const std::string& name, const std::function<Outcome()>& body) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  std::printf("%s %s: %s [%.1f s]\n", o.pass ? "PASS" : "FAIL", name.c_str(), o.detail.c_str(), seconds_since(t0));
  std::fflush(stdout);
  if (!o.pass) ++failures;
}

Outcome round_trip() {
  const auto t0 = std::chrono::steady_clock::now();
  nn::SplitMix64 rng(2024);
  float worst = 0.0f;
  for (int k = 0; k < 100; ++k) {
    const auto j = test::random_raster<Image>(128, 128, rng);
    const auto t = test::random_raster<ScalarMap>(128, 128, rng, 0.1, 1.0);
    const auto a = test::random_raster<ColorMap>(128, 128, rng);
    const auto back = recover_scene(synthesize_haze(j, t, a), t, a);
    for (std::size_t i = 0; i < j.size(); ++i) worst = std::max(worst, std::abs(back.values()[i] - j.values()[i]));
  }
  const double secs = seconds_since(t0);
  return {worst <= 1e-5f && secs < 10.0, fmt("max abs error %.3g (<= 1e-5), %.2f s (< 10 s)", worst, secs)};
}

Outcome gradient_suite() {
  const auto t0 = std::chrono::steady_clock::now();
  std::vector<test::GradReport> all;
  auto add = [&](std::vector<test::GradReport> r) { all.insert(all.end(), r.begin(), r.end()); };
  add(test::check_conv(1));
  add(test::check_conv_transpose(2));
  add(test::check_batchnorm(3));
  add(test::check_activation(nn::ActivationKind::kTanh, 4));
  add(test::check_activation(nn::ActivationKind::kSigmoid, 5));
  add(test::check_loss(6));
  add(test::check_composite(7));
  const test::GradReport* worst = &all.front();
  for (const auto& r : all) {
    if (r.error > worst->error) worst = &r;
  }
  const double secs = seconds_since(t0);
  return {worst->error <= test::kFdTolerance && secs < 60.0,
          fmt("%zu checks, worst %s %.2e (<= 1e-4), %.2f s (< 60 s)", all.size(), worst->what.c_str(), worst->error,
              secs)};
}

Outcome eta_table() {
  const double gamma = 15.0;
  const double mid = net::eta(0.5, gamma);
  const double oracle = 1.0 - 1.0 / (std::exp(7.5) + 1.0);  // (e^15-1) = (e^7.5-1)(e^7.5+1)
  bool decreasing = true;
  double prev = net::eta(0.0, gamma);
  for (int i = 1; i < 1000; ++i) {
    const double v = net::eta(i / 999.0, gamma);
    decreasing = decreasing && v < prev;
    prev = v;
  }
  const bool ends = net::eta(0.0, gamma) == 1.0 && net::eta(1.0, gamma) == 0.0;
  const bool pass = ends && std::abs(mid - 0.999447) <= 1e-6 && std::abs(mid - oracle) <= 1e-12 && decreasing;
  return {pass, fmt("eta(0)=%g eta(1)=%g eta(0.5)=%.7f strictly decreasing=%s", net::eta(0.0, gamma),
                    net::eta(1.0, gamma), mid, decreasing ? "yes" : "no")};
}

Outcome level_counts() {
  const int a = infer::level_count(512, 512, 64);
  const int b = infer::level_count(480, 640, 64);
  const int c = infer::level_count(64, 64, 64);
  return {a == 4 && b == 3 && c == 1, fmt("(512,512)->%d (480,640)->%d (64,64)->%d", a, b, c)};
}

std::vector<double> solve_tridiagonal(std::vector<double> diag, const std::vector<double>& off,
                                      std::vector<double> rhs) {
  const std::size_t n = diag.size();
  for (std::size_t i = 1; i < n; ++i) {
    const double m = off[i - 1] / diag[i - 1];
    diag[i] -= m * off[i - 1];
    rhs[i] -= m * rhs[i - 1];
  }
  std::vector<double> x(n);
  x[n - 1] = rhs[n - 1] / diag[n - 1];
  for (std::size_t i = n - 1; i-- > 0;) x[i] = (rhs[i] - off[i] * x[i + 1]) / diag[i];
  return x;
}

Outcome regularizer() {
  std::vector<std::string> notes;
  bool pass = true;

  {
    const Image guide(1, 2, 0.5f);
    const std::vector<double> obs = {1.0, 0.0};
    Mask mask(1, 2, 0);
    mask.values()[0] = 1;
    const auto r = mrf::solve_cg(mrf::build_system({guide, obs, mask.values(), 1.0, 1.0}), {.tol = 1e-12});
    const double err = std::max(std::abs(r.x[0] - 1.0), std::abs(r.x[1] - 1.0));
    pass = pass && err <= 1e-8;
    notes.push_back(fmt("1x2 err %.1e", err));
  }
  {
    constexpr int n = 32;
    std::vector<double> obs(n, 0.0);
    obs[n - 1] = 1.0;
    Mask mask(1, n, 0);
    mask.values()[0] = mask.values()[n - 1] = 1;
    mrf::RegularizerParams params;
    params.epsilon = 1.0;
    params.cg.tol = 1e-12;
    const auto x = mrf::regularize_channel(Image(1, n, 0.25f), obs, mask, params);
    std::vector<double> diag(n, 2.0), off(n - 1, -1.0), rhs(n, 0.0);
    rhs[n - 1] = 1.0;
    const auto oracle = solve_tridiagonal(diag, off, rhs);
    double err = 0.0;
    for (int i = 0; i < n; ++i) err = std::max(err, std::abs(x[i] - oracle[i]));
    pass = pass && err <= 1e-6;
    notes.push_back(fmt("ramp err %.1e", err));
  }
  {
    nn::SplitMix64 rng(55);
    const auto guide = test::random_raster<Image>(64, 64, rng);
    std::vector<double> obs(64 * 64);
    for (auto& v : obs) v = rng.uniform();
    Mask mask(64, 64);
    for (auto& m : mask.values()) m = rng.uniform() < 0.5 ? 1 : 0;
    mrf::CgResult info;
    const auto t0 = std::chrono::steady_clock::now();
    mrf::regularize_channel(guide, obs, mask, {}, &info);
    const double secs = seconds_since(t0);
    pass = pass && info.converged && info.relative_residual <= 1e-6 && secs < 5.0;
    notes.push_back(fmt("64x64 residual %.1e in %d its %.3f s", info.relative_residual, info.iterations, secs));
  }
  {
    nn::SplitMix64 rng(21);
    double worst = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
      const int h = 8 + static_cast<int>(rng.below(20));
      const int w = 8 + static_cast<int>(rng.below(20));
      const auto guide = test::random_raster<Image>(h, w, rng);
      const double lo = rng.uniform(0.0, 0.5);
      const double hi = lo + rng.uniform(0.05, 0.5);
      std::vector<double> obs(static_cast<std::size_t>(h) * w);
      for (auto& v : obs) v = rng.uniform(lo, hi);
      Mask mask(h, w);
      for (auto& m : mask.values()) m = rng.uniform() < 0.2 ? 1 : 0;
      mask.values()[0] = 1;
      mrf::RegularizerParams params;
      params.lambda = rng.uniform(0.1, 10.0);
      for (double v : mrf::regularize_channel(guide, obs, mask, params)) {
        worst = std::max({worst, lo - v, v - hi});
      }
    }
    pass = pass && worst <= 1e-6;
    notes.push_back(fmt("max principle excess %.1e", std::max(worst, 0.0)));
  }
  std::string detail;
  for (const auto& n : notes) detail += (detail.empty() ? "" : ", ") + n;
  return {pass, detail};
}

Outcome metrics_suite() {
  double worst = 0.0;
  for (const auto& p : test::kSharmaPairs) {
    worst = std::max(worst, std::abs(metrics::ciede2000(p.first, p.second) - p.delta_e));
  }
  nn::SplitMix64 rng(8);
  const auto img = test::random_raster<Image>(32, 32, rng);
  const double self = metrics::ssim(img, img);
  Image a(10, 10, 0.5f), b(10, 10, 0.5f);
  for (int i = 0; i < 192; ++i) b.values()[i] = 0.625f;  // MSE = 0.01
  const double p = metrics::psnr(a, b);
  return {worst <= 1e-4 && std::abs(self - 1.0) <= 1e-12 && std::abs(p - 20.0) <= 1e-9,
          fmt("Sharma worst |dE| error %.1e over %zu pairs, SSIM(a,a)=%.12f, PSNR=%.9f", worst,
              test::kSharmaPairs.size(), self, p)};
}

// 50 gated 64x64 patches from eight procedural scenes.
std::vector<net::TrainSample> toy_samples(std::size_t count) {
  synth::SynthesisConfig cfg;
  cfg.seed = 7;
  cfg.patches_per_image = 7;
  std::vector<net::TrainSample> out;
  for (std::size_t i = 0; out.size() < count; ++i) {
    synth::SceneOptions opts;
    opts.seed = i;
    const auto scene = synth::make_scene(opts);
    for (auto& s : synth::synthesize_pair(scene.rgb, scene.depth, synth::draw_haze(cfg, i), cfg)) {
      if (out.size() < count) out.push_back(std::move(s));
    }
  }
  return out;
}

fs::path work_dir() {
  const fs::path dir = fs::temp_directory_path() / "dhz_acceptance";
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

Outcome toy_training(const fs::path& weights) {
  const auto data = toy_samples(50);
  net::TrainConfig cfg;
  cfg.epochs = 200;
  cfg.seed = 11;
  const auto t0 = std::chrono::steady_clock::now();
  auto trained = net::train(data, net::NetworkSpec::defaults(), cfg);
  const double secs = seconds_since(t0);
  trained.net.save(weights);
  const auto& curve = trained.epoch_loss;
  const double ratio = curve.back() / curve.front();
  const auto eval = net::evaluate(trained.net, data, cfg.loss);
  return {ratio < 0.25 && eval.terms.l3 < 0.05,
          fmt("epoch1 %.4f epoch200 %.4f ratio %.3f (< 0.25), held-in L3 %.4f (< 0.05), train %.0f s", curve.front(),
              curve.back(), ratio, eval.terms.l3, secs)};
}

Outcome ablation(const fs::path& dir) {
  const auto data = toy_samples(12);
  const std::vector<std::string> sets = {"mse", "l3", "l1,l2", "l2,l3", "l1,l3", "l1,l2,l3"};
  bool pass = true;
  std::string detail;
  for (const auto& set : sets) {
    net::TrainConfig cfg;
    cfg.epochs = 3;
    cfg.batch_size = 8;
    cfg.seed = 5;
    cfg.loss = net::LossWeights::from_list(set);
    const auto first = net::train(data, net::NetworkSpec::defaults(), cfg).epoch_loss;
    const auto second = net::train(data, net::NetworkSpec::defaults(), cfg).epoch_loss;
    std::string tag = set;
    std::replace(tag.begin(), tag.end(), ',', '+');
    const fs::path log = dir / ("ablation_" + tag + ".csv");
    net::write_loss_log(log, first);
    std::ifstream in(log);
    const auto rows = std::count(std::istreambuf_iterator<char>(in), {}, '\n');
    bool finite = true;
    for (double v : first) finite = finite && std::isfinite(v);
    const bool ok = first == second && rows == cfg.epochs + 1 && finite;
    pass = pass && ok;
    detail += fmt("%s%s %.4f->%.4f%s", detail.empty() ? "" : ", ", tag.c_str(), first.front(), first.back(),
                  ok ? "" : " (mismatch)");
  }
  return {pass, detail + "; reruns bit-identical"};
}

int cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  return cli::run_cli(args, out, err);
}

double mean_psnr(const fs::path& scores) {
  std::ifstream in(scores);
  std::string line;
  while (std::getline(in, line)) {
    if (line.rfind("mean,", 0) == 0) return std::stod(line.substr(5));
  }
  throw std::runtime_error("no mean row in " + scores.string());
}

Outcome end_to_end(const fs::path& dir, const fs::path& weights) {
  const fs::path scenes = dir / "scenes";
  if (cli({"make-scenes", "--out", scenes.string(), "--count", "4", "--haze", "--ext", ".pfm", "--seed", "100"}) != 0) {
    return {false, "make-scenes failed"};
  }
  const fs::path out = dir / "dehazed.png";
  if (!fs::exists(weights)) return {false, "toy weights missing"};
  const int rc = cli({"dehaze", "--input", (scenes / "scene_000_hazy.pfm").string(), "--weights", weights.string(),
                      "--output", out.string(), "--emit-maps"});
  if (rc != 0) return {false, fmt("dehaze exited %d", rc)};
  const auto img = io::load_image(out);
  const auto t = io::load_scalar_map(dir / "dehazed_t.png");
  const auto a = io::load_color_map(dir / "dehazed_a.png");
  const auto cov = io::load_scalar_map(dir / "dehazed_coverage.png");
  bool valid = img.height() == 256 && img.width() == 256 && t.height() == 256 && a.width() == 256;
  for (float v : img.values()) valid = valid && v >= 0.0f && v <= 1.0f;
  for (float v : t.values()) valid = valid && v >= 0.0f && v <= 1.0f;
  for (float v : a.values()) valid = valid && v >= 0.0f && v <= 1.0f;
  double covered = 0.0;
  for (float v : cov.values()) covered += v > 0.5f;
  covered /= static_cast<double>(cov.pixel_count());
  valid = valid && covered > 0.0;

  const fs::path hazy_dir = dir / "hazy", oracle_dir = dir / "oracle";
  fs::create_directories(hazy_dir);
  fs::create_directories(oracle_dir);
  for (int i = 0; i < 4; ++i) {
    const std::string id = fmt("scene_%03d", i);
    fs::copy_file(scenes / (id + "_hazy.pfm"), hazy_dir / (id + ".pfm"));
    if (cli({"oracle-dehaze", "--hazy", (scenes / (id + "_hazy.pfm")).string(), "--t",
             (scenes / (id + "_t.pfm")).string(), "--a", (scenes / (id + "_a.pfm")).string(), "--output",
             (oracle_dir / (id + ".pfm")).string()}) != 0) {
      return {false, "oracle-dehaze failed on " + id};
    }
  }
  const std::string pairs = (scenes / "pairs.csv").string();
  if (cli({"eval", "--pairs", pairs, "--outputs", hazy_dir.string(), "--ext", ".pfm", "--out",
           (dir / "hazy.csv").string()}) != 0 ||
      cli({"eval", "--pairs", pairs, "--outputs", oracle_dir.string(), "--ext", ".pfm", "--out",
           (dir / "oracle.csv").string()}) != 0) {
    return {false, "eval failed"};
  }
  const double hazy_psnr = mean_psnr(dir / "hazy.csv");
  const double oracle_psnr = mean_psnr(dir / "oracle.csv");
  const double gain = oracle_psnr - hazy_psnr;
  return {valid && gain >= 10.0,
          fmt("output valid=%s, coverage %.1f%%, hazy PSNR %.2f dB, oracle PSNR %.2f dB, gain %.2f dB (>= 10)",
              valid ? "yes" : "no", 100.0 * covered, hazy_psnr, oracle_psnr, gain)};
}

}  // namespace

int main() {
  const fs::path dir = work_dir();
  const fs::path weights = dir / "toy.dhzw";
  criterion("round-trip", round_trip);
  criterion("gradient suite", gradient_suite);
  criterion("eta table", eta_table);
  criterion("level count", level_counts);
  criterion("regularizer", regularizer);
  criterion("metrics", metrics_suite);
  criterion("toy training", [&] { return toy_training(weights); });
  criterion("ablation harness", [&] { return ablation(dir); });
  criterion("end-to-end smoke", [&] { return end_to_end(dir, weights); });
  std::printf("%d of 9 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}

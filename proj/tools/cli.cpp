#include "cli.hpp"

#include <omp.h>

#include <CLI11.hpp>
#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>

#include "dehaze/config.hpp"
#include "dehaze/errors.hpp"
#include "dehaze/haze_model.hpp"
#include "dehaze/image_io.hpp"
#include "dehaze/metrics/metrics.hpp"
#include "dehaze/net/dehaze_net.hpp"
#include "dehaze/net/trainer.hpp"
#include "dehaze/pipeline/dehaze_pipeline.hpp"
#include "dehaze/synth/sample_store.hpp"
#include "dehaze/synth/scene_gen.hpp"
#include "dehaze/synth/synthesis.hpp"

namespace dhz::cli {
namespace {

namespace fs = std::filesystem;

struct UsageError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct SynthArgs {
  std::string manifest;
  std::string out;
  synth::SynthesisConfig cfg;
};

struct TrainArgs {
  std::string dataset;
  std::string out;
  std::string loss_log;
  std::string spec;
  std::string loss = "l1,l2,l3";
  double gamma = 15.0;
  net::TrainConfig cfg;
  bool quiet = false;
};

struct DehazeArgs {
  std::string input;
  std::string weights;
  std::string output;
  std::string spec;
  std::string oracle_t;
  std::string oracle_a;
  int omega = 64;
  double threshold = synth::kVarianceThreshold;
  int stride_divisor = 2;
  std::string level_weights_t;
  std::string level_weights_a;
  double lambda = mrf::kDefaultLambda;
  double epsilon = mrf::kDefaultEdgeEpsilon;
  double cg_tol = 1e-6;
  int cg_max_iter = 10000;
  bool emit_maps = false;
  int batch = 16;
};

struct EvalArgs {
  std::string pairs;
  std::string outputs;
  std::string ext = ".png";
  std::string out;
};

struct OracleArgs {
  std::string hazy;
  std::string t;
  std::string a;
  std::string output;
};

struct ScenesArgs {
  std::string out;
  int count = 4;
  synth::SceneOptions scene;
  bool haze = false;
  std::string ext = ".png";
  synth::SynthesisConfig haze_cfg;
};

fs::path with_suffix(const fs::path& p, const std::string& suffix) {
  fs::path out = p;
  out.replace_filename(p.stem().string() + suffix + p.extension().string());
  return out;
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

net::NetworkSpec load_spec(const std::string& path) {
  return path.empty() ? net::NetworkSpec::defaults() : net::NetworkSpec::load(path);
}

int cmd_synth(const SynthArgs& a, std::ostream& out, std::ostream& err) {
  a.cfg.validate();
  auto manifest = synth::DatasetManifest::load_csv(a.manifest);
  if (manifest.entries.empty()) throw UsageError("manifest " + a.manifest + " has no entries");
  synth::SampleWriter writer(a.out);
  const auto report = synth::generate_samples(manifest, a.cfg, [&](net::TrainSample&& s) { writer.write(s); });
  writer.finish();
  for (const auto& e : report.errors) err << "warning: " << e << "\n";
  out << "images " << report.images << " kept " << report.kept << " rejected " << report.rejected << " skipped "
      << report.errors.size() << "\n";
  if (report.errors.size() == manifest.entries.size()) throw UsageError("no manifest record could be read");
  if (report.kept == 0) err << "warning: no patch passed the variance gate; the dataset is empty\n";
  return kExitOk;
}

int cmd_train(TrainArgs a, std::ostream& out, std::ostream& err) {
  if (!fs::is_directory(a.dataset)) throw UsageError("dataset directory " + a.dataset + " does not exist");
  a.cfg.loss = net::LossWeights::from_list(a.loss, a.gamma);
  const auto spec = load_spec(a.spec);
  const auto data = synth::load_dataset(a.dataset);
  if (data.empty()) throw UsageError("dataset " + a.dataset + " holds no samples");
  out << "training on " << data.size() << " samples, loss " << a.cfg.loss.to_list() << ", " << a.cfg.epochs
      << " epochs\n";
  auto trained = net::train(data, spec, a.cfg, [&](int epoch, double loss) {
    if (!a.quiet) out << "epoch " << epoch << " loss " << fmt(loss) << "\n";
  });
  trained.net.save(a.out);
  const fs::path log = a.loss_log.empty() ? with_suffix(a.out, ".loss").replace_extension(".csv") : fs::path(a.loss_log);
  net::write_loss_log(log, trained.epoch_loss);
  const auto eval = net::evaluate(trained.net, data, a.cfg.loss, a.cfg.batch_size);
  out << "final loss " << fmt(trained.epoch_loss.back()) << " inference loss " << fmt(eval.loss) << " l3 "
      << fmt(eval.terms.l3) << "\n";
  err << "wrote " << a.out << " and " << log.string() << "\n";
  return kExitOk;
}

int cmd_dehaze(const DehazeArgs& a, std::ostream& out, std::ostream& err) {
  const Image hazy = io::load_image(a.input);
  const fs::path output(a.output);
  Image dehazed;
  std::optional<ScalarMap> t;
  std::optional<ColorMap> amap;
  std::optional<Mask> coverage;

  if (!a.oracle_t.empty() || !a.oracle_a.empty()) {
    if (a.oracle_t.empty() || a.oracle_a.empty()) throw UsageError("--oracle-t and --oracle-a go together");
    t = io::load_scalar_map(a.oracle_t);
    amap = io::load_color_map(a.oracle_a);
    dehazed = pipeline::oracle_dehaze(hazy, *t, *amap);
  } else {
    if (a.weights.empty()) throw UsageError("--weights is required unless oracle maps are given");
    net::DehazeNet network(load_spec(a.spec), 0);
    network.load(a.weights);
    pipeline::DehazeOptions opts;
    opts.levels.omega = a.omega;
    opts.levels.variance_threshold = a.threshold;
    opts.levels.stride_divisor = a.stride_divisor;
    if (!a.level_weights_t.empty() || !a.level_weights_a.empty()) {
      const int m = infer::level_count(hazy.height(), hazy.width(), a.omega);
      auto w = infer::AggregationWeights::uniform(m);
      if (!a.level_weights_t.empty()) w.t = parse_double_list(a.level_weights_t);
      if (!a.level_weights_a.empty()) w.a = parse_double_list(a.level_weights_a);
      opts.weights = w;
    }
    opts.regularizer.lambda = a.lambda;
    opts.regularizer.epsilon = a.epsilon;
    opts.regularizer.cg.tol = a.cg_tol;
    opts.regularizer.cg.max_iter = a.cg_max_iter;
    auto r = pipeline::dehaze_image(hazy, infer::network_estimator(network, a.batch), opts);
    out << "levels " << r.levels << "\n";
    dehazed = std::move(r.dehazed);
    t = std::move(r.t);
    amap = std::move(r.a);
    coverage = std::move(r.coverage);
  }

  io::save_image(output, dehazed);
  if (a.emit_maps) {
    io::save_scalar_map(with_suffix(output, "_t"), *t);
    io::save_color_map(with_suffix(output, "_a"), *amap);
    const Image t_rgb = pipeline::gray_to_rgb(*t);
    const Image a_rgb = retag<Image>(*amap);
    io::save_image(with_suffix(output, "_compare"), pipeline::side_by_side({&hazy, &dehazed, &t_rgb, &a_rgb}));
    if (coverage) {
      ScalarMap cov(coverage->height(), coverage->width());
      for (std::size_t i = 0; i < cov.size(); ++i) cov.values()[i] = coverage->values()[i] ? 1.0f : 0.0f;
      io::save_scalar_map(with_suffix(output, "_coverage"), cov);
    }
  }
  err << "wrote " << output.string() << "\n";
  return kExitOk;
}

int cmd_eval(const EvalArgs& a, std::ostream& out, std::ostream& err) {
  std::ifstream in(a.pairs);
  if (!in) throw UsageError("cannot open pairs manifest " + a.pairs);
  std::string line;
  if (!std::getline(in, line) || trim(line) != "id,reference") {
    throw UsageError("pairs manifest must start with header 'id,reference'");
  }
  const fs::path base = fs::path(a.pairs).parent_path();
  std::ostringstream csv;
  csv << metrics::kCsvHeader << "\n";
  metrics::Scores sum;
  int ok = 0, failed = 0;
  while (std::getline(in, line)) {
    const std::string row = trim(line);
    if (row.empty()) continue;
    const auto comma = row.find(',');
    if (comma == std::string::npos) throw UsageError("malformed pairs row: " + row);
    const std::string id = trim(row.substr(0, comma));
    fs::path ref = trim(row.substr(comma + 1));
    if (ref.is_relative()) ref = base / ref;
    const fs::path result = fs::path(a.outputs) / (id + a.ext);
    try {
      const auto s = metrics::score(io::load_image(result), io::load_image(ref));
      csv << metrics::csv_row(id, s) << "\n";
      sum.psnr += s.psnr;
      sum.ssim += s.ssim;
      sum.ciede2000 += s.ciede2000;
      ++ok;
    } catch (const std::exception& e) {
      err << "error: " << id << ": " << e.what() << "\n";
      csv << id << ",error,error,error\n";
      ++failed;
    }
  }
  if (ok > 0) {
    csv << metrics::csv_row("mean", {sum.psnr / ok, sum.ssim / ok, sum.ciede2000 / ok}) << "\n";
  }
  if (a.out.empty()) {
    out << csv.str();
  } else {
    std::ofstream f(a.out);
    if (!(f << csv.str())) throw IoError("cannot write " + a.out);
  }
  return failed > 0 || ok == 0 ? kExitUsage : kExitOk;
}

int cmd_oracle(const OracleArgs& a, std::ostream&, std::ostream& err) {
  const Image hazy = io::load_image(a.hazy);
  const ScalarMap t = io::load_scalar_map(a.t);
  const ColorMap amap = io::load_color_map(a.a);
  io::save_image(a.output, pipeline::oracle_dehaze(hazy, t, amap));
  err << "wrote " << a.output << "\n";
  return kExitOk;
}

int cmd_scenes(const ScenesArgs& a, std::ostream& out, std::ostream&) {
  if (a.count < 1) throw UsageError("--count must be positive");
  if (a.ext != ".png" && a.ext != ".pfm") throw UsageError("--ext must be .png or .pfm");
  a.haze_cfg.validate();
  const fs::path dir(a.out);
  fs::create_directories(dir);
  std::ofstream manifest(dir / "manifest.csv");
  std::ofstream pairs;
  manifest << "rgb,depth\n";
  if (a.haze) {
    pairs.open(dir / "pairs.csv");
    pairs << "id,reference\n";
  }
  for (int i = 0; i < a.count; ++i) {
    char id[32];
    std::snprintf(id, sizeof id, "scene_%03d", i);
    auto opts = a.scene;
    opts.seed = a.scene.seed + static_cast<std::uint64_t>(i);
    const auto scene = synth::make_scene(opts);
    const std::string rgb = std::string(id) + "_rgb" + a.ext;
    const std::string depth = std::string(id) + "_depth.pfm";
    io::save_image(dir / rgb, scene.rgb);
    io::save_depth(dir / depth, scene.depth);
    manifest << rgb << "," << depth << "\n";
    if (a.haze) {
      // Haze the stored image so the reference matches the file on disk.
      const Image clean = io::load_image(dir / rgb);
      const auto draw = synth::draw_haze(a.haze_cfg, static_cast<std::size_t>(i));
      const ScalarMap t = transmittance_from_depth(scene.depth, draw.beta);
      ColorMap amap(clean.height(), clean.width());
      for (std::size_t p = 0; p < amap.pixel_count(); ++p) {
        for (int c = 0; c < 3; ++c) amap.values()[3 * p + c] = draw.airlight[c];
      }
      io::save_image(dir / (std::string(id) + "_hazy" + a.ext), synthesize_haze(clean, t, amap));
      io::save_scalar_map(dir / (std::string(id) + "_t" + a.ext), t);
      io::save_color_map(dir / (std::string(id) + "_a" + a.ext), amap);
      pairs << id << "," << rgb << "\n";
    }
  }
  out << "wrote " << a.count << " scenes to " << dir.string() << "\n";
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Joint transmittance and illumination dehazing"};
  app.option_defaults()->always_capture_default();
  app.require_subcommand(1);
  app.set_config("--config", "", "INI/TOML file; [subcommand] sections set subcommand options");
  int threads = 0;
  app.add_option("--threads", threads, "worker threads (default: all cores)")->check(CLI::NonNegativeNumber);

  SynthArgs sa;
  auto* synth = app.add_subcommand("synth", "generate hazy training patches from RGB-D pairs");
  synth->add_option("--manifest", sa.manifest, "CSV with header rgb,depth")->required();
  synth->add_option("--out", sa.out, "output dataset directory")->required();
  synth->add_option("--seed", sa.cfg.seed);
  synth->add_option("--patch-size", sa.cfg.patch_size);
  synth->add_option("--threshold", sa.cfg.variance_threshold, "variance gate");
  synth->add_option("--beta-min", sa.cfg.beta_min);
  synth->add_option("--beta-max", sa.cfg.beta_max);
  synth->add_option("--a-min", sa.cfg.a_min);
  synth->add_option("--a-max", sa.cfg.a_max);
  synth->add_option("--patches-per-image", sa.cfg.patches_per_image, "0 keeps every passing patch");

  TrainArgs ta;
  auto* train = app.add_subcommand("train", "train the network on a synthesized dataset");
  train->add_option("--dataset", ta.dataset)->required();
  train->add_option("--out", ta.out, "weight file")->required();
  train->add_option("--loss-log", ta.loss_log, "CSV epoch,loss (default: <out stem>.loss.csv)");
  train->add_option("--spec", ta.spec, "network spec file");
  train->add_option("--epochs", ta.cfg.epochs);
  train->add_option("--batch", ta.cfg.batch_size);
  train->add_option("--lr", ta.cfg.learning_rate);
  train->add_option("--loss", ta.loss, "comma list of l1,l2,l3 or mse");
  train->add_option("--gamma", ta.gamma);
  train->add_option("--seed", ta.cfg.seed);
  train->add_flag("--quiet", ta.quiet, "no per-epoch lines");

  DehazeArgs da;
  auto* dehaze = app.add_subcommand("dehaze", "dehaze one image");
  dehaze->add_option("--input", da.input)->required();
  dehaze->add_option("--output", da.output)->required();
  dehaze->add_option("--weights", da.weights);
  dehaze->add_option("--spec", da.spec);
  dehaze->add_option("--oracle-t", da.oracle_t, "bypass the network with a given transmittance map");
  dehaze->add_option("--oracle-a", da.oracle_a, "bypass the network with a given illumination map");
  dehaze->add_option("--omega", da.omega, "network patch size");
  dehaze->add_option("--threshold", da.threshold, "variance gate");
  dehaze->add_option("--stride-divisor", da.stride_divisor);
  dehaze->add_option("--level-weights-t", da.level_weights_t, "comma list, one per level");
  dehaze->add_option("--level-weights-a", da.level_weights_a, "comma list, one per level");
  dehaze->add_option("--lambda", da.lambda, "smoothness scale");
  dehaze->add_option("--epsilon", da.epsilon, "edge weight epsilon");
  dehaze->add_option("--cg-tol", da.cg_tol);
  dehaze->add_option("--cg-max-iter", da.cg_max_iter);
  dehaze->add_option("--batch", da.batch, "patches per network call");
  dehaze->add_flag("--emit-maps", da.emit_maps, "also write _t, _a, _coverage and _compare images");

  EvalArgs ea;
  auto* eval = app.add_subcommand("eval", "score dehazed outputs against references");
  eval->add_option("--pairs", ea.pairs, "CSV with header id,reference")->required();
  eval->add_option("--outputs", ea.outputs, "directory holding <id><ext>")->required();
  eval->add_option("--ext", ea.ext);
  eval->add_option("--out", ea.out, "CSV path (default: stdout)");

  OracleArgs oa;
  auto* oracle = app.add_subcommand("oracle-dehaze", "recover with ground-truth maps");
  oracle->add_option("--hazy", oa.hazy)->required();
  oracle->add_option("--t", oa.t)->required();
  oracle->add_option("--a", oa.a)->required();
  oracle->add_option("--output", oa.output)->required();

  ScenesArgs ca;
  auto* scenes = app.add_subcommand("make-scenes", "write procedural RGB-D scenes and a manifest");
  scenes->add_option("--out", ca.out)->required();
  scenes->add_option("--count", ca.count);
  scenes->add_option("--height", ca.scene.height);
  scenes->add_option("--width", ca.scene.width);
  scenes->add_option("--max-depth", ca.scene.max_depth);
  scenes->add_option("--seed", ca.scene.seed);
  scenes->add_flag("--haze", ca.haze, "also write hazy images, t/A maps and pairs.csv");
  scenes->add_option("--ext", ca.ext, ".png or .pfm");
  scenes->add_option("--beta-min", ca.haze_cfg.beta_min);
  scenes->add_option("--beta-max", ca.haze_cfg.beta_max);
  scenes->add_option("--a-min", ca.haze_cfg.a_min);
  scenes->add_option("--a-max", ca.haze_cfg.a_max);

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }
  ca.haze_cfg.seed = ca.scene.seed;
  if (threads > 0) omp_set_num_threads(threads);

  try {
    if (*synth) return cmd_synth(sa, out, err);
    if (*train) return cmd_train(ta, out, err);
    if (*dehaze) return cmd_dehaze(da, out, err);
    if (*eval) return cmd_eval(ea, out, err);
    if (*oracle) return cmd_oracle(oa, out, err);
    if (*scenes) return cmd_scenes(ca, out, err);
  } catch (const NumericalError& e) {
    err << "numerical error: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const IoError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitNumerical;
  }
  return kExitUsage;
}

}  // namespace dhz::cli

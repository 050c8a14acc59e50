// Copyright 2026 The somkit Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <boost/program_options.hpp>
#include <nlohmann/json.hpp>
#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "experiment.hpp"
#include "somkit/clb.hpp"
#include "somkit/common.hpp"
#include "somkit/dataio.hpp"
#include "somkit/eval.hpp"
#include "somkit/gan.hpp"
#include "somkit/image_io.hpp"
#include "somkit/measurement.hpp"
#include "somkit/rng.hpp"
#include "somkit/train.hpp"

namespace po = boost::program_options;
namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace somkit;

namespace {

constexpr const char* kUsage = R"(somkit - measurement-aware unpaired translation toolkit

usage: somkit COMMAND [options]

commands:
  generate-clb           synthesize a clustered lumpy background corpus
  simulate-measurements  push a corpus through the measurement model
  ingest                 import a directory of images as a corpus
  train                  drive an experiment config end to end
  resume                 continue an interrupted training run
  translate              map a corpus through a trained generator
  evaluate               compare a generated corpus against a truth corpus
  interpret              probe a trained generator with object-level edits

run `somkit COMMAND --help` for the command's options.
exit codes: 0 success, 2 configuration error, 3 data error, 4 training divergence
)";

std::string read_text_file(const fs::path& file) {
  std::ifstream f(file);
  if (!f) throw DataError("cannot open " + file.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

/// Parses flags against opts; returns false when --help was printed.
bool parse_flags(int argc, char** argv, const po::options_description& opts,
                 const std::string& command, po::variables_map& vm) {
  try {
    po::store(po::parse_command_line(argc, argv, opts), vm);
  } catch (const po::error& e) {
    throw ConfigError("somkit " + command + ": " + e.what());
  }
  if (vm.count("help")) {
    std::cout << "usage: somkit " << command << " [options]\n\n" << opts;
    return false;
  }
  try {
    po::notify(vm);
  } catch (const po::error& e) {
    throw ConfigError("somkit " + command + ": " + e.what());
  }
  return true;
}

void require_new_path(const fs::path& p, bool force) {
  if (!fs::exists(p)) return;
  if (fs::is_directory(p) && fs::is_empty(p)) return;
  if (!force)
    throw DataError("output " + p.string() + " already exists; pass --force to replace it");
  fs::remove_all(p);
}

/// Accumulates images plus their manifest into a corpus directory.
class CorpusWriter {
 public:
  CorpusWriter(fs::path dir, std::string name, Domain domain, int h, int w, NormMap norm,
               std::optional<meas::MeasurementConfig> mc)
      : dir_(std::move(dir)) {
    m_.name = std::move(name);
    m_.domain = domain;
    m_.height = h;
    m_.width = w;
    m_.normalization = norm;
    m_.measurement = std::move(mc);
    m_.dir = dir_;
  }

  void add(const Image& img, data::ManifestEntry e) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "img_%07d.somi", static_cast<int>(m_.entries.size()));
    io::write_image(dir_ / buf, img);
    e.path = buf;
    m_.entries.push_back(std::move(e));
  }

  fs::path finish() {
    const fs::path file = dir_ / "manifest.json";
    data::save_manifest(m_, file);
    return file;
  }

 private:
  fs::path dir_;
  data::DatasetManifest m_;
};

/// A model restored from a run directory or one of its checkpoint
/// directories. The optimizers exist only to satisfy the checkpoint layout.
struct LoadedModel {
  train::TrainConfig cfg;
  std::unique_ptr<gan::CycleGan<float>> model;
  std::unique_ptr<nn::Adam<float>> gen_opt;
  std::unique_ptr<nn::Adam<float>> disc_opt;
  std::int64_t step = 0;
  fs::path run_dir;
  fs::path checkpoint;
};

std::int64_t checkpoint_step(const std::string& name) {
  if (name.rfind("step_", 0) != 0) return -1;
  std::size_t pos = 0;
  long long v = -1;
  try {
    v = std::stoll(name.substr(5), &pos);
  } catch (const std::exception&) {
    return -1;
  }
  if (pos != name.size() - 5) return -1;
  return v;
}

LoadedModel load_model(const fs::path& where) {
  fs::path run_dir, ckpt;
  if (fs::exists(where / "config.json") && fs::is_directory(where / "checkpoints")) {
    run_dir = where;
    std::int64_t best = -1;
    for (const auto& entry : fs::directory_iterator(run_dir / "checkpoints")) {
      const std::int64_t s = checkpoint_step(entry.path().filename().string());
      if (s > best) {
        best = s;
        ckpt = entry.path();
      }
    }
    if (best < 0) throw DataError("run at " + run_dir.string() + " has no checkpoints");
  } else if (fs::exists(where / "checkpoint.json")) {
    ckpt = where;
    run_dir = where.parent_path().parent_path();
    if (!fs::exists(run_dir / "config.json"))
      throw DataError("cannot find the run config above checkpoint " + where.string());
  } else {
    throw DataError("no run or checkpoint at " + where.string());
  }

  LoadedModel lm;
  lm.cfg = train::load_train_config(run_dir / "config.json");
  lm.model = std::make_unique<gan::CycleGan<float>>(lm.cfg.generator, lm.cfg.discriminator,
                                                    lm.cfg.loss, lm.cfg.measurement);
  lm.gen_opt = std::make_unique<nn::Adam<float>>(lm.model->generator_params(), lm.cfg.adam);
  lm.disc_opt = std::make_unique<nn::Adam<float>>(lm.model->discriminator_params(), lm.cfg.adam);
  lm.step = train::load_checkpoint(ckpt, lm.model.get(), lm.gen_opt.get(), lm.disc_opt.get());
  lm.run_dir = run_dir;
  lm.checkpoint = ckpt;
  return lm;
}

train::StepCallback progress_printer(std::int64_t total) {
  auto last = std::make_shared<std::chrono::steady_clock::time_point>(
      std::chrono::steady_clock::now() - std::chrono::hours(1));
  return [last, total](const train::RunRecord& r) {
    const auto now = std::chrono::steady_clock::now();
    if (r.step != total && now - *last < std::chrono::seconds(5)) return;
    *last = now;
    std::printf("step %lld/%lld  gen %.4f  disc_y %.4f  disc_x %.4f  cycle %.4f  %.0f ms\n",
                static_cast<long long>(r.step), static_cast<long long>(total),
                r.losses.gen_total, r.losses.disc_y, r.losses.disc_x,
                r.losses.cycle_x + r.losses.cycle_y, r.wall_ms);
    std::fflush(stdout);
  };
}

cv::Mat render8(const Image& img) {
  const cv::Mat m(img.h, img.w, CV_32F, const_cast<float*>(img.px.data()));
  cv::Mat out;
  m.convertTo(out, CV_8U, 127.5, 127.5);
  return out;
}

void write_png(const fs::path& file, const cv::Mat& m) {
  if (!cv::imwrite(file.string(), m)) throw DataError("cannot write " + file.string());
}

std::vector<const Image*> pointers(const data::CorpusCache& c) {
  std::vector<const Image*> p;
  p.reserve(c.count());
  for (std::size_t i = 0; i < c.count(); ++i) p.push_back(&c.image(i));
  return p;
}

std::vector<const Image*> pointers(const std::vector<Image>& v, std::size_t begin,
                                   std::size_t count) {
  std::vector<const Image*> p;
  p.reserve(count);
  for (std::size_t i = begin; i < begin + count; ++i) p.push_back(&v[i]);
  return p;
}

Image central_crop(const Image& img, int ph, int pw) {
  if (ph > img.h || pw > img.w)
    throw DataError("patch " + std::to_string(ph) + "x" + std::to_string(pw) +
                    " does not fit in " + std::to_string(img.h) + "x" + std::to_string(img.w) +
                    " images");
  const int y0 = (img.h - ph) / 2;
  const int x0 = (img.w - pw) / 2;
  Image out(ph, pw);
  out.tag = img.tag;
  out.norm = img.norm;
  out.provenance = img.provenance;
  for (int y = 0; y < ph; ++y)
    for (int x = 0; x < pw; ++x) out.at(y, x) = img.at(y0 + y, x0 + x);
  return out;
}

int cmd_generate_clb(int argc, char** argv) {
  po::options_description opts("options");
  opts.add_options()
      ("help,h", "print this help")
      ("config", po::value<std::string>(), "experiment config (clb_x is used) or a CLB parameter json file")
      ("preset", po::value<std::string>(), "named CLB parameter preset")
      ("count", po::value<int>()->required(), "number of images to synthesize")
      ("size", po::value<int>()->default_value(0), "square image size, overriding the parameters")
      ("seed", po::value<std::uint64_t>()->default_value(1), "base seed; image i uses seed + i")
      ("out", po::value<std::string>()->required(), "output corpus directory")
      ("force", po::bool_switch(), "replace an existing output");
  po::variables_map vm;
  if (!parse_flags(argc, argv, opts, "generate-clb", vm)) return 0;

  if (vm.count("config") && vm.count("preset"))
    throw ConfigError("pass either --config or --preset, not both");
  clb::ClbParams params;
  if (vm.count("preset")) params = clb::preset(vm["preset"].as<std::string>());
  if (vm.count("config")) {
    const std::string text = read_text_file(vm["config"].as<std::string>());
    json probe;
    try {
      probe = json::parse(text);
    } catch (const json::exception& e) {
      throw ConfigError(std::string("malformed config: ") + e.what());
    }
    if (probe.contains("clb_x"))
      params = cli::experiment_from_json(text).clb_x.params;
    else
      params = cli::merge_clb_params(params, text, "clb params");
  }
  const int size = vm["size"].as<int>();
  if (size > 0) {
    params.height = size;
    params.width = size;
  }

  const fs::path out = vm["out"].as<std::string>();
  require_new_path(out, vm["force"].as<bool>());
  const data::DatasetManifest m = data::synthesize_corpus(
      params, vm["count"].as<int>(), vm["seed"].as<std::uint64_t>(), std::nullopt, out);
  std::cout << "wrote " << m.count() << " images (" << m.height << "x" << m.width << ")\n"
            << (out / "manifest.json").string() << "\n";
  return 0;
}

int cmd_simulate_measurements(int argc, char** argv) {
  po::options_description opts("options");
  opts.add_options()
      ("help,h", "print this help")
      ("in", po::value<std::string>()->required(), "input corpus manifest")
      ("noise-model", po::value<std::string>()->default_value("gaussian_additive"), "noise law: gaussian_additive or none")
      ("noise-std", po::value<double>()->default_value(0.04), "noise standard deviation")
      ("noise-mean", po::value<double>()->default_value(0.0), "noise mean")
      ("seed", po::value<std::uint64_t>()->default_value(1), "noise seed root; image i forks stream i")
      ("out", po::value<std::string>()->required(), "output corpus directory")
      ("force", po::bool_switch(), "replace an existing output");
  po::variables_map vm;
  if (!parse_flags(argc, argv, opts, "simulate-measurements", vm)) return 0;

  meas::MeasurementConfig mc;
  mc.noise_model = meas::noise_model_from_name(vm["noise-model"].as<std::string>());
  mc.noise_std = vm["noise-std"].as<double>();
  mc.noise_mean = vm["noise-mean"].as<double>();
  mc.validate();

  const data::DatasetManifest in = data::load_manifest(vm["in"].as<std::string>());
  const fs::path out = vm["out"].as<std::string>();
  require_new_path(out, vm["force"].as<bool>());
  fs::create_directories(out);

  const rng::Stream root(vm["seed"].as<std::uint64_t>());
  CorpusWriter w(out, in.name + "-measured", Domain::Y, in.height, in.width, in.normalization, mc);
  for (std::size_t i = 0; i < in.count(); ++i) {
    const Image img = io::read_image(in.entry_path(i));
    const std::uint64_t s = root.fork(static_cast<std::uint64_t>(i)).seed();
    data::ManifestEntry e;
    e.seed = s;
    e.source = in.entries[i].path;
    w.add(meas::apply_measurement(img, mc, s), std::move(e));
  }
  std::cout << "measured " << in.count() << " images\n" << w.finish().string() << "\n";
  return 0;
}

int cmd_ingest(int argc, char** argv) {
  po::options_description opts("options");
  opts.add_options()
      ("help,h", "print this help")
      ("dir", po::value<std::string>()->required(), "directory of image files to import")
      ("size", po::value<int>()->required(), "square size to resize every image to")
      ("lo", po::value<double>()->default_value(0.5), "low normalization percentile")
      ("hi", po::value<double>()->default_value(99.5), "high normalization percentile")
      ("out", po::value<std::string>()->required(), "output corpus directory")
      ("force", po::bool_switch(), "replace an existing output");
  po::variables_map vm;
  if (!parse_flags(argc, argv, opts, "ingest", vm)) return 0;

  const fs::path out = vm["out"].as<std::string>();
  require_new_path(out, vm["force"].as<bool>());
  const int size = vm["size"].as<int>();
  data::IngestPolicy policy{vm["lo"].as<double>(), vm["hi"].as<double>()};
  const data::DatasetManifest m =
      data::ingest_directory(vm["dir"].as<std::string>(), size, size, policy, out);
  std::cout << "ingested " << m.count() << " images (" << m.skipped << " skipped)\n"
            << (out / "manifest.json").string() << "\n";
  return 0;
}

int cmd_train(int argc, char** argv) {
  po::options_description opts("options");
  opts.add_options()
      ("help,h", "print this help")
      ("config", po::value<std::string>()->required(), "experiment config file")
      ("force", po::bool_switch(), "regenerate corpora and restart an existing run");
  po::variables_map vm;
  if (!parse_flags(argc, argv, opts, "train", vm)) return 0;
  const bool force = vm["force"].as<bool>();

  cli::ExperimentConfig cfg = cli::load_experiment_config(vm["config"].as<std::string>());
  fs::create_directories(cfg.output_dir);
  cli::save_experiment_config(cfg, cfg.output_dir / "config.resolved.json");
  cli::prepare_corpora(cfg, force);

  const train::TrainConfig tc = cli::trainer_config(cfg);
  train::save_train_config(tc, cfg.output_dir / "train.config.json");

  const fs::path run_dir = cfg.output_dir / "run";
  if (fs::exists(run_dir / "config.json")) {
    if (!force)
      throw DataError("run directory " + run_dir.string() +
                      " already holds a run; use `somkit resume --run-dir " + run_dir.string() +
                      "` or pass --force to restart it");
    fs::remove_all(run_dir);
  }

  train::Trainer t(tc, run_dir);
  std::cout << "training " << (cfg.ambient ? "with" : "without")
            << " the in-loop measurement operator for " << tc.total_steps << " steps\n";
  t.run(-1, progress_printer(tc.total_steps));
  std::cout << "finished at step " << t.step() << "\n"
            << "run directory: " << run_dir.string() << "\n";
  return 0;
}

int cmd_resume(int argc, char** argv) {
  po::options_description opts("options");
  opts.add_options()
      ("help,h", "print this help")
      ("run-dir", po::value<std::string>()->required(), "run directory to continue");
  po::variables_map vm;
  if (!parse_flags(argc, argv, opts, "resume", vm)) return 0;

  train::Trainer t = train::Trainer::resume(vm["run-dir"].as<std::string>());
  const std::int64_t total = t.config().total_steps;
  if (t.step() >= total) {
    std::cout << "run already complete at step " << t.step() << "\n";
    return 0;
  }
  std::cout << "resuming at step " << t.step() << " of " << total << "\n";
  t.run(-1, progress_printer(total));
  std::cout << "finished at step " << t.step() << "\n";
  return 0;
}

int cmd_translate(int argc, char** argv) {
  po::options_description opts("options");
  opts.add_options()
      ("help,h", "print this help")
      ("checkpoint", po::value<std::string>()->required(), "run directory or checkpoint directory")
      ("in", po::value<std::string>()->required(), "mathematical-domain corpus manifest")
      ("count", po::value<int>()->default_value(0), "translate only the first N images (0 = all)")
      ("out", po::value<std::string>()->required(), "output corpus directory")
      ("force", po::bool_switch(), "replace an existing output");
  po::variables_map vm;
  if (!parse_flags(argc, argv, opts, "translate", vm)) return 0;

  LoadedModel lm = load_model(vm["checkpoint"].as<std::string>());
  const data::DatasetManifest in = data::load_manifest(vm["in"].as<std::string>());
  if (in.domain != Domain::X)
    throw DataError("translate expects a mathematical-domain corpus, got domain " +
                    std::string(domain_name(in.domain)));
  if (in.height != lm.cfg.image_size || in.width != lm.cfg.image_size)
    throw DataError("corpus is " + std::to_string(in.height) + "x" + std::to_string(in.width) +
                    ", the model expects " + std::to_string(lm.cfg.image_size));

  const int req = vm["count"].as<int>();
  const std::size_t n =
      req > 0 ? std::min<std::size_t>(req, in.count()) : in.count();
  const fs::path out = vm["out"].as<std::string>();
  require_new_path(out, vm["force"].as<bool>());
  fs::create_directories(out);

  CorpusWriter w(out, in.name + "-translated", Domain::YClean, in.height, in.width, NormMap{},
                 std::nullopt);
  for (std::size_t i = 0; i < n; ++i) {
    const Image img = io::read_image(in.entry_path(i));
    data::ManifestEntry e;
    e.source = in.entries[i].path;
    w.add(gan::translate_to_measurement_clean(lm.model->g_x(), img), std::move(e));
  }
  std::cout << "translated " << n << " images with the step " << lm.step << " checkpoint\n"
            << w.finish().string() << "\n";
  return 0;
}

std::set<std::string> parse_metrics(const std::string& csv) {
  const std::set<std::string> known{"fid", "raps", "ssim", "ho"};
  std::set<std::string> out;
  std::istringstream in(csv);
  std::string tok;
  while (std::getline(in, tok, ',')) {
    if (tok.empty()) continue;
    if (!known.count(tok))
      throw ConfigError("unknown metric \"" + tok + "\"; choose from fid,raps,ssim,ho");
    out.insert(tok);
  }
  if (out.empty()) throw ConfigError("--metrics selected nothing");
  return out;
}

void write_roc_json(const fs::path& file, const eval::RocResult& roc) {
  json doc{{"auc", roc.auc},
           {"thresholds", roc.thresholds},
           {"fpf", roc.fpf},
           {"tpf", roc.tpf}};
  std::ofstream f(file, std::ios::trunc);
  if (!f) throw DataError("cannot write " + file.string());
  f << doc.dump(2) << "\n";
}

int cmd_evaluate(int argc, char** argv) {
  po::options_description opts("options");
  opts.add_options()
      ("help,h", "print this help")
      ("truth", po::value<std::string>()->required(), "truth corpus manifest")
      ("gen", po::value<std::string>()->required(), "generated corpus manifest")
      ("metrics", po::value<std::string>()->default_value("fid,raps,ssim,ho"), "comma-separated subset of fid,raps,ssim,ho")
      ("config", po::value<std::string>(), "experiment config supplying eval defaults")
      ("embedder", po::value<std::string>(), "feature embedder: downsample:SIDE, rp:DIM[:SEED], or canonical:PATH")
      ("ssim-pairs", po::value<int>(), "similarity pairs to sample per corpus")
      ("ssim-seed", po::value<std::uint64_t>(), "similarity pair sampling seed")
      ("patch", po::value<int>(), "square detection patch size")
      ("ho-train", po::value<int>(), "observer training pairs per corpus")
      ("ho-test", po::value<int>(), "observer test pairs per corpus")
      ("ho-reg", po::value<double>(), "observer covariance regularization")
      ("ho-seed", po::value<std::uint64_t>(), "observer dataset shuffling seed")
      ("signal-amplitude", po::value<double>(), "detection signal peak amplitude")
      ("signal-std", po::value<double>(), "detection signal spatial width")
      ("out", po::value<std::string>()->required(), "output report directory")
      ("force", po::bool_switch(), "replace an existing output");
  po::variables_map vm;
  if (!parse_flags(argc, argv, opts, "evaluate", vm)) return 0;

  cli::EvalSpec spec;
  if (vm.count("config"))
    spec = cli::load_experiment_config(vm["config"].as<std::string>()).eval;
  if (vm.count("embedder"))
    spec.embedder = cli::embedder_from_string(vm["embedder"].as<std::string>());
  if (vm.count("ssim-pairs")) spec.ssim_pairs = vm["ssim-pairs"].as<int>();
  if (vm.count("ssim-seed")) spec.ssim_seed = vm["ssim-seed"].as<std::uint64_t>();
  if (vm.count("patch"))
    spec.signal.patch_h = spec.signal.patch_w = vm["patch"].as<int>();
  if (vm.count("ho-train")) spec.ho_train = vm["ho-train"].as<int>();
  if (vm.count("ho-test")) spec.ho_test = vm["ho-test"].as<int>();
  if (vm.count("ho-reg")) spec.ho_regularization = vm["ho-reg"].as<double>();
  if (vm.count("ho-seed")) spec.ho_seed = vm["ho-seed"].as<std::uint64_t>();
  if (vm.count("signal-amplitude")) spec.signal.amplitude = vm["signal-amplitude"].as<double>();
  if (vm.count("signal-std")) spec.signal.spatial_std = vm["signal-std"].as<double>();
  spec.validate();

  const std::set<std::string> metrics = parse_metrics(vm["metrics"].as<std::string>());
  const data::DatasetManifest tm = data::load_manifest(vm["truth"].as<std::string>());
  const data::DatasetManifest gm = data::load_manifest(vm["gen"].as<std::string>());
  if (tm.height != gm.height || tm.width != gm.width)
    throw DataError("corpora disagree on image size: " + std::to_string(tm.height) + "x" +
                    std::to_string(tm.width) + " vs " + std::to_string(gm.height) + "x" +
                    std::to_string(gm.width));

  const fs::path out = vm["out"].as<std::string>();
  require_new_path(out, vm["force"].as<bool>());
  fs::create_directories(out);

  const data::CorpusCache truth(tm);
  const data::CorpusCache gen(gm);
  const std::vector<const Image*> tp = pointers(truth);
  const std::vector<const Image*> gp = pointers(gen);

  eval::EvalReport rep;

  if (metrics.count("fid")) {
    const eval::FeatureEmbedder emb = cli::make_embedder(spec.embedder);
    rep.scalars["fid"] = eval::fid(emb.embed_set(tp), emb.embed_set(gp));
  }

  if (metrics.count("raps")) {
    const eval::RadialSpectrum st = eval::radial_power_spectrum(tp);
    const eval::RadialSpectrum sg = eval::radial_power_spectrum(gp);
    rep.scalars["log_spectrum_distance"] = eval::log_spectrum_distance(st, sg);
    rep.scalars["high_freq_mean_truth"] = eval::high_freq_mean(st);
    rep.scalars["high_freq_mean_gen"] = eval::high_freq_mean(sg);
    rep.curves["raps_truth"] = st.power;
    rep.curves["raps_gen"] = sg.power;
    std::vector<double> radii(st.power.size());
    for (std::size_t i = 0; i < radii.size(); ++i) radii[i] = static_cast<double>(i + 1);
    eval::save_line_plot(out / "spectrum.png", "radially averaged power spectrum",
                         "spatial frequency radius", "power",
                         {{"truth", radii, st.power}, {"generated", radii, sg.power}}, true);
  }

  if (metrics.count("ssim")) {
    const eval::PairPdf pt = eval::ssim_pair_pdf(tp, tp, spec.ssim_pairs, spec.ssim_seed);
    const eval::PairPdf pg = eval::ssim_pair_pdf(gp, gp, spec.ssim_pairs, spec.ssim_seed);
    rep.scalars["ssim_ks"] = eval::ks_statistic(pg, pt);
    rep.scalars["ssim_mean_truth"] = pt.mean;
    rep.scalars["ssim_mean_gen"] = pg.mean;
    rep.curves["ssim_pdf_truth"] = pt.density;
    rep.curves["ssim_pdf_gen"] = pg.density;
    std::vector<double> grid(pt.density.size());
    for (std::size_t i = 0; i < grid.size(); ++i)
      grid[i] = -1.0 + (i + 0.5) * 2.0 / grid.size();
    eval::save_line_plot(out / "ssim_pdf.png", "pairwise structural similarity",
                         "ssim", "density",
                         {{"truth", grid, pt.density}, {"generated", grid, pg.density}}, false);
  }

  if (metrics.count("ho")) {
    const int need = spec.ho_train + spec.ho_test;
    if (static_cast<int>(truth.count()) < need || static_cast<int>(gen.count()) < need)
      throw DataError("observer study needs " + std::to_string(need) +
                      " images per corpus; lower --ho-train/--ho-test or supply more images");
    std::vector<Image> tc, gc;
    tc.reserve(truth.count());
    gc.reserve(gen.count());
    for (const Image* im : tp) tc.push_back(central_crop(*im, spec.signal.patch_h, spec.signal.patch_w));
    for (const Image* im : gp) gc.push_back(central_crop(*im, spec.signal.patch_h, spec.signal.patch_w));

    const auto run_study = [&](const std::vector<Image>& crops) {
      std::vector<const Image*> bg = pointers(crops, 0, crops.size());
      const eval::SkeDataset ske = eval::make_ske_dataset(bg, spec.signal, spec.ho_seed);
      const auto train_p = pointers(ske.present, 0, spec.ho_train);
      const auto train_a = pointers(ske.absent, 0, spec.ho_train);
      const auto test_p = pointers(ske.present, spec.ho_train, spec.ho_test);
      const auto test_a = pointers(ske.absent, spec.ho_train, spec.ho_test);
      const Eigen::VectorXd w = eval::ho_template(train_p, train_a, spec.ho_regularization);
      return eval::ho_roc(w, test_p, test_a);
    };
    const eval::RocResult roc_t = run_study(tc);
    const eval::RocResult roc_g = run_study(gc);
    rep.scalars["ho_auc_truth"] = roc_t.auc;
    rep.scalars["ho_auc_gen"] = roc_g.auc;
    rep.scalars["ho_auc_gap"] = std::abs(roc_g.auc - roc_t.auc);
    rep.curves["roc_fpf_truth"] = roc_t.fpf;
    rep.curves["roc_tpf_truth"] = roc_t.tpf;
    rep.curves["roc_fpf_gen"] = roc_g.fpf;
    rep.curves["roc_tpf_gen"] = roc_g.tpf;
    write_roc_json(out / "roc.json", roc_g);
    write_roc_json(out / "roc_truth.json", roc_t);
    eval::save_roc_plot(out / "roc.png", roc_g);
    eval::save_roc_plot(out / "roc_truth.png", roc_t);
  }

  eval::save_eval_report(rep, out / "report.json");
  for (const auto& [name, value] : rep.scalars)
    std::cout << name << " = " << value << "\n";
  std::cout << (out / "report.json").string() << "\n";
  return 0;
}

struct Edit {
  enum class Kind { Add, Move } kind = Kind::Add;
  double cx = 0.0;
  double cy = 0.0;
  int count = 0;
  std::size_t index = 0;
};

double edit_number(const std::string& tok) {
  std::size_t pos = 0;
  double v = 0.0;
  try {
    v = std::stod(tok, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos != tok.size() || tok.empty())
    throw ConfigError("bad number \"" + tok + "\" in --edit");
  return v;
}

Edit parse_edit(const std::string& text) {
  const auto bad = [&]() {
    return ConfigError("bad edit \"" + text + "\"; use add:CX,CY,N or move:INDEX,CX,CY");
  };
  const std::size_t colon = text.find(':');
  if (colon == std::string::npos) throw bad();
  const std::string verb = text.substr(0, colon);
  std::vector<std::string> parts;
  std::istringstream in(text.substr(colon + 1));
  std::string tok;
  while (std::getline(in, tok, ',')) parts.push_back(tok);

  Edit e;
  if (verb == "add" && parts.size() == 3) {
    e.kind = Edit::Kind::Add;
    e.cx = edit_number(parts[0]);
    e.cy = edit_number(parts[1]);
    const double n = edit_number(parts[2]);
    if (n != std::floor(n)) throw bad();
    e.count = static_cast<int>(n);
    if (e.count < 1) throw ConfigError("an added cluster needs at least one lump");
    return e;
  }
  if (verb == "move" && parts.size() == 3) {
    e.kind = Edit::Kind::Move;
    const double idx = edit_number(parts[0]);
    if (idx != std::floor(idx) || idx < 0) throw bad();
    e.index = static_cast<std::size_t>(idx);
    e.cx = edit_number(parts[1]);
    e.cy = edit_number(parts[2]);
    return e;
  }
  throw bad();
}

int cmd_interpret(int argc, char** argv) {
  po::options_description opts("options");
  opts.add_options()
      ("help,h", "print this help")
      ("checkpoint", po::value<std::string>()->required(), "run directory or checkpoint directory")
      ("base-seed", po::value<std::uint64_t>()->default_value(1), "seed of the base object")
      ("preset", po::value<std::string>(), "named CLB parameter preset for the base object")
      ("params", po::value<std::string>(), "CLB parameter json file for the base object")
      ("edit", po::value<std::string>()->required(), "add:CX,CY,N or move:INDEX,CX,CY")
      ("edit-seed", po::value<std::uint64_t>()->default_value(1), "seed for the added cluster's lumps")
      ("threshold", po::value<double>()->default_value(0.5), "required in-region fraction of difference energy")
      ("out", po::value<std::string>()->required(), "output directory")
      ("force", po::bool_switch(), "replace an existing output");
  po::variables_map vm;
  if (!parse_flags(argc, argv, opts, "interpret", vm)) return 0;

  LoadedModel lm = load_model(vm["checkpoint"].as<std::string>());
  clb::ClbParams params;
  if (vm.count("preset")) params = clb::preset(vm["preset"].as<std::string>());
  if (vm.count("params"))
    params = cli::merge_clb_params(params, read_text_file(vm["params"].as<std::string>()),
                                   "clb params");
  params.height = params.width = lm.cfg.image_size;

  const clb::ClbRealization base = clb::sample_clb(params, vm["base-seed"].as<std::uint64_t>());
  const Edit e = parse_edit(vm["edit"].as<std::string>());

  clb::ClbRealization edited = base;
  struct Circle {
    double cx, cy, r;
  };
  std::vector<Circle> region;
  if (e.kind == Edit::Kind::Add) {
    edited = clb::add_cluster(base, e.cx, e.cy, e.count, vm["edit-seed"].as<std::uint64_t>());
    region.push_back({e.cx, e.cy, clb::cluster_support_radius(params, edited.clusters.back())});
  } else {
    if (e.index >= base.clusters.size())
      throw ConfigError("edit moves cluster " + std::to_string(e.index) +
                        " but the object has only " + std::to_string(base.clusters.size()));
    const clb::Cluster& old = base.clusters[e.index];
    edited = clb::move_cluster(base, e.index, e.cx, e.cy);
    const double r = clb::cluster_support_radius(params, old);
    region.push_back({old.cx, old.cy, r});
    region.push_back({e.cx, e.cy, r});
  }

  Image raw_base = clb::rasterize_raw(base);
  Image raw_edit = clb::rasterize_raw(edited);
  float lo = raw_base.px[0], hi = raw_base.px[0];
  for (const Image* im : {&raw_base, &raw_edit})
    for (float v : im->px) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  const NormMap norm = norm_map_from_range(lo, hi);
  apply_norm(raw_base, norm);
  apply_norm(raw_edit, norm);

  const Image y_base = gan::translate_to_measurement_clean(lm.model->g_x(), raw_base);
  const Image y_edit = gan::translate_to_measurement_clean(lm.model->g_x(), raw_edit);

  double total = 0.0, inside = 0.0;
  for (int y = 0; y < y_base.h; ++y)
    for (int x = 0; x < y_base.w; ++x) {
      const double d = static_cast<double>(y_edit.at(y, x)) - y_base.at(y, x);
      const double d2 = d * d;
      total += d2;
      for (const Circle& c : region)
        if (std::hypot(x - c.cx, y - c.cy) <= c.r) {
          inside += d2;
          break;
        }
    }
  const double fraction = total > 0.0 ? inside / total : 1.0;
  const double threshold = vm["threshold"].as<double>();

  const fs::path out = vm["out"].as<std::string>();
  require_new_path(out, vm["force"].as<bool>());
  fs::create_directories(out);

  std::ofstream(out / "object_base.json") << clb::to_json(base) << "\n";
  std::ofstream(out / "object_edited.json") << clb::to_json(edited) << "\n";
  io::write_image(out / "object_base.somi", raw_base);
  io::write_image(out / "object_edited.somi", raw_edit);
  io::write_image(out / "translated_base.somi", y_base);
  io::write_image(out / "translated_edited.somi", y_edit);
  write_png(out / "object_base.png", render8(raw_base));
  write_png(out / "object_edited.png", render8(raw_edit));
  write_png(out / "translated_base.png", render8(y_base));
  write_png(out / "translated_edited.png", render8(y_edit));

  cv::Mat diff(y_base.h, y_base.w, CV_32F);
  float dmax = 0.0f;
  for (int y = 0; y < y_base.h; ++y)
    for (int x = 0; x < y_base.w; ++x) {
      const float d = std::abs(y_edit.at(y, x) - y_base.at(y, x));
      diff.at<float>(y, x) = d;
      dmax = std::max(dmax, d);
    }
  cv::Mat diff8, heat;
  diff.convertTo(diff8, CV_8U, dmax > 0.0f ? 255.0 / dmax : 0.0, 0.0);
  cv::applyColorMap(diff8, heat, cv::COLORMAP_INFERNO);
  write_png(out / "difference.png", heat);

  json circles = json::array();
  for (const Circle& c : region)
    circles.push_back({{"cx", c.cx}, {"cy", c.cy}, {"radius", c.r}});
  json doc{{"format_version", 1},
           {"edit", vm["edit"].as<std::string>()},
           {"base_seed", vm["base-seed"].as<std::uint64_t>()},
           {"checkpoint_step", lm.step},
           {"difference_energy", total},
           {"localization_fraction", fraction},
           {"threshold", threshold},
           {"localized", fraction >= threshold},
           {"region", circles}};
  std::ofstream(out / "interpret.json") << doc.dump(2) << "\n";

  std::cout << "difference energy " << total << ", localization fraction " << fraction
            << " (threshold " << threshold << "): "
            << (fraction >= threshold ? "localized" : "NOT localized") << "\n"
            << (out / "interpret.json").string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 2) {
    std::cerr << kUsage;
    return 2;
  }
  const std::string cmd = argv[1];
  if (cmd == "help" || cmd == "--help" || cmd == "-h") {
    std::cout << kUsage;
    return 0;
  }
  try {
    if (cmd == "generate-clb") return cmd_generate_clb(argc - 1, argv + 1);
    if (cmd == "simulate-measurements") return cmd_simulate_measurements(argc - 1, argv + 1);
    if (cmd == "ingest") return cmd_ingest(argc - 1, argv + 1);
    if (cmd == "train") return cmd_train(argc - 1, argv + 1);
    if (cmd == "resume") return cmd_resume(argc - 1, argv + 1);
    if (cmd == "translate") return cmd_translate(argc - 1, argv + 1);
    if (cmd == "evaluate") return cmd_evaluate(argc - 1, argv + 1);
    if (cmd == "interpret") return cmd_interpret(argc - 1, argv + 1);
    std::cerr << "unknown command: " << cmd << "\n\n" << kUsage;
    return 2;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const ParamError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const DivergenceError& e) {
    std::cerr << e.what() << "\n";
    return 4;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

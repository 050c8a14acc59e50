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

#include "somkit/train.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <charconv>
#include <chrono>
#include <cstring>
#include <limits>
#include <sstream>
#include <utility>

#include <nlohmann/json.hpp>

#include "json_util.hpp"
#include "somkit/image_io.hpp"

namespace somkit::train {

namespace fs = std::filesystem;
using nlohmann::json;

void TrainConfig::validate() const {
  generator.validate();
  discriminator.validate();
  loss.validate();
  measurement.validate();
  adam.validate();
  if (adam.lr <= 0.0) throw ParamError("learning rate must be positive");
  if (batch_size < 1) throw ParamError("batch_size must be at least 1");
  if (total_steps < 0) throw ParamError("total_steps must be non-negative");
  if (checkpoint_every < 1) throw ParamError("checkpoint_every must be at least 1");
  const int factor = 1 << generator.downsamplings;
  if (image_size < factor || image_size % factor != 0)
    throw ParamError("image_size must be a positive multiple of 2^downsamplings");
}

std::string to_json(const TrainConfig& cfg) {
  json doc;
  doc["format_version"] = 1;
  doc["generator"] = {{"channels", cfg.generator.channels},
                      {"base_width", cfg.generator.base_width},
                      {"downsamplings", cfg.generator.downsamplings},
                      {"res_blocks", cfg.generator.res_blocks},
                      {"instance_norm", cfg.generator.instance_norm},
                      {"near_identity", cfg.generator.near_identity},
                      {"near_identity_scale", cfg.generator.near_identity_scale}};
  doc["discriminator"] = {{"channels", cfg.discriminator.channels},
                          {"base_width", cfg.discriminator.base_width},
                          {"stride2_layers", cfg.discriminator.stride2_layers},
                          {"instance_norm", cfg.discriminator.instance_norm}};
  doc["loss"] = {{"family", gan::loss_family_name(cfg.loss.family)},
                 {"cycle_norm", gan::cycle_norm_name(cfg.loss.cycle_norm)},
                 {"lambda_cycle", cfg.loss.lambda_cycle}};
  doc["measurement"] = detail::measurement_to_json(cfg.measurement);
  doc["adam"] = {{"lr", cfg.adam.lr},
                 {"beta1", cfg.adam.beta1},
                 {"beta2", cfg.adam.beta2},
                 {"eps", cfg.adam.eps}};
  doc["batch_size"] = cfg.batch_size;
  doc["total_steps"] = cfg.total_steps;
  doc["checkpoint_every"] = cfg.checkpoint_every;
  doc["image_size"] = cfg.image_size;
  doc["x_manifest"] = cfg.x_manifest;
  doc["y_manifest"] = cfg.y_manifest;
  doc["seeds"] = {{"model_init", cfg.seeds.model_init},
                  {"data_shuffle", cfg.seeds.data_shuffle},
                  {"noise", cfg.seeds.noise}};
  return doc.dump(2);
}

void save_train_config(const TrainConfig& cfg, const fs::path& file) {
  std::ofstream f(file, std::ios::trunc);
  if (!f) throw DataError("cannot write train config: " + file.string());
  f << to_json(cfg) << "\n";
  if (!f) throw DataError("short train config write: " + file.string());
}

TrainConfig train_config_from_json(const std::string& text) {
  TrainConfig cfg;
  try {
    const json doc = json::parse(text);
    detail::reject_unknown_keys(
        doc,
        {"format_version", "generator", "discriminator", "loss", "measurement", "adam",
         "batch_size", "total_steps", "checkpoint_every", "image_size", "x_manifest", "y_manifest",
         "seeds"},
        "train config");
    if (doc.value("format_version", 1) != 1)
      throw ConfigError("unsupported train config format version");
    if (doc.contains("generator")) {
      const auto& g = doc["generator"];
      detail::reject_unknown_keys(g,
                                  {"channels", "base_width", "downsamplings", "res_blocks",
                                   "instance_norm", "near_identity", "near_identity_scale"},
                                  "generator");
      cfg.generator.channels = g.value("channels", cfg.generator.channels);
      cfg.generator.base_width = g.value("base_width", cfg.generator.base_width);
      cfg.generator.downsamplings = g.value("downsamplings", cfg.generator.downsamplings);
      cfg.generator.res_blocks = g.value("res_blocks", cfg.generator.res_blocks);
      cfg.generator.instance_norm = g.value("instance_norm", cfg.generator.instance_norm);
      cfg.generator.near_identity = g.value("near_identity", cfg.generator.near_identity);
      cfg.generator.near_identity_scale =
          g.value("near_identity_scale", cfg.generator.near_identity_scale);
    }
    if (doc.contains("discriminator")) {
      const auto& d = doc["discriminator"];
      detail::reject_unknown_keys(
          d, {"channels", "base_width", "stride2_layers", "instance_norm"}, "discriminator");
      cfg.discriminator.channels = d.value("channels", cfg.discriminator.channels);
      cfg.discriminator.base_width = d.value("base_width", cfg.discriminator.base_width);
      cfg.discriminator.stride2_layers =
          d.value("stride2_layers", cfg.discriminator.stride2_layers);
      cfg.discriminator.instance_norm = d.value("instance_norm", cfg.discriminator.instance_norm);
    }
    if (doc.contains("loss")) {
      const auto& l = doc["loss"];
      detail::reject_unknown_keys(l, {"family", "cycle_norm", "lambda_cycle"}, "loss");
      if (l.contains("family"))
        cfg.loss.family = gan::loss_family_from_name(l["family"].get<std::string>());
      if (l.contains("cycle_norm"))
        cfg.loss.cycle_norm = gan::cycle_norm_from_name(l["cycle_norm"].get<std::string>());
      cfg.loss.lambda_cycle = l.value("lambda_cycle", cfg.loss.lambda_cycle);
    }
    if (doc.contains("measurement")) {
      detail::reject_unknown_keys(
          doc["measurement"],
          {"system_operator", "noise_model", "noise_mean", "noise_std", "seed_policy"},
          "measurement");
      cfg.measurement = detail::measurement_from_json(doc["measurement"]);
    }
    if (doc.contains("adam")) {
      const auto& a = doc["adam"];
      detail::reject_unknown_keys(a, {"lr", "beta1", "beta2", "eps"}, "adam");
      cfg.adam.lr = a.value("lr", cfg.adam.lr);
      cfg.adam.beta1 = a.value("beta1", cfg.adam.beta1);
      cfg.adam.beta2 = a.value("beta2", cfg.adam.beta2);
      cfg.adam.eps = a.value("eps", cfg.adam.eps);
    }
    cfg.batch_size = doc.value("batch_size", cfg.batch_size);
    cfg.total_steps = doc.value("total_steps", cfg.total_steps);
    cfg.checkpoint_every = doc.value("checkpoint_every", cfg.checkpoint_every);
    cfg.image_size = doc.value("image_size", cfg.image_size);
    cfg.x_manifest = doc.value("x_manifest", cfg.x_manifest);
    cfg.y_manifest = doc.value("y_manifest", cfg.y_manifest);
    if (doc.contains("seeds")) {
      const auto& s = doc["seeds"];
      detail::reject_unknown_keys(s, {"model_init", "data_shuffle", "noise"}, "seeds");
      cfg.seeds.model_init = s.value("model_init", cfg.seeds.model_init);
      cfg.seeds.data_shuffle = s.value("data_shuffle", cfg.seeds.data_shuffle);
      cfg.seeds.noise = s.value("noise", cfg.seeds.noise);
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed train config: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

TrainConfig load_train_config(const fs::path& file) {
  std::ifstream f(file);
  if (!f) throw DataError("cannot open train config: " + file.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  return train_config_from_json(ss.str());
}

RunLog::RunLog(const fs::path& file) : file_(file) {
  if (fs::exists(file)) {
    const auto existing = read_runlog(file);
    if (!existing.empty()) last_step_ = existing.back().step;
  }
  out_.open(file, std::ios::app);
  if (!out_) throw DataError("cannot open run log: " + file.string());
}

void RunLog::append(const RunRecord& r) {
  if (r.step <= last_step_)
    throw ParamError("run log steps must increase: got " + std::to_string(r.step) + " after " +
                     std::to_string(last_step_));
  const json line = {{"step", r.step},
                     {"gen_adv_y", r.losses.gen_adv_y},
                     {"gen_adv_x", r.losses.gen_adv_x},
                     {"cycle_x", r.losses.cycle_x},
                     {"cycle_y", r.losses.cycle_y},
                     {"gen_total", r.losses.gen_total},
                     {"disc_y", r.losses.disc_y},
                     {"disc_x", r.losses.disc_x},
                     {"finite", r.losses.finite},
                     {"wall_ms", r.wall_ms}};
  out_ << line.dump() << "\n" << std::flush;
  if (!out_) throw DataError("cannot append to run log: " + file_.string());
  last_step_ = r.step;
}

std::vector<RunRecord> read_runlog(const fs::path& file) {
  std::ifstream f(file);
  if (!f) throw DataError("cannot open run log: " + file.string());
  std::vector<RunRecord> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      const json j = json::parse(line);
      RunRecord r;
      r.step = j.at("step").get<std::int64_t>();
      r.losses.gen_adv_y = j.at("gen_adv_y").get<double>();
      r.losses.gen_adv_x = j.at("gen_adv_x").get<double>();
      r.losses.cycle_x = j.at("cycle_x").get<double>();
      r.losses.cycle_y = j.at("cycle_y").get<double>();
      r.losses.gen_total = j.at("gen_total").get<double>();
      r.losses.disc_y = j.at("disc_y").get<double>();
      r.losses.disc_x = j.at("disc_x").get<double>();
      r.losses.finite = j.at("finite").get<bool>();
      r.wall_ms = j.at("wall_ms").get<double>();
      out.push_back(r);
    } catch (const json::exception& e) {
      throw DataError("malformed run log line " + std::to_string(lineno) + " in " + file.string() +
                      ": " + e.what());
    }
  }
  return out;
}

namespace {

void check_same_params(const std::vector<nn::Param<float>*>& model_params,
                       const std::vector<nn::Param<float>*>& opt_params, const char* which) {
  if (model_params != opt_params)
    throw ParamError(std::string("optimizer does not own the model's ") + which + " parameters");
}

json param_index(const std::vector<nn::Param<float>*>& params) {
  json idx = json::array();
  for (const auto* p : params)
    idx.push_back({{"name", p->name}, {"numel", p->value.numel()}});
  return idx;
}

void save_group(const fs::path& dir, const std::string& prefix, nn::Adam<float>& opt) {
  const auto& params = opt.params();
  std::size_t total = 0;
  for (const auto* p : params) total += p->value.numel();
  if (total > static_cast<std::size_t>(std::numeric_limits<int>::max()))
    throw DataError("parameter group too large for the array container");
  std::vector<float> values(total), m1(total), m2(total);
  std::size_t off = 0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const std::size_t n = params[i]->value.numel();
    std::copy_n(params[i]->value.data.data(), n, values.data() + off);
    std::copy_n(opt.moment1(i).data.data(), n, m1.data() + off);
    std::copy_n(opt.moment2(i).data.data(), n, m2.data() + off);
    off += n;
  }
  const int w = static_cast<int>(total);
  io::write_array(dir / (prefix + "_values.somi"), values.data(), 1, w);
  io::write_array(dir / (prefix + "_moment1.somi"), m1.data(), 1, w);
  io::write_array(dir / (prefix + "_moment2.somi"), m2.data(), 1, w);
}

void load_group(const fs::path& dir, const std::string& prefix, const json& index,
                nn::Adam<float>* opt) {
  const auto& params = opt->params();
  if (index.size() != params.size())
    throw DataError("checkpoint " + prefix + " group lists " + std::to_string(index.size()) +
                    " parameters, model has " + std::to_string(params.size()));
  std::size_t total = 0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (index[i].at("name").get<std::string>() != params[i]->name ||
        index[i].at("numel").get<std::size_t>() != params[i]->value.numel())
      throw DataError("checkpoint parameter " + index[i].at("name").get<std::string>() +
                      " does not match the model's " + params[i]->name);
    total += params[i]->value.numel();
  }
  auto read_flat = [&](const std::string& suffix) {
    int h = 0, w = 0;
    auto data = io::read_array(dir / (prefix + suffix), &h, &w);
    if (data.size() != total)
      throw DataError("checkpoint array " + prefix + suffix + " holds " +
                      std::to_string(data.size()) + " values, expected " + std::to_string(total));
    return data;
  };
  const auto values = read_flat("_values.somi");
  const auto m1 = read_flat("_moment1.somi");
  const auto m2 = read_flat("_moment2.somi");
  std::size_t off = 0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const std::size_t n = params[i]->value.numel();
    std::copy_n(values.data() + off, n, params[i]->value.data.data());
    std::copy_n(m1.data() + off, n, opt->moment1(i).data.data());
    std::copy_n(m2.data() + off, n, opt->moment2(i).data.data());
    off += n;
  }
}

}  // namespace

void save_checkpoint(const fs::path& dir, std::int64_t step, gan::CycleGan<float>& model,
                     nn::Adam<float>& gen_opt, nn::Adam<float>& disc_opt) {
  check_same_params(model.generator_params(), gen_opt.params(), "generator");
  check_same_params(model.discriminator_params(), disc_opt.params(), "discriminator");
  fs::create_directories(dir);
  save_group(dir, "gen", gen_opt);
  save_group(dir, "disc", disc_opt);
  json doc;
  doc["format_version"] = 1;
  doc["step"] = step;
  doc["gen_steps"] = gen_opt.steps_taken();
  doc["disc_steps"] = disc_opt.steps_taken();
  doc["gen_params"] = param_index(gen_opt.params());
  doc["disc_params"] = param_index(disc_opt.params());
  const fs::path marker = dir / "checkpoint.json";
  std::ofstream f(marker, std::ios::trunc);
  if (!f) throw DataError("cannot write checkpoint marker: " + marker.string());
  f << doc.dump(2) << "\n";
  if (!f) throw DataError("short checkpoint marker write: " + marker.string());
}

std::int64_t load_checkpoint(const fs::path& dir, gan::CycleGan<float>* model,
                             nn::Adam<float>* gen_opt, nn::Adam<float>* disc_opt) {
  check_same_params(model->generator_params(), gen_opt->params(), "generator");
  check_same_params(model->discriminator_params(), disc_opt->params(), "discriminator");
  const fs::path marker = dir / "checkpoint.json";
  std::ifstream f(marker);
  if (!f) throw DataError("cannot open checkpoint marker: " + marker.string());
  try {
    const json doc = json::parse(f);
    if (doc.at("format_version").get<int>() != 1)
      throw DataError("unsupported checkpoint format version in " + marker.string());
    load_group(dir, "gen", doc.at("gen_params"), gen_opt);
    load_group(dir, "disc", doc.at("disc_params"), disc_opt);
    gen_opt->set_steps_taken(doc.at("gen_steps").get<std::int64_t>());
    disc_opt->set_steps_taken(doc.at("disc_steps").get<std::int64_t>());
    return doc.at("step").get<std::int64_t>();
  } catch (const json::exception& e) {
    throw DataError("malformed checkpoint " + marker.string() + ": " + e.what());
  }
}

RunLock::RunLock(const fs::path& run_dir) : lock_file_(run_dir / ".lock") {
  const int fd = ::open(lock_file_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
  if (fd < 0) {
    if (errno == EEXIST)
      throw DataError("run directory is locked by another trainer (remove " + lock_file_.string() +
                      " if stale)");
    throw DataError("cannot create lock file " + lock_file_.string() + ": " +
                    std::strerror(errno));
  }
  const std::string pid = std::to_string(::getpid()) + "\n";
  const ssize_t written = ::write(fd, pid.data(), pid.size());
  ::close(fd);
  if (written != static_cast<ssize_t>(pid.size()))
    throw DataError("cannot write lock file " + lock_file_.string());
  owned_ = true;
}

RunLock::~RunLock() {
  if (owned_) {
    std::error_code ec;
    fs::remove(lock_file_, ec);
  }
}

RunLock::RunLock(RunLock&& other) noexcept
    : lock_file_(std::move(other.lock_file_)), owned_(other.owned_) {
  other.owned_ = false;
}

namespace {

TrainConfig validated(TrainConfig cfg) {
  cfg.validate();
  return cfg;
}

RunLock prepare_and_lock(const fs::path& run_dir, bool resuming) {
  if (resuming) {
    if (!fs::is_directory(run_dir)) throw DataError("no run directory at " + run_dir.string());
  } else {
    fs::create_directories(run_dir);
    const fs::path cps = run_dir / "checkpoints";
    if (fs::exists(run_dir / "config.json") || (fs::is_directory(cps) && !fs::is_empty(cps)))
      throw DataError("run directory " + run_dir.string() +
                      " already holds a run; resume it or pick a fresh directory");
  }
  return RunLock(run_dir);
}

std::int64_t parse_checkpoint_step(const std::string& stem) {
  if (stem.rfind("step_", 0) != 0) return -1;
  std::int64_t v = 0;
  const char* first = stem.data() + 5;
  const char* last = stem.data() + stem.size();
  const auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last) return -1;
  return v;
}

}  // namespace

Trainer::Trainer(const TrainConfig& cfg, const fs::path& run_dir) : Trainer(cfg, run_dir, false) {}

Trainer::Trainer(TrainConfig cfg, fs::path run_dir, bool resuming)
    : cfg_(validated(std::move(cfg))),
      run_dir_(std::move(run_dir)),
      lock_(prepare_and_lock(run_dir_, resuming)),
      gan_(cfg_.generator, cfg_.discriminator, cfg_.loss, cfg_.measurement),
      gen_opt_(gan_.generator_params(), cfg_.adam),
      disc_opt_(gan_.discriminator_params(), cfg_.adam) {
  if (!resuming) {
    gan_.init(rng::Stream(cfg_.seeds.model_init));
    save_train_config(cfg_, run_dir_ / "config.json");
    fs::create_directories(run_dir_ / "checkpoints");
    save_now();
  } else {
    const fs::path cps = run_dir_ / "checkpoints";
    std::int64_t latest = -1;
    if (fs::is_directory(cps)) {
      for (const auto& e : fs::directory_iterator(cps)) {
        if (!e.is_directory()) continue;
        latest = std::max(latest, parse_checkpoint_step(e.path().filename().string()));
      }
    }
    if (latest < 0) throw DataError("no checkpoints to resume in " + cps.string());
    step_ = load_checkpoint(checkpoint_dir(latest), &gan_, &gen_opt_, &disc_opt_);
    if (step_ != latest)
      throw DataError("checkpoint " + checkpoint_dir(latest).string() +
                      " records step " + std::to_string(step_));
    last_saved_step_ = step_;
  }
}

Trainer Trainer::resume(const fs::path& run_dir) {
  TrainConfig cfg = load_train_config(run_dir / "config.json");
  return Trainer(std::move(cfg), run_dir, true);
}

fs::path Trainer::checkpoint_dir(std::int64_t step) const {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "step_%08lld", static_cast<long long>(step));
  return run_dir_ / "checkpoints" / buf;
}

void Trainer::save_now() {
  if (last_saved_step_ == step_) return;
  save_checkpoint(checkpoint_dir(step_), step_, gan_, gen_opt_, disc_opt_);
  last_saved_step_ = step_;
}

void Trainer::run(std::int64_t stop_after, const StepCallback& on_step) {
  std::int64_t target = cfg_.total_steps;
  if (stop_after >= 0) target = std::min(target, stop_after);
  if (step_ >= target) return;
  if (cfg_.x_manifest.empty() || cfg_.y_manifest.empty())
    throw ConfigError("train config needs x_manifest and y_manifest paths");

  const data::DatasetManifest mx = data::load_manifest(cfg_.x_manifest);
  const data::DatasetManifest my = data::load_manifest(cfg_.y_manifest);
  if (mx.domain != Domain::X)
    throw DataError("x corpus must carry the mathematical domain tag, got " +
                    std::string(domain_name(mx.domain)));
  if (my.domain != Domain::Y)
    throw DataError("y corpus must carry the measurement domain tag, got " +
                    std::string(domain_name(my.domain)));
  for (const auto* m : {&mx, &my})
    if (m->height != cfg_.image_size || m->width != cfg_.image_size)
      throw DataError("corpus " + m->name + " is " + std::to_string(m->height) + "x" +
                      std::to_string(m->width) + ", config expects " +
                      std::to_string(cfg_.image_size));

  const data::CorpusCache cx(mx);
  const data::CorpusCache cy(my);
  const data::BatchStream bx(cx.manifest(), cfg_.batch_size,
                             rng::Stream(cfg_.seeds.data_shuffle).fork("x").seed());
  const data::BatchStream by(cy.manifest(), cfg_.batch_size,
                             rng::Stream(cfg_.seeds.data_shuffle).fork("y").seed());

  RunLog log(run_dir_ / "runlog.jsonl");
  while (step_ < target) {
    const std::int64_t s = step_;
    std::vector<const Image*> xp, yp;
    for (std::size_t i : bx.step_indices(s)) xp.push_back(&cx.image(i));
    for (std::size_t i : by.step_indices(s)) yp.push_back(&cy.image(i));
    const auto x = nn::batch_from_images<float>(xp);
    const auto y = nn::batch_from_images<float>(yp);

    const auto t0 = std::chrono::steady_clock::now();
    const gan::StepLosses L =
        gan_.train_step(x, y, gen_opt_, disc_opt_, rng::Stream(cfg_.seeds.noise).fork(s));
    const auto t1 = std::chrono::steady_clock::now();
    ++step_;
    const RunRecord rec{step_, L, std::chrono::duration<double, std::milli>(t1 - t0).count()};
    log.append(rec);
    if (on_step) on_step(rec);
    if (step_ % cfg_.checkpoint_every == 0) save_now();
  }
  save_now();
}

}  // namespace somkit::train

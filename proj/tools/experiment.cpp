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

#include "experiment.hpp"

#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <vector>

#include <nlohmann/json.hpp>

namespace somkit::cli {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

void reject_unknown_keys(const json& obj, std::initializer_list<const char*> allowed,
                         const std::string& scope) {
  for (const auto& [key, value] : obj.items()) {
    bool ok = false;
    for (const char* a : allowed)
      if (key == a) ok = true;
    if (!ok) throw ConfigError("unknown key \"" + key + "\" in " + scope);
  }
}

CorpusSpec corpus_from_json(const json& j, const std::string& scope) {
  reject_unknown_keys(j, {"preset", "params", "count", "seed"}, scope);
  CorpusSpec s;
  clb::ClbParams base;
  if (j.contains("preset")) base = clb::preset(j["preset"].get<std::string>());
  if (j.contains("params"))
    s.params = merge_clb_params(base, j["params"].dump(), scope + ".params");
  else
    s.params = base;
  s.count = j.at("count").get<int>();
  s.seed = j.value("seed", s.seed);
  return s;
}

json corpus_to_json(const CorpusSpec& s) {
  return json{{"params", json::parse(clb::to_json(s.params))},
              {"count", s.count},
              {"seed", s.seed}};
}

EvalSpec eval_from_json(const json& j) {
  reject_unknown_keys(j,
                      {"embedder", "ssim_pairs", "ssim_seed", "signal", "patch", "ho_train",
                       "ho_test", "ho_regularization", "ho_seed"},
                      "eval");
  EvalSpec e;
  if (j.contains("embedder")) e.embedder = embedder_from_string(j["embedder"].get<std::string>());
  e.ssim_pairs = j.value("ssim_pairs", e.ssim_pairs);
  e.ssim_seed = j.value("ssim_seed", e.ssim_seed);
  if (j.contains("signal")) {
    reject_unknown_keys(j["signal"], {"amplitude", "spatial_std"}, "eval.signal");
    e.signal.amplitude = j["signal"].value("amplitude", e.signal.amplitude);
    e.signal.spatial_std = j["signal"].value("spatial_std", e.signal.spatial_std);
  }
  if (j.contains("patch")) {
    e.signal.patch_h = j["patch"].get<int>();
    e.signal.patch_w = e.signal.patch_h;
  }
  e.ho_train = j.value("ho_train", e.ho_train);
  e.ho_test = j.value("ho_test", e.ho_test);
  e.ho_regularization = j.value("ho_regularization", e.ho_regularization);
  e.ho_seed = j.value("ho_seed", e.ho_seed);
  return e;
}

json eval_to_json(const EvalSpec& e) {
  return json{{"embedder", to_string(e.embedder)},
              {"ssim_pairs", e.ssim_pairs},
              {"ssim_seed", e.ssim_seed},
              {"signal", {{"amplitude", e.signal.amplitude}, {"spatial_std", e.signal.spatial_std}}},
              {"patch", e.signal.patch_h},
              {"ho_train", e.ho_train},
              {"ho_test", e.ho_test},
              {"ho_regularization", e.ho_regularization},
              {"ho_seed", e.ho_seed}};
}

std::vector<std::string> split_colon(const std::string& s) {
  std::vector<std::string> parts;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, ':')) parts.push_back(cur);
  return parts;
}

}  // namespace

EmbedderSpec embedder_from_string(const std::string& text) {
  const std::vector<std::string> parts = split_colon(text);
  EmbedderSpec e;
  try {
    if (!parts.empty() && parts[0] == "downsample" && parts.size() <= 2) {
      e.kind = "downsample";
      if (parts.size() == 2) e.side = std::stoi(parts[1]);
      return e;
    }
    if (!parts.empty() && parts[0] == "rp" && parts.size() >= 2 && parts.size() <= 3) {
      e.kind = "random_projection";
      e.dim = std::stoi(parts[1]);
      if (parts.size() == 3) e.seed = std::stoull(parts[2]);
      return e;
    }
    if (!parts.empty() && parts[0] == "canonical" && parts.size() >= 2) {
      e.kind = "canonical";
      e.asset = text.substr(text.find(':') + 1);
      return e;
    }
  } catch (const std::exception&) {
  }
  throw ConfigError("bad embedder \"" + text +
                    "\"; use downsample:SIDE, rp:DIM[:SEED], or canonical:PATH");
}

std::string to_string(const EmbedderSpec& e) {
  if (e.kind == "downsample") return "downsample:" + std::to_string(e.side);
  if (e.kind == "random_projection")
    return "rp:" + std::to_string(e.dim) + ":" + std::to_string(e.seed);
  return "canonical:" + e.asset.string();
}

eval::FeatureEmbedder make_embedder(const EmbedderSpec& e) {
  if (e.kind == "downsample") return eval::FeatureEmbedder::downsample_pixel(e.side);
  if (e.kind == "random_projection") return eval::FeatureEmbedder::random_projection(e.dim, e.seed);
  if (e.kind == "canonical") return eval::FeatureEmbedder::canonical(e.asset);
  throw ConfigError("unknown embedder kind \"" + e.kind + "\"");
}

void EvalSpec::validate() const {
  if (ssim_pairs < 1) throw ConfigError("eval.ssim_pairs must be at least 1");
  if (ho_train < 2 || ho_test < 2)
    throw ConfigError("eval.ho_train and eval.ho_test must be at least 2");
  if (!(ho_regularization >= 0.0))
    throw ConfigError("eval.ho_regularization must be non-negative");
  signal.validate();
}

void ExperimentConfig::validate() const {
  if (output_dir.empty()) throw ConfigError("output_dir must be set");
  if (clb_x.count < 1) throw ConfigError("clb_x.count must be at least 1");
  if (clb_x.params.height != clb_x.params.width)
    throw ConfigError("clb_x images must be square");
  if (clb_y.has_value() == ingest_y.has_value())
    throw ConfigError("configure exactly one of clb_y and ingest_y");
  if (clb_y) {
    if (clb_y->count < 1) throw ConfigError("clb_y.count must be at least 1");
    if (clb_y->params.height != train.image_size || clb_y->params.width != train.image_size)
      throw ConfigError("clb_y image size must match clb_x");
  }
  if (ingest_y && ingest_y->dir.empty()) throw ConfigError("ingest_y.dir must be set");
  train.validate();
  eval.validate();
}

clb::ClbParams merge_clb_params(const clb::ClbParams& base, const std::string& overrides_json,
                                const std::string& scope) {
  json merged;
  try {
    merged = json::parse(clb::to_json(base));
    const json over = json::parse(overrides_json);
    for (const auto& [key, value] : over.items()) {
      if (!merged.contains(key)) throw ConfigError("unknown key \"" + key + "\" in " + scope);
      merged[key] = value;
    }
  } catch (const json::exception& e) {
    throw ConfigError("malformed CLB parameters in " + scope + ": " + e.what());
  }
  try {
    return clb::params_from_json(merged.dump());
  } catch (const DataError& e) {
    throw ConfigError(std::string(e.what()) + " in " + scope);
  }
}

ExperimentConfig experiment_from_json(const std::string& text) {
  ExperimentConfig c;
  try {
    const json doc = json::parse(text);
    reject_unknown_keys(doc,
                        {"format_version", "output_dir", "clb_x", "clb_y", "ingest_y",
                         "measurement", "model", "train", "eval", "seeds"},
                        "experiment config");
    if (doc.value("format_version", 1) != 1)
      throw ConfigError("unsupported experiment config format version");
    c.output_dir = doc.at("output_dir").get<std::string>();
    c.clb_x = corpus_from_json(doc.at("clb_x"), "clb_x");
    if (doc.contains("clb_y")) c.clb_y = corpus_from_json(doc["clb_y"], "clb_y");
    if (doc.contains("ingest_y")) {
      const auto& g = doc["ingest_y"];
      reject_unknown_keys(g, {"dir", "lo_percentile", "hi_percentile"}, "ingest_y");
      IngestSpec spec;
      spec.dir = g.at("dir").get<std::string>();
      spec.policy.lo_percentile = g.value("lo_percentile", spec.policy.lo_percentile);
      spec.policy.hi_percentile = g.value("hi_percentile", spec.policy.hi_percentile);
      c.ingest_y = std::move(spec);
    }

    json tdoc;
    tdoc["format_version"] = 1;
    if (doc.contains("model")) {
      const auto& m = doc["model"];
      reject_unknown_keys(m, {"generator", "discriminator", "loss"}, "model");
      for (const char* k : {"generator", "discriminator", "loss"})
        if (m.contains(k)) tdoc[k] = m[k];
    }
    if (doc.contains("measurement")) tdoc["measurement"] = doc["measurement"];
    if (doc.contains("seeds")) tdoc["seeds"] = doc["seeds"];
    if (doc.contains("train")) {
      const auto& t = doc["train"];
      reject_unknown_keys(t, {"ambient", "adam", "batch_size", "total_steps", "checkpoint_every"},
                          "train");
      c.ambient = t.value("ambient", true);
      if (t.contains("adam")) tdoc["adam"] = t["adam"];
      for (const char* k : {"batch_size", "total_steps", "checkpoint_every"})
        if (t.contains(k)) tdoc[k] = t[k];
    }
    tdoc["image_size"] = c.clb_x.params.height;
    c.train = train::train_config_from_json(tdoc.dump());
    if (doc.contains("eval")) c.eval = eval_from_json(doc["eval"]);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed experiment config: ") + e.what());
  }
  c.validate();
  return c;
}

ExperimentConfig load_experiment_config(const fs::path& file) {
  std::ifstream f(file);
  if (!f) throw DataError("cannot open experiment config: " + file.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  return experiment_from_json(ss.str());
}

std::string to_json(const ExperimentConfig& c) {
  const json t = json::parse(train::to_json(c.train));
  json doc;
  doc["format_version"] = 1;
  doc["output_dir"] = c.output_dir.string();
  doc["clb_x"] = corpus_to_json(c.clb_x);
  if (c.clb_y) doc["clb_y"] = corpus_to_json(*c.clb_y);
  if (c.ingest_y)
    doc["ingest_y"] = {{"dir", c.ingest_y->dir.string()},
                       {"lo_percentile", c.ingest_y->policy.lo_percentile},
                       {"hi_percentile", c.ingest_y->policy.hi_percentile}};
  doc["measurement"] = t["measurement"];
  doc["model"] = {{"generator", t["generator"]},
                  {"discriminator", t["discriminator"]},
                  {"loss", t["loss"]}};
  doc["train"] = {{"ambient", c.ambient},
                  {"adam", t["adam"]},
                  {"batch_size", t["batch_size"]},
                  {"total_steps", t["total_steps"]},
                  {"checkpoint_every", t["checkpoint_every"]}};
  doc["seeds"] = t["seeds"];
  doc["eval"] = eval_to_json(c.eval);
  return doc.dump(2);
}

void save_experiment_config(const ExperimentConfig& c, const fs::path& file) {
  std::ofstream f(file, std::ios::trunc);
  if (!f) throw DataError("cannot write experiment config: " + file.string());
  f << to_json(c) << "\n";
  if (!f) throw DataError("short experiment config write: " + file.string());
}

namespace {

void ensure_corpus(const fs::path& dir, const std::string& label, bool force, int want_count,
                   int want_size, Domain want_domain,
                   const std::function<data::DatasetManifest()>& maker) {
  const fs::path manifest = dir / "manifest.json";
  if (fs::exists(manifest) && !force) {
    const data::DatasetManifest m = data::load_manifest(manifest);
    const bool count_ok = want_count < 0 || static_cast<int>(m.count()) == want_count;
    if (!count_ok || m.height != want_size || m.width != want_size || m.domain != want_domain)
      throw DataError("existing " + label + " corpus at " + dir.string() +
                      " does not match the experiment config; pass --force to regenerate it");
    std::cout << "reusing " << label << " corpus (" << m.count() << " images) at " << dir.string()
              << "\n";
    return;
  }
  fs::remove_all(dir);
  const data::DatasetManifest m = maker();
  std::cout << "wrote " << label << " corpus (" << m.count() << " images) to " << dir.string()
            << "\n";
}

}  // namespace

void prepare_corpora(ExperimentConfig& cfg, bool force) {
  const fs::path data_dir = cfg.output_dir / "data";
  const fs::path xdir = data_dir / "x";
  const fs::path ydir = data_dir / "y";
  fs::create_directories(data_dir);

  ensure_corpus(xdir, "x", force, cfg.clb_x.count, cfg.train.image_size, Domain::X, [&] {
    return data::synthesize_corpus(cfg.clb_x.params, cfg.clb_x.count, cfg.clb_x.seed, std::nullopt,
                                   xdir);
  });
  if (cfg.clb_y) {
    ensure_corpus(ydir, "y", force, cfg.clb_y->count, cfg.train.image_size, Domain::Y, [&] {
      return data::synthesize_corpus(cfg.clb_y->params, cfg.clb_y->count, cfg.clb_y->seed,
                                     cfg.train.measurement, ydir);
    });
  } else {
    ensure_corpus(ydir, "y", force, -1, cfg.train.image_size, Domain::Y, [&] {
      return data::ingest_directory(cfg.ingest_y->dir, cfg.train.image_size, cfg.train.image_size,
                                    cfg.ingest_y->policy, ydir);
    });
  }

  cfg.train.x_manifest = (xdir / "manifest.json").string();
  cfg.train.y_manifest = (ydir / "manifest.json").string();
}

train::TrainConfig trainer_config(const ExperimentConfig& cfg) {
  train::TrainConfig tc = cfg.train;
  if (!cfg.ambient) {
    tc.measurement.system_operator = meas::SystemOp::Identity;
    tc.measurement.noise_model = meas::NoiseModel::None;
  }
  return tc;
}

}  // namespace somkit::cli

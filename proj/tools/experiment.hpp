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

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "somkit/clb.hpp"
#include "somkit/dataio.hpp"
#include "somkit/eval.hpp"
#include "somkit/train.hpp"

namespace somkit::cli {

/// A synthetic corpus: CLB parameters plus how many realizations to draw.
/// Realization i is seeded with seed + i.
struct CorpusSpec {
  clb::ClbParams params;
  int count = 0;
  std::uint64_t seed = 1;
};

/// A corpus imported from existing image files instead of synthesized.
struct IngestSpec {
  std::filesystem::path dir;
  data::IngestPolicy policy;
};

/// Feature embedder selection, also parsable from the compact string forms
/// "downsample:8", "rp:DIM[:SEED]", and "canonical:PATH".
struct EmbedderSpec {
  std::string kind = "downsample";
  int side = 8;
  int dim = 64;
  std::uint64_t seed = 7;
  std::filesystem::path asset;
};

EmbedderSpec embedder_from_string(const std::string& text);
std::string to_string(const EmbedderSpec& e);
eval::FeatureEmbedder make_embedder(const EmbedderSpec& e);

/// Defaults for the evaluate pipeline; command-line flags override fields.
struct EvalSpec {
  EmbedderSpec embedder;
  int ssim_pairs = 2000;
  std::uint64_t ssim_seed = 11;
  eval::SignalParams signal;
  int ho_train = 4500;
  int ho_test = 1000;
  double ho_regularization = 1e-3;
  std::uint64_t ho_seed = 13;

  void validate() const;
};

/// One experiment end to end: where it lives, the corpora it trains on, the
/// model/optimization settings, and the evaluation defaults. `train` holds
/// the physical measurement model; `ambient` decides whether the training
/// loop applies it to generator outputs (true) or trains a plain
/// translation model directly against the measured corpus (false).
struct ExperimentConfig {
  std::filesystem::path output_dir;
  CorpusSpec clb_x;
  std::optional<CorpusSpec> clb_y;
  std::optional<IngestSpec> ingest_y;
  bool ambient = true;
  train::TrainConfig train;
  EvalSpec eval;

  void validate() const;
};

ExperimentConfig experiment_from_json(const std::string& text);
ExperimentConfig load_experiment_config(const std::filesystem::path& file);
std::string to_json(const ExperimentConfig& c);
void save_experiment_config(const ExperimentConfig& c, const std::filesystem::path& file);

/// Synthesizes (or ingests) the corpora under output_dir/data and fills in
/// the manifest paths. Existing corpora are reused when their manifest
/// matches the requested count and size; a mismatch is an error unless
/// force is set, which regenerates them.
void prepare_corpora(ExperimentConfig& cfg, bool force);

/// The trainer view of the experiment: with ambient off the in-loop
/// measurement collapses to the identity map while the measured corpus
/// stays as configured.
train::TrainConfig trainer_config(const ExperimentConfig& cfg);

/// Merges partial overrides over base CLB parameters, rejecting keys that
/// name no parameter.
clb::ClbParams merge_clb_params(const clb::ClbParams& base, const std::string& overrides_json,
                                const std::string& scope);

}  // namespace somkit::cli

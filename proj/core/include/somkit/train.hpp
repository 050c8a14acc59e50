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
#include <fstream>
#include <functional>
#include <string>
#include <vector>

#include "somkit/dataio.hpp"
#include "somkit/gan.hpp"
#include "somkit/nn/adam.hpp"
#include "somkit/nn/models.hpp"

namespace somkit::train {

/// Independent named seed roots. Each stage derives its streams from its own
/// root, so changing one seed never perturbs what the others produce.
struct TrainSeeds {
  std::uint64_t model_init = 1;
  std::uint64_t data_shuffle = 2;
  std::uint64_t noise = 3;
};

/// Complete training configuration, archived verbatim into the run
/// directory. The JSON form is strict: unknown keys are rejected so a typo
/// cannot silently fall back to a default.
struct TrainConfig {
  nn::GeneratorSpec generator;
  nn::DiscriminatorSpec discriminator;
  gan::GanConfig loss;
  meas::MeasurementConfig measurement;
  nn::AdamConfig adam;
  int batch_size = 10;
  std::int64_t total_steps = 20000;
  std::int64_t checkpoint_every = 1000;
  int image_size = 256;
  std::string x_manifest;
  std::string y_manifest;
  TrainSeeds seeds;

  void validate() const;
};

void save_train_config(const TrainConfig& cfg, const std::filesystem::path& file);
TrainConfig load_train_config(const std::filesystem::path& file);
std::string to_json(const TrainConfig& cfg);
TrainConfig train_config_from_json(const std::string& text);

/// One record per attempted training step; step counts completed attempts
/// and starts at 1.
struct RunRecord {
  std::int64_t step = 0;
  gan::StepLosses losses;
  double wall_ms = 0.0;
};

using StepCallback = std::function<void(const RunRecord&)>;

/// Append-only JSONL loss log with a strictly increasing step index,
/// flushed per record.
class RunLog {
 public:
  explicit RunLog(const std::filesystem::path& file);
  void append(const RunRecord& r);

 private:
  std::ofstream out_;
  std::filesystem::path file_;
  std::int64_t last_step_ = 0;
};

std::vector<RunRecord> read_runlog(const std::filesystem::path& file);

/// Writes parameters, optimizer moments, and the step counter into dir.
/// The values and moments go into flat float arrays; checkpoint.json, the
/// validity marker, is written last and indexes every tensor by name.
void save_checkpoint(const std::filesystem::path& dir, std::int64_t step,
                     gan::CycleGan<float>& model, nn::Adam<float>& gen_opt,
                     nn::Adam<float>& disc_opt);

/// Restores a checkpoint into a model/optimizer trio built from the same
/// config, returning the step counter. Throws DataError when a file is
/// missing, corrupt, version-incompatible, or indexes parameters that do
/// not match the model.
std::int64_t load_checkpoint(const std::filesystem::path& dir, gan::CycleGan<float>* model,
                             nn::Adam<float>* gen_opt, nn::Adam<float>* disc_opt);

/// Exclusive ownership of a run directory while a trainer is alive,
/// enforced through an exclusively created lock file.
class RunLock {
 public:
  explicit RunLock(const std::filesystem::path& run_dir);
  ~RunLock();
  RunLock(RunLock&& other) noexcept;
  RunLock& operator=(RunLock&&) = delete;
  RunLock(const RunLock&) = delete;
  RunLock& operator=(const RunLock&) = delete;

 private:
  std::filesystem::path lock_file_;
  bool owned_ = false;
};

/// Orchestrates a training run: directory layout {config.json, checkpoints/,
/// runlog.jsonl}, deterministic seeding, checkpoint cadence, and loss
/// logging. Identical config, manifests, and seeds give an identical run.
class Trainer {
 public:
  /// Starts a fresh run: archives the config, seeds the model, and writes
  /// the step-0 checkpoint. Rejects a directory that already holds a run.
  Trainer(const TrainConfig& cfg, const std::filesystem::path& run_dir);

  /// Reopens an existing run at its latest checkpoint.
  static Trainer resume(const std::filesystem::path& run_dir);

  /// Advances training up to stop_after completed steps (capped by the
  /// configured budget; pass -1 for the full budget), checkpointing on
  /// cadence and at the stopping point. Rethrows the divergence error after
  /// five consecutive non-finite steps. on_step, when set, is invoked after
  /// every completed step with the record just logged.
  void run(std::int64_t stop_after = -1, const StepCallback& on_step = {});

  std::int64_t step() const { return step_; }
  gan::CycleGan<float>& model() { return gan_; }
  nn::Adam<float>& generator_opt() { return gen_opt_; }
  nn::Adam<float>& discriminator_opt() { return disc_opt_; }
  const TrainConfig& config() const { return cfg_; }
  const std::filesystem::path& run_dir() const { return run_dir_; }

 private:
  Trainer(TrainConfig cfg, std::filesystem::path run_dir, bool resuming);

  std::filesystem::path checkpoint_dir(std::int64_t step) const;
  void save_now();

  TrainConfig cfg_;
  std::filesystem::path run_dir_;
  RunLock lock_;
  gan::CycleGan<float> gan_;
  nn::Adam<float> gen_opt_;
  nn::Adam<float> disc_opt_;
  std::int64_t step_ = 0;
  std::int64_t last_saved_step_ = -1;
};

}  // namespace somkit::train

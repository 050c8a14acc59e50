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
#include <string>

#include "somkit/image.hpp"
#include "somkit/rng.hpp"

namespace somkit::meas {

enum class SystemOp { Identity };
enum class NoiseModel { GaussianAdditive, None };
enum class SeedPolicy { FreshPerCall, Fixed };

/// The measurement operator: a linear system response followed by additive
/// per-pixel noise. The identity system response keeps the operator
/// differentiable with gradient exactly 1 per pixel, which the training graph
/// relies on when backpropagating through simulated measurements.
struct MeasurementConfig {
  SystemOp system_operator = SystemOp::Identity;
  NoiseModel noise_model = NoiseModel::GaussianAdditive;
  double noise_mean = 0.0;
  double noise_std = 0.04;
  SeedPolicy seed_policy = SeedPolicy::FreshPerCall;

  void validate() const;
  bool adds_noise() const { return noise_model != NoiseModel::None && noise_std != 0.0; }
};

/// out = SystemOp(img) + n with n i.i.d. per pixel from the configured noise
/// law, drawn from Stream(seed). With noise_model none the output equals the
/// system response exactly (no RNG is consumed).
Image apply_measurement(const Image& img, const MeasurementConfig& cfg, std::uint64_t seed);

/// In-place noise add over a raw buffer; shared by the image path above and
/// the in-graph tensor path used during training.
void add_noise(float* data, std::size_t n, const MeasurementConfig& cfg, rng::Stream& stream);
void add_noise(double* data, std::size_t n, const MeasurementConfig& cfg, rng::Stream& stream);

const char* system_op_name(SystemOp s);
const char* noise_model_name(NoiseModel m);
const char* seed_policy_name(SeedPolicy p);
SystemOp system_op_from_name(const std::string& s);
NoiseModel noise_model_from_name(const std::string& s);
SeedPolicy seed_policy_from_name(const std::string& s);

}  // namespace somkit::meas

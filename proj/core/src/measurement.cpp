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

#include "somkit/measurement.hpp"

namespace somkit::meas {

void MeasurementConfig::validate() const {
  if (noise_std < 0.0) throw ParamError("measurement: noise_std must be >= 0");
  if (!std::isfinite(noise_mean) || !std::isfinite(noise_std))
    throw ParamError("measurement: noise parameters must be finite");
}

template <typename T>
static void add_noise_impl(T* data, std::size_t n, const MeasurementConfig& cfg,
                           rng::Stream& stream) {
  if (!cfg.adds_noise()) {
    if (cfg.noise_model != NoiseModel::None && cfg.noise_mean != 0.0)
      for (std::size_t i = 0; i < n; ++i) data[i] += static_cast<T>(cfg.noise_mean);
    return;
  }
  for (std::size_t i = 0; i < n; ++i)
    data[i] += static_cast<T>(cfg.noise_mean + cfg.noise_std * stream.next_gaussian());
}

void add_noise(float* data, std::size_t n, const MeasurementConfig& cfg, rng::Stream& stream) {
  add_noise_impl(data, n, cfg, stream);
}
void add_noise(double* data, std::size_t n, const MeasurementConfig& cfg, rng::Stream& stream) {
  add_noise_impl(data, n, cfg, stream);
}

Image apply_measurement(const Image& img, const MeasurementConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  if (!img.finite()) throw ParamError("apply_measurement: input has non-finite pixels");
  Image out = img;  // identity system operator
  rng::Stream stream(seed);
  add_noise(out.px.data(), out.px.size(), cfg, stream);
  out.tag = Domain::Y;
  out.provenance = Provenance::Simulated;
  return out;
}

const char* system_op_name(SystemOp) { return "identity"; }
const char* noise_model_name(NoiseModel m) {
  return m == NoiseModel::GaussianAdditive ? "gaussian_additive" : "none";
}
const char* seed_policy_name(SeedPolicy p) {
  return p == SeedPolicy::FreshPerCall ? "fresh_per_call" : "fixed";
}

SystemOp system_op_from_name(const std::string& s) {
  if (s == "identity") return SystemOp::Identity;
  throw ConfigError("unknown system_operator: " + s);
}
NoiseModel noise_model_from_name(const std::string& s) {
  if (s == "gaussian_additive") return NoiseModel::GaussianAdditive;
  if (s == "none") return NoiseModel::None;
  throw ConfigError("unknown noise_model: " + s);
}
SeedPolicy seed_policy_from_name(const std::string& s) {
  if (s == "fresh_per_call") return SeedPolicy::FreshPerCall;
  if (s == "fixed") return SeedPolicy::Fixed;
  throw ConfigError("unknown seed_policy: " + s);
}

}  // namespace somkit::meas

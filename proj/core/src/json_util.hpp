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

#include <string>

#include <nlohmann/json.hpp>

#include "somkit/common.hpp"
#include "somkit/measurement.hpp"

namespace somkit::detail {

inline nlohmann::json measurement_to_json(const meas::MeasurementConfig& mc) {
  return {{"system_operator", meas::system_op_name(mc.system_operator)},
          {"noise_model", meas::noise_model_name(mc.noise_model)},
          {"noise_mean", mc.noise_mean},
          {"noise_std", mc.noise_std},
          {"seed_policy", meas::seed_policy_name(mc.seed_policy)}};
}

inline meas::MeasurementConfig measurement_from_json(const nlohmann::json& jm) {
  meas::MeasurementConfig mc;
  if (jm.contains("system_operator"))
    mc.system_operator = meas::system_op_from_name(jm["system_operator"].get<std::string>());
  if (jm.contains("noise_model"))
    mc.noise_model = meas::noise_model_from_name(jm["noise_model"].get<std::string>());
  mc.noise_mean = jm.value("noise_mean", mc.noise_mean);
  mc.noise_std = jm.value("noise_std", mc.noise_std);
  if (jm.contains("seed_policy"))
    mc.seed_policy = meas::seed_policy_from_name(jm["seed_policy"].get<std::string>());
  return mc;
}

/// Rejects keys outside the allowed set, naming the offender and its scope.
inline void reject_unknown_keys(const nlohmann::json& obj, std::initializer_list<const char*> allowed,
                                const std::string& scope) {
  for (const auto& [key, value] : obj.items()) {
    bool ok = false;
    for (const char* a : allowed)
      if (key == a) ok = true;
    if (!ok) throw ConfigError("unknown key \"" + key + "\" in " + scope);
  }
}

}  // namespace somkit::detail

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

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "somkit/common.hpp"

namespace somkit {

/// Which distribution an image belongs to in the translation setup.
///   X       - mathematical object model domain (clean)
///   YClean  - realistic object domain before measurement (generator output)
///   Y       - measurement domain (after the measurement operator)
enum class Domain { X, YClean, Y };

enum class Provenance { RealMeasurement, Simulated };

const char* domain_name(Domain d);
Domain domain_from_name(const std::string& name);

/// Affine map y = scale * x + offset that was applied to raw pixel values.
struct NormMap {
  float scale = 1.0f;
  float offset = 0.0f;

  float apply(float x) const { return scale * x + offset; }
};

/// A 2-D scalar field, row-major float32.
struct Image {
  int h = 0;
  int w = 0;
  std::vector<float> px;
  Domain tag = Domain::X;
  NormMap norm;
  Provenance provenance = Provenance::Simulated;

  Image() = default;
  Image(int h_, int w_, float fill = 0.0f)
      : h(h_), w(w_), px(static_cast<std::size_t>(h_) * w_, fill) {}

  float& at(int y, int x) { return px[static_cast<std::size_t>(y) * w + x]; }
  float at(int y, int x) const { return px[static_cast<std::size_t>(y) * w + x]; }
  std::size_t size() const { return px.size(); }

  bool finite() const {
    for (float v : px)
      if (!std::isfinite(v)) return false;
    return true;
  }
};

/// Normalize into [-1, 1] using the global [lo, hi] range, clamped.
/// A degenerate range maps everything to 0.
NormMap norm_map_from_range(float lo, float hi);
void apply_norm(Image& img, const NormMap& m);

}  // namespace somkit

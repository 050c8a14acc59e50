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

#include "somkit/image.hpp"

#include <algorithm>

namespace somkit {

const char* domain_name(Domain d) {
  switch (d) {
    case Domain::X:
      return "X";
    case Domain::YClean:
      return "Y_clean";
    case Domain::Y:
      return "Y";
  }
  return "?";
}

Domain domain_from_name(const std::string& name) {
  if (name == "X") return Domain::X;
  if (name == "Y_clean") return Domain::YClean;
  if (name == "Y") return Domain::Y;
  throw ConfigError("unknown domain tag: " + name);
}

NormMap norm_map_from_range(float lo, float hi) {
  NormMap m;
  if (!(hi - lo > 1e-12f)) {
    m.scale = 1.0f;
    m.offset = -lo;  // constant input maps to 0
    return m;
  }
  m.scale = 2.0f / (hi - lo);
  m.offset = -1.0f - lo * m.scale;
  return m;
}

void apply_norm(Image& img, const NormMap& m) {
  for (float& v : img.px) v = std::clamp(m.apply(v), -1.0f, 1.0f);
  img.norm = m;
}

}  // namespace somkit

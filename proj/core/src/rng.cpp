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

#include "somkit/rng.hpp"

#include <cmath>

namespace somkit::rng {

double Stream::next_gaussian() {
  const double u1 = next_uniform_pos();
  const double u2 = next_uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

long Stream::next_poisson(double mean) {
  // Poisson(a + b) = Poisson(a) + Poisson(b) for independent draws, so a
  // large mean is split into chunks small enough that exp(-chunk) stays
  // well away from double underflow.
  long total = 0;
  while (mean > 0.0) {
    const double chunk = mean > 40.0 ? 40.0 : mean;
    mean -= chunk;
    const double limit = std::exp(-chunk);
    long k = 0;
    double p = 1.0;
    do {
      ++k;
      p *= next_uniform_pos();
    } while (p > limit);
    total += k - 1;
  }
  return total;
}

}  // namespace somkit::rng

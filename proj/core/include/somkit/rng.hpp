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
#include <string_view>

namespace somkit::rng {

// splitmix64 finalizer. Counter-based draws keep every stream serializable as
// (seed, counter) and make forked streams independent of the parent's
// consumption history.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

constexpr std::uint64_t hash_label(std::string_view label) {
  // FNV-1a 64
  std::uint64_t h = 0xCBF29CE484222325ull;
  for (char c : label) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001B3ull;
  }
  return h;
}

constexpr std::uint64_t combine(std::uint64_t a, std::uint64_t b) {
  return mix64(a + 0x9E3779B97F4A7C15ull * (b + 1));
}

/// Deterministic random stream.  A stream is a pure function of
/// (seed, counter); restoring both reproduces the sequence bit-exactly.
class Stream {
 public:
  Stream() : Stream(0) {}
  explicit Stream(std::uint64_t seed) : seed_(seed), counter_(0) {}

  std::uint64_t next_u64() { return mix64(seed_ + 0x9E3779B97F4A7C15ull * ++counter_); }

  /// Uniform double in [0, 1).
  double next_uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  /// Uniform double in (0, 1]; safe as a log() argument.
  double next_uniform_pos() { return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53; }

  /// Unbiased integer in [0, n). n must be > 0.
  std::uint64_t next_below(std::uint64_t n) {
    const std::uint64_t threshold = -n % n;  // 2^64 mod n
    for (;;) {
      const std::uint64_t r = next_u64();
      if (r >= threshold) return r % n;
    }
  }

  /// Standard normal via Box-Muller (the paired value is discarded).
  double next_gaussian();

  /// Poisson draw; exact for any mean via additivity over chunks.
  long next_poisson(double mean);

  std::uint64_t seed() const { return seed_; }
  std::uint64_t counter() const { return counter_; }
  void restore(std::uint64_t seed, std::uint64_t counter) {
    seed_ = seed;
    counter_ = counter;
  }

  /// Child stream independent of this stream's position.
  Stream fork(std::string_view label) const { return Stream(combine(seed_, hash_label(label))); }
  Stream fork(std::uint64_t index) const { return Stream(combine(seed_, index)); }

 private:
  std::uint64_t seed_;
  std::uint64_t counter_;
};

}  // namespace somkit::rng

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
#include <map>
#include <vector>

#include <catch2/catch.hpp>

using somkit::rng::Stream;

TEST_CASE("u64 stream matches the splitmix64 reference vectors") {
  // Published outputs of splitmix64 seeded with 0.
  Stream s(0);
  CHECK(s.next_u64() == 0xE220A8397B1DCDAFull);
  CHECK(s.next_u64() == 0x6E789E6AA1B965F4ull);
  CHECK(s.next_u64() == 0x06C45D188009454Full);

  Stream t(42);
  CHECK(t.next_u64() == 0xBDD732262FEB6E95ull);
  CHECK(t.next_u64() == 0x28EFE333B266F103ull);
}

TEST_CASE("identical seeds replay identical sequences") {
  Stream a(123), b(123);
  for (int i = 0; i < 1000; ++i) REQUIRE(a.next_u64() == b.next_u64());
}

TEST_CASE("restore resumes a stream bit-exactly") {
  Stream a(7);
  for (int i = 0; i < 17; ++i) a.next_gaussian();
  a.next_poisson(150.0);
  const auto seed = a.seed();
  const auto counter = a.counter();
  std::vector<std::uint64_t> tail;
  for (int i = 0; i < 50; ++i) tail.push_back(a.next_u64());

  Stream b;
  b.restore(seed, counter);
  for (int i = 0; i < 50; ++i) REQUIRE(b.next_u64() == tail[static_cast<std::size_t>(i)]);
}

TEST_CASE("forked streams are decoupled from the parent's position") {
  Stream parent(99);
  const Stream f1 = parent.fork("noise");
  for (int i = 0; i < 1000; ++i) parent.next_u64();
  const Stream f2 = parent.fork("noise");
  Stream a = f1, b = f2;
  for (int i = 0; i < 100; ++i) REQUIRE(a.next_u64() == b.next_u64());
}

TEST_CASE("forks with different labels do not collide") {
  Stream parent(5);
  Stream a = parent.fork("alpha");
  Stream b = parent.fork("beta");
  Stream c = parent.fork(std::uint64_t{0});
  Stream d = parent.fork(std::uint64_t{1});
  int equal = 0;
  for (int i = 0; i < 64; ++i) {
    const auto va = a.next_u64(), vb = b.next_u64(), vc = c.next_u64(), vd = d.next_u64();
    equal += (va == vb) + (vc == vd) + (va == vc);
  }
  CHECK(equal == 0);
}

TEST_CASE("uniform draws stay inside their intervals") {
  Stream s(1);
  for (int i = 0; i < 100000; ++i) {
    const double u = s.next_uniform();
    REQUIRE(u >= 0.0);
    REQUIRE(u < 1.0);
  }
  Stream p(2);
  for (int i = 0; i < 100000; ++i) {
    const double u = p.next_uniform_pos();
    REQUIRE(u > 0.0);
    REQUIRE(u <= 1.0);
  }
}

TEST_CASE("uniform sample moments match the flat distribution") {
  Stream s(314159);
  const int n = 200000;
  double sum = 0, sum2 = 0;
  for (int i = 0; i < n; ++i) {
    const double u = s.next_uniform();
    sum += u;
    sum2 += u * u;
  }
  const double mean = sum / n;
  const double var = sum2 / n - mean * mean;
  CHECK(mean == Approx(0.5).margin(0.005));
  CHECK(var == Approx(1.0 / 12.0).margin(0.005));
}

TEST_CASE("next_below is bounded and covers all residues") {
  Stream s(777);
  std::map<std::uint64_t, int> counts;
  const int n = 70000;
  for (int i = 0; i < n; ++i) {
    const auto v = s.next_below(7);
    REQUIRE(v < 7);
    ++counts[v];
  }
  REQUIRE(counts.size() == 7);
  for (const auto& [v, c] : counts) CHECK(c == Approx(n / 7.0).epsilon(0.05));
}

TEST_CASE("gaussian sample moments match the standard normal") {
  Stream s(2718);
  const int n = 200000;
  double sum = 0, sum2 = 0, sum3 = 0;
  for (int i = 0; i < n; ++i) {
    const double g = s.next_gaussian();
    sum += g;
    sum2 += g * g;
    sum3 += g * g * g;
  }
  CHECK(sum / n == Approx(0.0).margin(0.01));
  CHECK(sum2 / n == Approx(1.0).margin(0.02));
  CHECK(sum3 / n == Approx(0.0).margin(0.05));
}

TEST_CASE("poisson sample moments match the target mean") {
  for (const double mean : {0.7, 3.0, 20.0, 150.0}) {
    Stream s(static_cast<std::uint64_t>(mean * 1000) + 1);
    const int n = 40000;
    double sum = 0, sum2 = 0;
    long mn = 1 << 30;
    for (int i = 0; i < n; ++i) {
      const long k = s.next_poisson(mean);
      mn = std::min(mn, k);
      sum += static_cast<double>(k);
      sum2 += static_cast<double>(k) * static_cast<double>(k);
    }
    REQUIRE(mn >= 0);
    const double m = sum / n;
    const double v = sum2 / n - m * m;
    CHECK(m == Approx(mean).epsilon(0.03));
    CHECK(v == Approx(mean).epsilon(0.05));
  }
}

TEST_CASE("poisson with zero mean is identically zero") {
  Stream s(4);
  for (int i = 0; i < 100; ++i) REQUIRE(s.next_poisson(0.0) == 0);
}

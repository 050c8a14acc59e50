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

#include "somkit/image_io.hpp"

#include <cstring>
#include <fstream>

#include <catch2/catch.hpp>

#include "somkit/rng.hpp"
#include "support/tempdir.hpp"

using namespace somkit;
using somkit::testing::TempDir;

namespace {

Image random_image(int h, int w, std::uint64_t seed) {
  Image img(h, w);
  rng::Stream s(seed);
  for (auto& v : img.px) v = static_cast<float>(s.next_gaussian());
  return img;
}

}  // namespace

TEST_CASE("array container round-trips bit-exactly") {
  TempDir dir("array");
  const Image img = random_image(13, 29, 5);
  io::write_array(dir / "a.somi", img.px.data(), img.h, img.w);

  int h = 0, w = 0;
  const auto back = io::read_array(dir / "a.somi", &h, &w);
  REQUIRE(h == 13);
  REQUIRE(w == 29);
  REQUIRE(back.size() == img.px.size());
  for (std::size_t i = 0; i < back.size(); ++i)
    REQUIRE(std::memcmp(&back[i], &img.px[i], sizeof(float)) == 0);
}

TEST_CASE("array container header is the documented 16 bytes") {
  TempDir dir("hdr");
  const Image img = random_image(4, 6, 1);
  io::write_array(dir / "a.somi", img.px.data(), img.h, img.w);
  REQUIRE(std::filesystem::file_size(dir / "a.somi") == 16 + 4 * 6 * sizeof(float));

  std::ifstream f(dir / "a.somi", std::ios::binary);
  char magic[4];
  f.read(magic, 4);
  CHECK(std::string(magic, 4) == "SOMI");
}

TEST_CASE("reader rejects wrong magic, wrong version, and truncation") {
  TempDir dir("bad");
  const Image img = random_image(8, 8, 2);
  io::write_array(dir / "good.somi", img.px.data(), img.h, img.w);

  auto clone_with = [&](const std::string& name, std::size_t keep, int patch_at = -1,
                        char patch = 0) {
    std::ifstream in(dir / "good.somi", std::ios::binary);
    std::vector<char> bytes((std::istreambuf_iterator<char>(in)),
                            std::istreambuf_iterator<char>());
    bytes.resize(std::min(keep, bytes.size()));
    if (patch_at >= 0) bytes[static_cast<std::size_t>(patch_at)] = patch;
    std::ofstream out(dir / name, std::ios::binary);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  };

  int h, w;
  clone_with("magic.somi", 9999, 0, 'X');
  CHECK_THROWS_AS(io::read_array(dir / "magic.somi", &h, &w), DataError);
  clone_with("version.somi", 9999, 4, 77);
  CHECK_THROWS_AS(io::read_array(dir / "version.somi", &h, &w), DataError);
  clone_with("short.somi", 16 + 10);
  CHECK_THROWS_AS(io::read_array(dir / "short.somi", &h, &w), DataError);
  clone_with("headerless.somi", 7);
  CHECK_THROWS_AS(io::read_array(dir / "headerless.somi", &h, &w), DataError);
  CHECK_THROWS_AS(io::read_array(dir / "missing.somi", &h, &w), DataError);
}

TEST_CASE("image files carry metadata through the sidecar") {
  TempDir dir("meta");
  Image img = random_image(16, 16, 3);
  img.tag = Domain::Y;
  img.provenance = Provenance::RealMeasurement;
  img.norm = NormMap{0.25f, -1.5f};
  io::write_image(dir / "m.somi", img);
  REQUIRE(std::filesystem::exists(dir / "m.somi.json"));

  const Image back = io::read_image(dir / "m.somi");
  CHECK(back.tag == Domain::Y);
  CHECK(back.provenance == Provenance::RealMeasurement);
  CHECK(back.norm.scale == img.norm.scale);
  CHECK(back.norm.offset == img.norm.offset);
  CHECK(back.px == img.px);
}

TEST_CASE("image files read back without a sidecar using defaults") {
  TempDir dir("nosc");
  Image img = random_image(5, 5, 4);
  img.tag = Domain::YClean;
  io::write_image(dir / "p.somi", img, /*sidecar=*/false);
  REQUIRE(!std::filesystem::exists(dir / "p.somi.json"));
  const Image back = io::read_image(dir / "p.somi");
  CHECK(back.tag == Domain::X);
  CHECK(back.px == img.px);
}

TEST_CASE("normalization maps a range onto [-1, 1] and clamps") {
  const NormMap m = norm_map_from_range(10.0f, 30.0f);
  CHECK(m.apply(10.0f) == Approx(-1.0f));
  CHECK(m.apply(30.0f) == Approx(1.0f));
  CHECK(m.apply(20.0f) == Approx(0.0f).margin(1e-6));

  Image img(1, 4);
  img.px = {0.0f, 10.0f, 30.0f, 100.0f};
  apply_norm(img, m);
  CHECK(img.px[0] == -1.0f);
  CHECK(img.px[1] == Approx(-1.0f));
  CHECK(img.px[2] == Approx(1.0f));
  CHECK(img.px[3] == 1.0f);
  CHECK(img.norm.scale == m.scale);

  const NormMap flat = norm_map_from_range(7.0f, 7.0f);
  CHECK(flat.apply(7.0f) == Approx(0.0f));
}

TEST_CASE("domain names round-trip and unknown names are rejected") {
  CHECK(domain_name(Domain::X) == std::string("X"));
  CHECK(domain_name(Domain::YClean) == std::string("Y_clean"));
  CHECK(domain_name(Domain::Y) == std::string("Y"));
  CHECK(domain_from_name("Y_clean") == Domain::YClean);
  CHECK_THROWS_AS(domain_from_name("bogus"), ConfigError);
}

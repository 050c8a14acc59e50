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

#include <nlohmann/json.hpp>

namespace somkit::io {

namespace fs = std::filesystem;
using nlohmann::json;

void write_array(const fs::path& path, const float* data, int h, int w) {
  if (h <= 0 || w <= 0) throw ParamError("write_array: non-positive shape");
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw DataError("cannot open for writing: " + path.string());
  std::uint32_t hdr[3] = {kContainerVersion, static_cast<std::uint32_t>(h),
                          static_cast<std::uint32_t>(w)};
  f.write(kMagic, 4);
  f.write(reinterpret_cast<const char*>(hdr), 12);
  f.write(reinterpret_cast<const char*>(data),
          static_cast<std::streamsize>(sizeof(float)) * h * w);
  if (!f) throw DataError("short write: " + path.string());
}

std::vector<float> read_array(const fs::path& path, int* h, int* w) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open: " + path.string());
  char magic[4];
  std::uint32_t hdr[3];
  f.read(magic, 4);
  f.read(reinterpret_cast<char*>(hdr), 12);
  if (!f || std::memcmp(magic, kMagic, 4) != 0)
    throw DataError("bad array container magic: " + path.string());
  if (hdr[0] != kContainerVersion)
    throw DataError("unsupported array container version " + std::to_string(hdr[0]) + ": " +
                    path.string());
  const int hh = static_cast<int>(hdr[1]);
  const int ww = static_cast<int>(hdr[2]);
  std::vector<float> data(static_cast<std::size_t>(hh) * ww);
  f.read(reinterpret_cast<char*>(data.data()),
         static_cast<std::streamsize>(sizeof(float)) * hh * ww);
  if (!f) throw DataError("truncated array container: " + path.string());
  *h = hh;
  *w = ww;
  return data;
}

void write_image(const fs::path& path, const Image& img, bool sidecar) {
  write_array(path, img.px.data(), img.h, img.w);
  if (!sidecar) return;
  json meta;
  meta["domain_tag"] = domain_name(img.tag);
  meta["normalization"] = {{"scale", img.norm.scale}, {"offset", img.norm.offset}};
  meta["provenance"] =
      img.provenance == Provenance::RealMeasurement ? "real_measurement" : "simulated";
  std::ofstream f(fs::path(path).concat(".json"), std::ios::trunc);
  if (!f) throw DataError("cannot write sidecar for " + path.string());
  f << meta.dump(2) << "\n";
}

Image read_image(const fs::path& path) {
  Image img;
  img.px = read_array(path, &img.h, &img.w);
  const fs::path side = fs::path(path).concat(".json");
  if (fs::exists(side)) {
    std::ifstream f(side);
    json meta = json::parse(f, nullptr, true);
    img.tag = domain_from_name(meta.at("domain_tag").get<std::string>());
    img.norm.scale = meta.at("normalization").at("scale").get<float>();
    img.norm.offset = meta.at("normalization").at("offset").get<float>();
    if (meta.contains("provenance"))
      img.provenance = meta["provenance"] == "real_measurement" ? Provenance::RealMeasurement
                                                                : Provenance::Simulated;
  }
  return img;
}

}  // namespace somkit::io

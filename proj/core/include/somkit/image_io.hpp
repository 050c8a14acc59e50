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

#include <filesystem>
#include <vector>

#include "somkit/image.hpp"

namespace somkit::io {

// Array container: 16-byte header (magic "SOMI", u32 version, u32 h, u32 w)
// followed by h*w little-endian float32 values, row-major.
inline constexpr char kMagic[4] = {'S', 'O', 'M', 'I'};
inline constexpr std::uint32_t kContainerVersion = 1;

void write_array(const std::filesystem::path& path, const float* data, int h, int w);
std::vector<float> read_array(const std::filesystem::path& path, int* h, int* w);

/// Writes pixels plus a .json sidecar carrying the normalization record,
/// domain tag, and provenance.
void write_image(const std::filesystem::path& path, const Image& img, bool sidecar = true);
Image read_image(const std::filesystem::path& path);

}  // namespace somkit::io

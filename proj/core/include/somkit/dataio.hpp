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
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "somkit/clb.hpp"
#include "somkit/image.hpp"
#include "somkit/measurement.hpp"

namespace somkit::data {

struct ManifestEntry {
  std::string path;                    // relative to the manifest directory
  std::optional<std::uint64_t> seed;   // synthetic images
  std::optional<std::string> source;   // ingested images
};

struct DatasetManifest {
  std::string name;
  Domain domain = Domain::X;
  int height = 0;
  int width = 0;
  NormMap normalization;
  std::vector<ManifestEntry> entries;
  int skipped = 0;  // undecodable files during ingest
  std::optional<meas::MeasurementConfig> measurement;  // set when the corpus is noisy
  std::filesystem::path dir;  // directory the manifest was written to / read from

  std::size_t count() const { return entries.size(); }
  std::filesystem::path entry_path(std::size_t i) const { return dir / entries[i].path; }
};

void save_manifest(const DatasetManifest& m, const std::filesystem::path& file);
DatasetManifest load_manifest(const std::filesystem::path& file);

/// Generates n rasterized CLB images with seeds base_seed .. base_seed+n-1
/// into out_dir and writes out_dir/manifest.json.
///
/// Pixel values are mapped to [-1, 1] with one per-dataset affine map: the
/// global min/max over the first min(256, n) raw images (or `norm_override`
/// when given, which keeps corpora comparable across datasets). When
/// `measurement` is set the stored images are noisy (domain Y); noise for
/// image i is seeded from (base_seed, "measurement_noise", i).
DatasetManifest synthesize_corpus(const clb::ClbParams& params, int n, std::uint64_t base_seed,
                                  const std::optional<meas::MeasurementConfig>& measurement,
                                  const std::filesystem::path& out_dir,
                                  const std::optional<NormMap>& norm_override = std::nullopt,
                                  int workers = 0);

struct IngestPolicy {
  // Percentile-based robust scaling to [-1, 1] over the whole corpus.
  double lo_percentile = 0.5;
  double hi_percentile = 99.5;
};

/// Reads every decodable grayscale image under dir (non-recursive), resizes
/// to target (bilinear), converts to float32, normalizes with a per-corpus
/// percentile map, and persists the corpus in the array container format.
/// Undecodable files are skipped and counted; an empty directory or more
/// than 10% undecodable files is an error.
DatasetManifest ingest_directory(const std::filesystem::path& dir, int target_h, int target_w,
                                 const IngestPolicy& policy, const std::filesystem::path& out_dir);

/// Deterministic unpaired batching: iteration order is a pure function of
/// (shuffle_seed, epoch); the final short batch is dropped.
class BatchStream {
 public:
  BatchStream(const DatasetManifest& manifest, int batch_size, std::uint64_t shuffle_seed);

  int batches_per_epoch() const { return static_cast<int>(manifest_->count()) / batch_size_; }
  int batch_size() const { return batch_size_; }

  /// Indices of batch b (0-based) of the given epoch.
  std::vector<std::size_t> batch_indices(std::int64_t epoch, int b) const;

  /// Indices for global step s = epoch * batches_per_epoch + b.
  std::vector<std::size_t> step_indices(std::int64_t step) const;

 private:
  const DatasetManifest* manifest_;
  int batch_size_;
  std::uint64_t shuffle_seed_;
  std::vector<std::size_t> permutation(std::int64_t epoch) const;
};

/// Whole corpus resident in RAM, in manifest order.
class CorpusCache {
 public:
  explicit CorpusCache(const DatasetManifest& manifest);
  const Image& image(std::size_t i) const { return images_[i]; }
  std::size_t count() const { return images_.size(); }
  const DatasetManifest& manifest() const { return manifest_; }

 private:
  DatasetManifest manifest_;
  std::vector<Image> images_;
};

}  // namespace somkit::data

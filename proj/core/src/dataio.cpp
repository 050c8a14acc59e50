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

#include "somkit/dataio.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <thread>

#include <nlohmann/json.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "json_util.hpp"
#include "somkit/image_io.hpp"

namespace somkit::data {

namespace fs = std::filesystem;
using nlohmann::json;

void save_manifest(const DatasetManifest& m, const fs::path& file) {
  json doc;
  doc["format_version"] = 1;
  doc["name"] = m.name;
  doc["domain_tag"] = domain_name(m.domain);
  doc["image_size"] = {m.height, m.width};
  doc["count"] = m.entries.size();
  doc["normalization"] = {{"scale", m.normalization.scale}, {"offset", m.normalization.offset}};
  doc["skipped"] = m.skipped;
  if (m.measurement) doc["measurement"] = detail::measurement_to_json(*m.measurement);
  json entries = json::array();
  for (const auto& e : m.entries) {
    json je{{"path", e.path}};
    if (e.seed) je["seed"] = *e.seed;
    if (e.source) je["source"] = *e.source;
    entries.push_back(std::move(je));
  }
  doc["entries"] = std::move(entries);
  std::ofstream f(file, std::ios::trunc);
  if (!f) throw DataError("cannot write manifest: " + file.string());
  f << doc.dump(2) << "\n";
  if (!f) throw DataError("short manifest write: " + file.string());
}

DatasetManifest load_manifest(const fs::path& file) {
  std::ifstream f(file);
  if (!f) throw DataError("cannot open manifest: " + file.string());
  json doc;
  try {
    doc = json::parse(f);
  } catch (const json::exception& e) {
    throw DataError("malformed manifest " + file.string() + ": " + e.what());
  }
  if (doc.at("format_version").get<int>() != 1)
    throw DataError("unsupported manifest format version in " + file.string());
  DatasetManifest m;
  m.name = doc.at("name").get<std::string>();
  m.domain = domain_from_name(doc.at("domain_tag").get<std::string>());
  m.height = doc.at("image_size")[0].get<int>();
  m.width = doc.at("image_size")[1].get<int>();
  m.normalization.scale = doc.at("normalization").at("scale").get<float>();
  m.normalization.offset = doc.at("normalization").at("offset").get<float>();
  m.skipped = doc.value("skipped", 0);
  if (doc.contains("measurement")) m.measurement = detail::measurement_from_json(doc["measurement"]);
  for (const auto& je : doc.at("entries")) {
    ManifestEntry e;
    e.path = je.at("path").get<std::string>();
    if (je.contains("seed")) e.seed = je["seed"].get<std::uint64_t>();
    if (je.contains("source")) e.source = je["source"].get<std::string>();
    m.entries.push_back(std::move(e));
  }
  if (m.entries.size() != doc.at("count").get<std::size_t>())
    throw DataError("manifest count does not match entry list: " + file.string());
  m.dir = fs::absolute(file).parent_path();
  return m;
}

namespace {

std::string entry_name(int i) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "img_%07d.somi", i);
  return buf;
}

void run_workers(int n_items, int workers, const std::function<void(int)>& fn) {
  if (workers <= 1) {
    for (int i = 0; i < n_items; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(workers));
  for (int t = 0; t < workers; ++t) {
    pool.emplace_back([&, t] {
      try {
        for (int i = next.fetch_add(1); i < n_items; i = next.fetch_add(1)) fn(i);
      } catch (...) {
        errors[static_cast<std::size_t>(t)] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace

DatasetManifest synthesize_corpus(const clb::ClbParams& params, int n, std::uint64_t base_seed,
                                  const std::optional<meas::MeasurementConfig>& measurement,
                                  const fs::path& out_dir,
                                  const std::optional<NormMap>& norm_override, int workers) {
  params.validate();
  if (measurement) measurement->validate();
  if (n < 1) throw ParamError("synthesize_corpus: n must be >= 1");
  if (workers <= 0) workers = static_cast<int>(std::thread::hardware_concurrency());

  fs::create_directories(out_dir);

  NormMap norm;
  if (norm_override) {
    norm = *norm_override;
  } else {
    // Calibration pass: global raw range over the first min(256, n) images.
    const int n_cal = std::min(n, 256);
    std::vector<float> lows(static_cast<std::size_t>(n_cal));
    std::vector<float> highs(static_cast<std::size_t>(n_cal));
    run_workers(n_cal, workers, [&](int i) {
      const Image raw = clb::rasterize_raw(clb::sample_clb(params, base_seed + i));
      auto [lo_it, hi_it] = std::minmax_element(raw.px.begin(), raw.px.end());
      lows[static_cast<std::size_t>(i)] = *lo_it;
      highs[static_cast<std::size_t>(i)] = *hi_it;
    });
    const float lo = *std::min_element(lows.begin(), lows.end());
    const float hi = *std::max_element(highs.begin(), highs.end());
    norm = norm_map_from_range(lo, hi);
  }

  const rng::Stream noise_root = rng::Stream(base_seed).fork("measurement_noise");
  std::vector<std::string> written(static_cast<std::size_t>(n));
  try {
    run_workers(n, workers, [&](int i) {
      Image img = clb::rasterize_raw(clb::sample_clb(params, base_seed + i));
      apply_norm(img, norm);
      if (measurement) {
        rng::Stream s = noise_root.fork(static_cast<std::uint64_t>(i));
        meas::add_noise(img.px.data(), img.px.size(), *measurement, s);
        img.tag = Domain::Y;
      }
      const std::string name = entry_name(i);
      io::write_image(out_dir / name, img);
      written[static_cast<std::size_t>(i)] = name;
    });
  } catch (...) {
    // Partial-corpus cleanup so a failed run leaves no half-written manifest dir.
    for (const auto& name : written)
      if (!name.empty()) {
        std::error_code ec;
        fs::remove(out_dir / name, ec);
        fs::remove(out_dir / (name + ".json"), ec);
      }
    throw;
  }

  DatasetManifest m;
  m.name = params.preset_name.empty() ? "clb" : params.preset_name;
  m.domain = measurement ? Domain::Y : Domain::X;
  m.height = params.height;
  m.width = params.width;
  m.normalization = norm;
  m.measurement = measurement;
  m.dir = fs::absolute(out_dir);
  for (int i = 0; i < n; ++i) {
    ManifestEntry e;
    e.path = written[static_cast<std::size_t>(i)];
    e.seed = base_seed + i;
    m.entries.push_back(std::move(e));
  }
  save_manifest(m, out_dir / "manifest.json");
  return m;
}

namespace {

// Decode as grayscale float32. Multi-channel sources use the channel average.
bool decode_gray(const fs::path& p, cv::Mat* out) {
  if (p.extension() == ".somi") {
    try {
      const Image img = io::read_image(p);
      *out = cv::Mat(img.h, img.w, CV_32F);
      std::copy(img.px.begin(), img.px.end(), out->ptr<float>());
      return true;
    } catch (const DataError&) {
      return false;
    }
  }
  cv::Mat raw = cv::imread(p.string(), cv::IMREAD_UNCHANGED | cv::IMREAD_ANYDEPTH);
  if (raw.empty()) return false;
  cv::Mat f;
  raw.convertTo(f, CV_32F);
  if (f.channels() > 1) {
    std::vector<cv::Mat> ch;
    cv::split(f, ch);
    cv::Mat acc = cv::Mat::zeros(f.rows, f.cols, CV_32F);
    for (auto& c : ch) acc += c;
    f = acc / static_cast<float>(ch.size());
  }
  *out = f;
  return true;
}

}  // namespace

DatasetManifest ingest_directory(const fs::path& dir, int target_h, int target_w,
                                 const IngestPolicy& policy, const fs::path& out_dir) {
  if (!fs::is_directory(dir)) throw DataError("ingest: not a directory: " + dir.string());
  if (target_h < 1 || target_w < 1) throw ParamError("ingest: bad target size");

  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() != ".json") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  if (files.empty()) throw DataError("ingest: directory is empty: " + dir.string());

  fs::create_directories(out_dir);

  // Pass 1: decode, resize, stash raw float images; track the value range.
  struct Item {
    std::string source;
    std::string name;
  };
  std::vector<Item> items;
  std::vector<std::string> raw_files;
  int skipped = 0;
  float lo = std::numeric_limits<float>::max();
  float hi = std::numeric_limits<float>::lowest();
  int idx = 0;
  for (const auto& p : files) {
    cv::Mat g;
    if (!decode_gray(p, &g)) {
      ++skipped;
      continue;
    }
    cv::Mat resized;
    if (g.rows == target_h && g.cols == target_w)
      resized = g;
    else
      cv::resize(g, resized, cv::Size(target_w, target_h), 0, 0, cv::INTER_LINEAR);
    double mn, mx;
    cv::minMaxLoc(resized, &mn, &mx);
    lo = std::min(lo, static_cast<float>(mn));
    hi = std::max(hi, static_cast<float>(mx));
    const std::string name = entry_name(idx++);
    io::write_array(out_dir / (name + ".raw"), resized.ptr<float>(), target_h, target_w);
    items.push_back({p.filename().string(), name});
    raw_files.push_back(name + ".raw");
  }
  if (items.empty()) throw DataError("ingest: no decodable images in " + dir.string());
  if (10 * skipped > static_cast<int>(files.size()))
    throw DataError("ingest: more than 10% of files undecodable (" + std::to_string(skipped) +
                    " of " + std::to_string(files.size()) + "); wrong directory?");

  // Percentile scan over a fixed histogram of the observed range.
  constexpr int kBins = 1 << 16;
  std::vector<std::int64_t> hist(kBins, 0);
  const float range = hi - lo;
  const float inv = range > 0 ? (kBins - 1) / range : 0.0f;
  std::int64_t total = 0;
  for (const auto& rf : raw_files) {
    int h, w;
    const auto px = io::read_array(out_dir / rf, &h, &w);
    for (float v : px) ++hist[static_cast<int>((v - lo) * inv)];
    total += static_cast<std::int64_t>(px.size());
  }
  auto percentile_value = [&](double pct) {
    const auto target = static_cast<std::int64_t>(pct / 100.0 * static_cast<double>(total - 1));
    std::int64_t seen = 0;
    for (int b = 0; b < kBins; ++b) {
      seen += hist[b];
      if (seen > target) return lo + (range > 0 ? b / inv : 0.0f);
    }
    return hi;
  };
  const float plo = percentile_value(policy.lo_percentile);
  const float phi = percentile_value(policy.hi_percentile);
  const NormMap norm = norm_map_from_range(plo, phi);

  // Pass 2: normalize and persist.
  DatasetManifest m;
  m.name = dir.filename().string();
  m.domain = Domain::Y;
  m.height = target_h;
  m.width = target_w;
  m.normalization = norm;
  m.skipped = skipped;
  m.dir = fs::absolute(out_dir);
  for (std::size_t i = 0; i < items.size(); ++i) {
    Image img;
    img.px = io::read_array(out_dir / raw_files[i], &img.h, &img.w);
    apply_norm(img, norm);
    img.tag = Domain::Y;
    img.provenance = Provenance::RealMeasurement;
    io::write_image(out_dir / items[i].name, img);
    std::error_code ec;
    fs::remove(out_dir / raw_files[i], ec);
    ManifestEntry e;
    e.path = items[i].name;
    e.source = items[i].source;
    m.entries.push_back(std::move(e));
  }
  save_manifest(m, out_dir / "manifest.json");
  return m;
}

BatchStream::BatchStream(const DatasetManifest& manifest, int batch_size,
                         std::uint64_t shuffle_seed)
    : manifest_(&manifest), batch_size_(batch_size), shuffle_seed_(shuffle_seed) {
  if (batch_size < 1) throw ParamError("batch_size must be >= 1");
  if (static_cast<std::size_t>(batch_size) > manifest.count())
    throw ParamError("batch_size exceeds dataset size");
}

std::vector<std::size_t> BatchStream::permutation(std::int64_t epoch) const {
  const std::size_t n = manifest_->count();
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  rng::Stream s = rng::Stream(shuffle_seed_).fork(static_cast<std::uint64_t>(epoch));
  for (std::size_t i = n - 1; i > 0; --i)
    std::swap(idx[i], idx[s.next_below(i + 1)]);
  return idx;
}

std::vector<std::size_t> BatchStream::batch_indices(std::int64_t epoch, int b) const {
  if (b < 0 || b >= batches_per_epoch()) throw ParamError("batch index out of range");
  const auto perm = permutation(epoch);
  return {perm.begin() + static_cast<std::ptrdiff_t>(b) * batch_size_,
          perm.begin() + (static_cast<std::ptrdiff_t>(b) + 1) * batch_size_};
}

std::vector<std::size_t> BatchStream::step_indices(std::int64_t step) const {
  const int bpe = batches_per_epoch();
  return batch_indices(step / bpe, static_cast<int>(step % bpe));
}

CorpusCache::CorpusCache(const DatasetManifest& manifest) : manifest_(manifest) {
  images_.reserve(manifest.count());
  for (std::size_t i = 0; i < manifest.count(); ++i) {
    Image img = io::read_image(manifest.entry_path(i));
    if (img.h != manifest.height || img.w != manifest.width)
      throw DataError("corpus image size mismatch at " + manifest.entry_path(i).string());
    images_.push_back(std::move(img));
  }
}

}  // namespace somkit::data

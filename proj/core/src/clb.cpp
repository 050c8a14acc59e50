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

#include "somkit/clb.hpp"

#include <algorithm>
#include <cmath>

#include <nlohmann/json.hpp>

namespace somkit::clb {

using nlohmann::json;

void ClbParams::validate() const {
  if (!(mean_clusters > 0.0)) throw ParamError("clb: mean_clusters must be > 0");
  if (!(mean_lumps > 0.0)) throw ParamError("clb: mean_lumps must be > 0");
  if (!(cluster_spread > 0.0)) throw ParamError("clb: cluster_spread must be > 0");
  if (!(shape_alpha > 0.0)) throw ParamError("clb: shape_alpha must be > 0");
  if (!(shape_beta > 0.0)) throw ParamError("clb: shape_beta must be > 0");
  if (!(length_x > 0.0)) throw ParamError("clb: length_x must be > 0");
  if (!(length_y > 0.0)) throw ParamError("clb: length_y must be > 0");
  if (height < 16 || width < 16) throw ParamError("clb: image size must be at least 16x16");
  if (!(tail_cutoff > 0.0) || tail_cutoff >= 1.0)
    throw ParamError("clb: tail_cutoff must lie in (0, 1)");
  if (!std::isfinite(amplitude)) throw ParamError("clb: amplitude must be finite");
}

double ClbParams::truncation_radius() const {
  const double l_max = std::max(length_x, length_y);
  return std::pow(l_max * std::log(1.0 / tail_cutoff) / shape_alpha, 1.0 / shape_beta);
}

ClbParams preset(const std::string& name) {
  ClbParams p;  // defaults are the simpiso values
  p.preset_name = name;
  if (name == "simpiso") return p;
  if (name == "opex") {
    p.length_x = 7.0;
    p.length_y = 3.0;
    p.cluster_spread = 8.0;
    return p;
  }
  throw ParamError("unknown CLB preset: " + name);
}

long ClbRealization::total_lumps() const {
  long n = 0;
  for (const auto& c : clusters) n += static_cast<long>(c.lumps.size());
  return n;
}

bool ClbRealization::operator==(const ClbRealization& other) const {
  if (seed != other.seed || clusters.size() != other.clusters.size()) return false;
  for (std::size_t k = 0; k < clusters.size(); ++k) {
    const auto& a = clusters[k];
    const auto& b = other.clusters[k];
    if (a.cx != b.cx || a.cy != b.cy || a.lumps.size() != b.lumps.size()) return false;
    for (std::size_t n = 0; n < a.lumps.size(); ++n) {
      if (a.lumps[n].dx != b.lumps[n].dx || a.lumps[n].dy != b.lumps[n].dy ||
          a.lumps[n].theta != b.lumps[n].theta)
        return false;
    }
  }
  return true;
}

namespace {

std::vector<Lump> sample_lumps(int n, double spread, rng::Stream& s) {
  std::vector<Lump> lumps(n);
  for (auto& l : lumps) {
    l.dx = spread * s.next_gaussian();
    l.dy = spread * s.next_gaussian();
    l.theta = 2.0 * M_PI * s.next_uniform();
  }
  return lumps;
}

// Radius of the axis-aligned (lx, ly) ellipse at polar angle phi.
inline double ellipse_radius(double lx, double ly, double cos_phi, double sin_phi) {
  return lx * ly / std::sqrt(ly * ly * cos_phi * cos_phi + lx * lx * sin_phi * sin_phi);
}

void splat_cluster(const ClbParams& p, const Cluster& c, std::vector<double>& acc) {
  const double rt = p.truncation_radius();
  const double rt2 = rt * rt;
  for (const auto& l : c.lumps) {
    const double lx = c.cx + l.dx;
    const double ly = c.cy + l.dy;
    const int x0 = std::max(0, static_cast<int>(std::ceil(lx - rt)));
    const int x1 = std::min(p.width - 1, static_cast<int>(std::floor(lx + rt)));
    const int y0 = std::max(0, static_cast<int>(std::ceil(ly - rt)));
    const int y1 = std::min(p.height - 1, static_cast<int>(std::floor(ly + rt)));
    const double ct = std::cos(l.theta);
    const double st = std::sin(l.theta);
    for (int y = y0; y <= y1; ++y) {
      double* row = acc.data() + static_cast<std::size_t>(y) * p.width;
      const double vy = y - ly;
      for (int x = x0; x <= x1; ++x) {
        const double vx = x - lx;
        const double r2 = vx * vx + vy * vy;
        if (r2 > rt2) continue;
        if (r2 == 0.0) {
          row[x] += p.amplitude;
          continue;
        }
        const double r = std::sqrt(r2);
        // rotate v into the lump frame
        const double cx_ = (vx * ct + vy * st) / r;
        const double sx_ = (-vx * st + vy * ct) / r;
        const double ell = ellipse_radius(p.length_x, p.length_y, cx_, sx_);
        row[x] += p.amplitude * std::exp(-p.shape_alpha * std::pow(r, p.shape_beta) / ell);
      }
    }
  }
}

}  // namespace

ClbRealization sample_clb(const ClbParams& params, std::uint64_t seed) {
  params.validate();
  ClbRealization r;
  r.params = params;
  r.seed = seed;

  rng::Stream root(seed);
  rng::Stream count_stream = root.fork("cluster_count");
  rng::Stream center_stream = root.fork("centers");
  rng::Stream lump_count_stream = root.fork("lump_counts");
  rng::Stream lump_stream = root.fork("lumps");

  const long k = count_stream.next_poisson(params.mean_clusters);
  const double pad = params.pad();
  r.clusters.reserve(static_cast<std::size_t>(k));
  for (long i = 0; i < k; ++i) {
    Cluster c;
    c.cx = -pad + center_stream.next_uniform() * (params.width - 1 + 2.0 * pad);
    c.cy = -pad + center_stream.next_uniform() * (params.height - 1 + 2.0 * pad);
    const long n = lump_count_stream.next_poisson(params.mean_lumps);
    rng::Stream s = lump_stream.fork(static_cast<std::uint64_t>(i));
    c.lumps = sample_lumps(static_cast<int>(n), params.cluster_spread, s);
    r.clusters.push_back(std::move(c));
  }
  return r;
}

Image rasterize_raw(const ClbRealization& r) {
  r.params.validate();
  std::vector<double> acc(static_cast<std::size_t>(r.params.height) * r.params.width, 0.0);
  for (const auto& c : r.clusters) splat_cluster(r.params, c, acc);
  Image img(r.params.height, r.params.width);
  img.tag = Domain::X;
  for (std::size_t i = 0; i < acc.size(); ++i) img.px[i] = static_cast<float>(acc[i]);
  return img;
}

Image rasterize(const ClbRealization& r) {
  Image img = rasterize_raw(r);
  float lo = img.px.empty() ? 0.0f : img.px[0];
  float hi = lo;
  for (float v : img.px) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  apply_norm(img, norm_map_from_range(lo, hi));
  return img;
}

namespace {
void check_center_in_padded_bounds(const ClbParams& p, double cx, double cy) {
  const double pad = p.pad();
  if (cx < -pad || cx > p.width - 1 + pad || cy < -pad || cy > p.height - 1 + pad)
    throw ParamError("cluster center outside padded image bounds");
}
}  // namespace

ClbRealization add_cluster(const ClbRealization& r, double cx, double cy, int n_lumps,
                           std::uint64_t seed) {
  check_center_in_padded_bounds(r.params, cx, cy);
  if (n_lumps < 1) throw ParamError("add_cluster: n_lumps must be >= 1");
  ClbRealization out = r;
  Cluster c;
  c.cx = cx;
  c.cy = cy;
  rng::Stream s = rng::Stream(seed).fork("edit_lumps");
  c.lumps = sample_lumps(n_lumps, r.params.cluster_spread, s);
  out.clusters.push_back(std::move(c));
  return out;
}

ClbRealization move_cluster(const ClbRealization& r, std::size_t index, double cx, double cy) {
  if (index >= r.clusters.size())
    throw std::out_of_range("move_cluster: cluster index " + std::to_string(index) +
                            " out of range (have " + std::to_string(r.clusters.size()) + ")");
  check_center_in_padded_bounds(r.params, cx, cy);
  ClbRealization out = r;
  out.clusters[index].cx = cx;
  out.clusters[index].cy = cy;
  return out;
}

double cluster_support_radius(const ClbParams& params, const Cluster& c) {
  double max_off = 0.0;
  for (const auto& l : c.lumps)
    max_off = std::max(max_off, std::sqrt(l.dx * l.dx + l.dy * l.dy));
  return max_off + params.truncation_radius();
}

static json params_to_json(const ClbParams& p) {
  return json{{"mean_clusters", p.mean_clusters},
              {"mean_lumps", p.mean_lumps},
              {"cluster_spread", p.cluster_spread},
              {"amplitude", p.amplitude},
              {"shape_alpha", p.shape_alpha},
              {"shape_beta", p.shape_beta},
              {"length_x", p.length_x},
              {"length_y", p.length_y},
              {"height", p.height},
              {"width", p.width},
              {"preset_name", p.preset_name},
              {"tail_cutoff", p.tail_cutoff}};
}

static ClbParams params_from_json(const json& j) {
  ClbParams p;
  p.mean_clusters = j.at("mean_clusters").get<double>();
  p.mean_lumps = j.at("mean_lumps").get<double>();
  p.cluster_spread = j.at("cluster_spread").get<double>();
  p.amplitude = j.at("amplitude").get<double>();
  p.shape_alpha = j.at("shape_alpha").get<double>();
  p.shape_beta = j.at("shape_beta").get<double>();
  p.length_x = j.at("length_x").get<double>();
  p.length_y = j.at("length_y").get<double>();
  p.height = j.at("height").get<int>();
  p.width = j.at("width").get<int>();
  p.preset_name = j.value("preset_name", std::string());
  p.tail_cutoff = j.value("tail_cutoff", 1e-4);
  return p;
}

std::string to_json(const ClbRealization& r) {
  json doc;
  doc["format_version"] = 1;
  doc["params"] = params_to_json(r.params);
  doc["seed"] = r.seed;
  json clusters = json::array();
  for (const auto& c : r.clusters) {
    json lumps = json::array();
    for (const auto& l : c.lumps) lumps.push_back({{"offset", {l.dx, l.dy}}, {"orientation", l.theta}});
    clusters.push_back({{"center", {c.cx, c.cy}}, {"lumps", std::move(lumps)}});
  }
  doc["clusters"] = std::move(clusters);
  return doc.dump(2);
}

ClbRealization realization_from_json(const std::string& text) {
  try {
    json doc = json::parse(text);
    if (doc.at("format_version").get<int>() != 1)
      throw DataError("unsupported realization format version");
    ClbRealization r;
    r.params = params_from_json(doc.at("params"));
    r.seed = doc.at("seed").get<std::uint64_t>();
    for (const auto& jc : doc.at("clusters")) {
      Cluster c;
      c.cx = jc.at("center")[0].get<double>();
      c.cy = jc.at("center")[1].get<double>();
      for (const auto& jl : jc.at("lumps")) {
        Lump l;
        l.dx = jl.at("offset")[0].get<double>();
        l.dy = jl.at("offset")[1].get<double>();
        l.theta = jl.at("orientation").get<double>();
        c.lumps.push_back(l);
      }
      r.clusters.push_back(std::move(c));
    }
    return r;
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed realization json: ") + e.what());
  }
}

std::string to_json(const ClbParams& p) { return params_to_json(p).dump(2); }

ClbParams params_from_json(const std::string& text) {
  try {
    return params_from_json(json::parse(text));
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed CLB params json: ") + e.what());
  }
}

}  // namespace somkit::clb

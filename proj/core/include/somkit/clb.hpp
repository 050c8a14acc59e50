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
#include <string>
#include <vector>

#include "somkit/image.hpp"
#include "somkit/rng.hpp"

namespace somkit::clb {

/// Clustered lumpy background parameters.
///
/// A realization draws Poisson(mean_clusters) cluster centers uniformly over
/// the image domain padded by 3 * cluster_spread, Poisson(mean_lumps) lumps
/// per cluster with isotropic Gaussian offsets (std cluster_spread) and
/// uniform orientations, and sums the elliptical exponential-power kernel
///   lump(v; theta) = amplitude * exp(-shape_alpha * |v|^shape_beta / l(phi))
/// where l(phi) is the radius of the (length_x, length_y) ellipse at polar
/// angle phi = angle(v) - theta.
struct ClbParams {
  double mean_clusters = 150.0;   // expected clusters per image
  double mean_lumps = 20.0;       // expected lumps per cluster
  double cluster_spread = 12.0;   // std of lump offsets around the center (px)
  double amplitude = 1.0;         // lump peak value
  double shape_alpha = 2.1;       // kernel decay coefficient
  double shape_beta = 0.5;        // kernel decay exponent
  double length_x = 5.0;          // ellipse semi-axis along the lump axis (px)
  double length_y = 2.0;          // ellipse semi-axis across the lump axis (px)
  int height = 256;
  int width = 256;
  std::string preset_name;        // optional tag, informational
  double tail_cutoff = 1e-4;      // relative kernel value where evaluation stops

  void validate() const;

  /// Radius beyond which the kernel is below tail_cutoff * amplitude for
  /// every orientation; lumps are evaluated only inside it.
  double truncation_radius() const;

  /// Sampling margin around the image bounds for cluster centers.
  double pad() const { return 3.0 * cluster_spread; }
};

/// Named parameter defaults. These are configuration presets, overridable
/// from any config file; they are not fitted to data.
ClbParams preset(const std::string& name);

struct Lump {
  double dx = 0.0;
  double dy = 0.0;
  double theta = 0.0;  // radians
};

struct Cluster {
  double cx = 0.0;
  double cy = 0.0;
  std::vector<Lump> lumps;
};

/// A structured CLB sample. Fully determined by (params, seed); edits
/// produce realizations whose seed no longer regenerates them, which is why
/// the cluster list is stored explicitly.
struct ClbRealization {
  ClbParams params;
  std::uint64_t seed = 0;
  std::vector<Cluster> clusters;

  long total_lumps() const;
  bool operator==(const ClbRealization& other) const;
};

ClbRealization sample_clb(const ClbParams& params, std::uint64_t seed);

/// Sum of truncated lump kernels, no normalization. Double accumulation.
Image rasterize_raw(const ClbRealization& r);

/// rasterize_raw followed by a per-image affine map onto [-1, 1]; the map is
/// recorded on the returned image. Corpus synthesis uses a per-dataset map
/// instead (see dataio).
Image rasterize(const ClbRealization& r);

/// Copy of r with one appended cluster at (cx, cy); its n_lumps lumps are
/// drawn from the CLB offset/orientation law seeded by `seed`. Existing
/// clusters are untouched.
ClbRealization add_cluster(const ClbRealization& r, double cx, double cy, int n_lumps,
                           std::uint64_t seed);

/// Copy of r with cluster `index` translated to (cx, cy), lump offsets and
/// orientations preserved.
ClbRealization move_cluster(const ClbRealization& r, std::size_t index, double cx, double cy);

/// Radius around the cluster center outside of which the rasterization of
/// this cluster is exactly zero (max lump offset + kernel truncation radius).
double cluster_support_radius(const ClbParams& params, const Cluster& c);

std::string to_json(const ClbRealization& r);
ClbRealization realization_from_json(const std::string& text);

std::string to_json(const ClbParams& p);
ClbParams params_from_json(const std::string& text);

}  // namespace somkit::clb

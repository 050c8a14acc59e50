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
#include <map>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "somkit/common.hpp"
#include "somkit/image.hpp"

namespace somkit::eval {

/// Deterministic image -> feature-vector map for distribution metrics.
/// Three kinds: a canonical embedder loaded from an external asset file, a
/// bilinear downsample to raw pixels, and a seeded Gaussian random
/// projection. Instances are single-threaded (the projection cache is not
/// synchronized).
class FeatureEmbedder {
 public:
  /// Bilinear resize to side x side, flattened row-major.
  static FeatureEmbedder downsample_pixel(int side);

  /// out = P x with P (dim x numel), entries N(0, 1/numel) drawn from the
  /// seed; P depends only on (seed, numel), so images of the same size
  /// always see the same projection.
  static FeatureEmbedder random_projection(int dim, std::uint64_t seed);

  /// Loads an affine feature map from an array-container asset of shape
  /// (output_dim, side*side + 1); the last column is the bias. Images are
  /// bilinearly resized to side x side before the map is applied.
  static FeatureEmbedder canonical(const std::filesystem::path& asset);

  int output_dim() const { return output_dim_; }
  Eigen::VectorXd embed(const Image& img) const;

  /// One row per image, in input order.
  Eigen::MatrixXd embed_set(const std::vector<const Image*>& imgs) const;

 private:
  enum class Kind { DownsamplePixel, RandomProjection, Canonical };
  FeatureEmbedder(Kind kind, int output_dim) : kind_(kind), output_dim_(output_dim) {}

  Kind kind_;
  int output_dim_ = 0;
  int side_ = 0;
  std::uint64_t seed_ = 0;
  Eigen::MatrixXd weights_;
  mutable std::map<std::size_t, Eigen::MatrixXd> projections_;
};

/// Frechet distance between Gaussian fits of two feature sets (one row per
/// sample): ||mu_a - mu_b||^2 + Tr(S_a + S_b - 2 (S_a S_b)^{1/2}).
/// Covariances use the n-1 denominator when a set has at least dim + 1
/// samples; smaller sets fall back to Ledoit-Wolf shrinkage toward the
/// scaled identity (with the 1/n denominator the estimator is derived for).
/// Symmetric up to matrix-square-root rounding; can dip below zero by at
/// most that rounding.
double fid(const Eigen::MatrixXd& features_a, const Eigen::MatrixXd& features_b);

/// Ensemble-mean power per integer-radius annulus of the unnormalized 2-D
/// DFT. power[r-1] is the mean power per spectral sample at radius r
/// (round(hypot) of the signed frequency pair); the DC sample is reported
/// separately. bins counts the spectral samples in each annulus, so
/// dc + sum_r power[r-1] * bins[r-1] recovers the mean total power, which
/// per image equals H * W * sum(pixel^2).
struct RadialSpectrum {
  double dc = 0.0;
  std::vector<double> power;
  std::vector<std::int64_t> bins;
};

RadialSpectrum radial_power_spectrum(const std::vector<const Image*>& imgs);

/// Euclidean distance between log power curves over the radii both spectra
/// cover; power is floored at 1e-30 before the log.
double log_spectrum_distance(const RadialSpectrum& a, const RadialSpectrum& b);

/// Mean annular power over the top quartile of radii.
double high_freq_mean(const RadialSpectrum& s);

/// Mean structural similarity over all valid 11x11 windows (Gaussian
/// weights, sigma 1.5), stability constants K1=0.01, K2=0.03 at a declared
/// dynamic range of 2.0 for [-1, 1] images.
double ssim(const Image& a, const Image& b);

/// SSIM samples over random cross-set pairs plus plotting summaries: a
/// 200-bin density histogram on [-1, 1] and a Gaussian-kernel smoothed
/// density on the same grid.
struct PairPdf {
  std::vector<double> samples;  // sorted ascending
  std::vector<double> hist;
  std::vector<double> density;
  double mean = 0.0;
  double stddev = 0.0;
};

/// Draws n_pairs (a in A, b in B) pairs from the seed. A draw that lands on
/// the same image twice is redrawn while any distinct pair exists.
PairPdf ssim_pair_pdf(const std::vector<const Image*>& a, const std::vector<const Image*>& b,
                      int n_pairs, std::uint64_t seed);

/// Two-sample Kolmogorov-Smirnov statistic.
double ks_statistic(const std::vector<double>& a, const std::vector<double>& b);
double ks_statistic(const PairPdf& a, const PairPdf& b);

/// Signal-known-exactly detection signal: a 2-D Gaussian bump of the given
/// peak amplitude and spatial width, centered on pixel (h/2, w/2) of a
/// central patch crop.
struct SignalParams {
  double amplitude = 0.3;
  double spatial_std = 0.7;
  int patch_h = 64;
  int patch_w = 64;

  void validate() const;
};

/// The bump alone, on an otherwise zero patch.
Image signal_image(const SignalParams& sp);

/// Paired detection classes: entry i of both lists is the central crop of
/// the same background, with the signal added to the present copy.
struct SkeDataset {
  std::vector<Image> present;
  std::vector<Image> absent;
};

/// Crops every background centrally and emits the two classes; the seed
/// shuffles background order so index ranges give reproducible random
/// train/test splits.
SkeDataset make_ske_dataset(const std::vector<const Image*>& backgrounds, const SignalParams& sp,
                            std::uint64_t seed);

/// Hotelling template w solving (S + reg * trace(S)/D * I) w = dg, where S
/// averages the two class sample covariances of the flattened patches and
/// dg is the class-mean difference. Solved by Cholesky, never an explicit
/// inverse.
Eigen::VectorXd ho_template(const std::vector<const Image*>& train_present,
                            const std::vector<const Image*>& train_absent,
                            double regularization = 1e-3);

/// ROC of the linear test statistic t = <w, g>. Points walk the distinct
/// observed statistics from the highest threshold down, starting at (0, 0)
/// and ending at (1, 1); auc is the tie-aware Mann-Whitney value.
struct RocResult {
  std::vector<double> thresholds;  // descending distinct statistic values
  std::vector<double> fpf;         // thresholds.size() + 1 points
  std::vector<double> tpf;
  double auc = 0.0;
  std::vector<double> t_present;
  std::vector<double> t_absent;
};

RocResult ho_roc(const Eigen::VectorXd& w, const std::vector<const Image*>& test_present,
                 const std::vector<const Image*>& test_absent);

/// Flat bundle of named metric scalars and curves, serialized to JSON.
struct EvalReport {
  std::map<std::string, double> scalars;
  std::map<std::string, std::vector<double>> curves;
};

void save_eval_report(const EvalReport& r, const std::filesystem::path& file);
EvalReport load_eval_report(const std::filesystem::path& file);

/// Raster plot emitters (PNG by extension).
struct LabeledCurve {
  std::string label;
  std::vector<double> xs;
  std::vector<double> ys;
};

void save_line_plot(const std::filesystem::path& file, const std::string& title,
                    const std::string& x_label, const std::string& y_label,
                    const std::vector<LabeledCurve>& curves, bool log_y = false);
void save_roc_plot(const std::filesystem::path& file, const RocResult& roc);

}  // namespace somkit::eval

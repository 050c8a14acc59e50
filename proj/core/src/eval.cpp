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

#include "somkit/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <numeric>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <fftw3.h>
#include <nlohmann/json.hpp>
#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "json_util.hpp"
#include "somkit/image_io.hpp"
#include "somkit/rng.hpp"

namespace somkit::eval {

using nlohmann::json;

namespace {

Eigen::VectorXd resize_flat(const Image& img, int side) {
  cv::Mat src(img.h, img.w, CV_32F, const_cast<float*>(img.px.data()));
  cv::Mat dst;
  cv::resize(src, dst, cv::Size(side, side), 0.0, 0.0, cv::INTER_LINEAR);
  Eigen::VectorXd out(static_cast<Eigen::Index>(side) * side);
  for (int y = 0; y < side; ++y)
    for (int x = 0; x < side; ++x)
      out[static_cast<Eigen::Index>(y) * side + x] = dst.at<float>(y, x);
  return out;
}

}  // namespace

FeatureEmbedder FeatureEmbedder::downsample_pixel(int side) {
  if (side < 1) throw ParamError("downsample side must be at least 1");
  FeatureEmbedder e(Kind::DownsamplePixel, side * side);
  e.side_ = side;
  return e;
}

FeatureEmbedder FeatureEmbedder::random_projection(int dim, std::uint64_t seed) {
  if (dim < 1) throw ParamError("projection dim must be at least 1");
  FeatureEmbedder e(Kind::RandomProjection, dim);
  e.seed_ = seed;
  return e;
}

FeatureEmbedder FeatureEmbedder::canonical(const std::filesystem::path& asset) {
  int rows = 0, cols = 0;
  std::vector<float> data;
  try {
    data = io::read_array(asset, &rows, &cols);
  } catch (const DataError& e) {
    throw DataError("cannot load canonical embedder asset: " + std::string(e.what()));
  }
  const int side = static_cast<int>(std::lround(std::sqrt(static_cast<double>(cols - 1))));
  if (rows < 1 || cols < 2 || side * side != cols - 1)
    throw DataError("malformed embedder asset " + asset.string() +
                    ": expected shape (dim, side^2 + 1)");
  FeatureEmbedder e(Kind::Canonical, rows);
  e.side_ = side;
  e.weights_.resize(rows, cols);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) e.weights_(r, c) = data[static_cast<std::size_t>(r) * cols + c];
  return e;
}

Eigen::VectorXd FeatureEmbedder::embed(const Image& img) const {
  if (img.h < 1 || img.w < 1) throw ParamError("cannot embed an empty image");
  switch (kind_) {
    case Kind::DownsamplePixel:
      return resize_flat(img, side_);
    case Kind::Canonical: {
      const Eigen::VectorXd x = resize_flat(img, side_);
      return weights_.leftCols(weights_.cols() - 1) * x + weights_.rightCols<1>();
    }
    case Kind::RandomProjection: {
      const std::size_t numel = img.size();
      auto it = projections_.find(numel);
      if (it == projections_.end()) {
        Eigen::MatrixXd p(output_dim_, static_cast<Eigen::Index>(numel));
        rng::Stream s = rng::Stream(seed_).fork(numel);
        const double scale = 1.0 / std::sqrt(static_cast<double>(numel));
        for (int r = 0; r < output_dim_; ++r)
          for (Eigen::Index c = 0; c < p.cols(); ++c) p(r, c) = s.next_gaussian() * scale;
        it = projections_.emplace(numel, std::move(p)).first;
      }
      Eigen::VectorXd x(static_cast<Eigen::Index>(numel));
      for (std::size_t i = 0; i < numel; ++i) x[static_cast<Eigen::Index>(i)] = img.px[i];
      return it->second * x;
    }
  }
  throw std::logic_error("unreachable embedder kind");
}

Eigen::MatrixXd FeatureEmbedder::embed_set(const std::vector<const Image*>& imgs) const {
  Eigen::MatrixXd f(static_cast<Eigen::Index>(imgs.size()), output_dim_);
  for (std::size_t i = 0; i < imgs.size(); ++i)
    f.row(static_cast<Eigen::Index>(i)) = embed(*imgs[i]).transpose();
  return f;
}

namespace {

struct GaussianFit {
  Eigen::VectorXd mu;
  Eigen::MatrixXd sigma;
};

GaussianFit fit_gaussian(const Eigen::MatrixXd& f) {
  const Eigen::Index n = f.rows();
  const Eigen::Index d = f.cols();
  GaussianFit g;
  g.mu = f.colwise().mean();
  const Eigen::MatrixXd c = f.rowwise() - g.mu.transpose();
  if (n >= d + 1) {
    g.sigma = (c.adjoint() * c) / static_cast<double>(n - 1);
    return g;
  }
  const Eigen::MatrixXd s = (c.adjoint() * c) / static_cast<double>(n);
  const double mu_s = s.trace() / static_cast<double>(d);
  Eigen::MatrixXd target = Eigen::MatrixXd::Identity(d, d) * mu_s;
  const double d2 = (s - target).squaredNorm();
  double quad = 0.0;
  for (Eigen::Index k = 0; k < n; ++k) quad += std::pow(c.row(k).squaredNorm(), 2);
  const double bbar2 = (quad - static_cast<double>(n) * s.squaredNorm()) /
                       (static_cast<double>(n) * static_cast<double>(n));
  const double rho = d2 > 0.0 ? std::min(bbar2, d2) / d2 : 0.0;
  g.sigma = (1.0 - rho) * s + rho * target;
  return g;
}

double trace_sqrt_product(const Eigen::MatrixXd& sa, const Eigen::MatrixXd& sb) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eb(sb);
  if (eb.info() != Eigen::Success) throw DataError("covariance eigendecomposition failed");
  const Eigen::VectorXd root =
      eb.eigenvalues().unaryExpr([](double v) { return std::sqrt(std::max(v, 0.0)); });
  const Eigen::MatrixXd sqrt_b =
      eb.eigenvectors() * root.asDiagonal() * eb.eigenvectors().transpose();
  Eigen::MatrixXd m = sqrt_b * sa * sqrt_b;
  m = 0.5 * (m + m.transpose()).eval();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> em(m);
  if (em.info() != Eigen::Success) throw DataError("covariance eigendecomposition failed");
  double t = 0.0;
  for (Eigen::Index i = 0; i < em.eigenvalues().size(); ++i)
    t += std::sqrt(std::max(em.eigenvalues()[i], 0.0));
  return t;
}

}  // namespace

double fid(const Eigen::MatrixXd& features_a, const Eigen::MatrixXd& features_b) {
  if (features_a.cols() != features_b.cols())
    throw ParamError("feature dimensions differ: " + std::to_string(features_a.cols()) + " vs " +
                     std::to_string(features_b.cols()));
  if (features_a.rows() < 2 || features_b.rows() < 2)
    throw ParamError("each feature set needs at least 2 samples");
  const GaussianFit a = fit_gaussian(features_a);
  const GaussianFit b = fit_gaussian(features_b);
  return (a.mu - b.mu).squaredNorm() + a.sigma.trace() + b.sigma.trace() -
         2.0 * trace_sqrt_product(a.sigma, b.sigma);
}

RadialSpectrum radial_power_spectrum(const std::vector<const Image*>& imgs) {
  if (imgs.empty()) throw ParamError("radial spectrum needs at least one image");
  const int h = imgs[0]->h;
  const int w = imgs[0]->w;
  if (h < 1 || w < 1) throw ParamError("radial spectrum needs non-empty images");
  for (const Image* im : imgs)
    if (im->h != h || im->w != w) throw ParamError("radial spectrum needs same-size images");

  const int half_w = w / 2 + 1;
  const int rmax = static_cast<int>(std::lround(std::hypot(h / 2, w / 2)));
  RadialSpectrum out;
  out.power.assign(rmax, 0.0);
  out.bins.assign(rmax, 0);

  auto radius_of = [&](int u, int v) {
    const int su = u <= h / 2 ? u : u - h;
    return static_cast<int>(std::lround(std::hypot(su, v)));
  };
  for (int u = 0; u < h; ++u) {
    for (int v = 0; v < half_w; ++v) {
      const std::int64_t mult = (v == 0 || (w % 2 == 0 && v == w / 2)) ? 1 : 2;
      const int r = radius_of(u, v);
      if (r > 0) out.bins[r - 1] += mult;
    }
  }

  double* in = fftw_alloc_real(static_cast<std::size_t>(h) * w);
  fftw_complex* spec = fftw_alloc_complex(static_cast<std::size_t>(h) * half_w);
  fftw_plan plan = fftw_plan_dft_r2c_2d(h, w, in, spec, FFTW_ESTIMATE);
  if (plan == nullptr) {
    fftw_free(in);
    fftw_free(spec);
    throw DataError("cannot plan the Fourier transform");
  }

  std::vector<double> acc(rmax, 0.0);
  double dc_acc = 0.0;
  for (const Image* im : imgs) {
    for (std::size_t i = 0; i < im->px.size(); ++i) in[i] = im->px[i];
    fftw_execute(plan);
    for (int u = 0; u < h; ++u) {
      for (int v = 0; v < half_w; ++v) {
        const double re = spec[static_cast<std::size_t>(u) * half_w + v][0];
        const double imn = spec[static_cast<std::size_t>(u) * half_w + v][1];
        const double p = re * re + imn * imn;
        const double mult = (v == 0 || (w % 2 == 0 && v == w / 2)) ? 1.0 : 2.0;
        const int r = radius_of(u, v);
        if (r == 0)
          dc_acc += p;
        else
          acc[r - 1] += p * mult;
      }
    }
  }
  fftw_destroy_plan(plan);
  fftw_free(in);
  fftw_free(spec);

  const double n = static_cast<double>(imgs.size());
  out.dc = dc_acc / n;
  for (int r = 0; r < rmax; ++r) out.power[r] = acc[r] / (n * static_cast<double>(out.bins[r]));
  return out;
}

double log_spectrum_distance(const RadialSpectrum& a, const RadialSpectrum& b) {
  const std::size_t n = std::min(a.power.size(), b.power.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double la = std::log(std::max(a.power[i], 1e-30));
    const double lb = std::log(std::max(b.power[i], 1e-30));
    sum += (la - lb) * (la - lb);
  }
  return std::sqrt(sum);
}

double high_freq_mean(const RadialSpectrum& s) {
  const std::size_t r = s.power.size();
  if (r == 0) return 0.0;
  const std::size_t q = (r + 3) / 4;
  double sum = 0.0;
  for (std::size_t i = r - q; i < r; ++i) sum += s.power[i];
  return sum / static_cast<double>(q);
}

namespace {

constexpr int kSsimWindow = 11;

std::vector<double> ssim_kernel() {
  std::vector<double> k(kSsimWindow);
  const double sigma = 1.5;
  double sum = 0.0;
  for (int i = 0; i < kSsimWindow; ++i) {
    const double d = i - (kSsimWindow - 1) / 2.0;
    k[i] = std::exp(-d * d / (2.0 * sigma * sigma));
    sum += k[i];
  }
  for (double& v : k) v /= sum;
  return k;
}

/// Valid-region separable convolution: (h, w) -> (h - 10, w - 10).
std::vector<double> filter_valid(const std::vector<double>& src, int h, int w,
                                 const std::vector<double>& k) {
  const int wo = w - kSsimWindow + 1;
  const int ho = h - kSsimWindow + 1;
  std::vector<double> rows(static_cast<std::size_t>(h) * wo);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < wo; ++x) {
      double s = 0.0;
      for (int t = 0; t < kSsimWindow; ++t) s += k[t] * src[static_cast<std::size_t>(y) * w + x + t];
      rows[static_cast<std::size_t>(y) * wo + x] = s;
    }
  }
  std::vector<double> out(static_cast<std::size_t>(ho) * wo);
  for (int y = 0; y < ho; ++y) {
    for (int x = 0; x < wo; ++x) {
      double s = 0.0;
      for (int t = 0; t < kSsimWindow; ++t) s += k[t] * rows[static_cast<std::size_t>(y + t) * wo + x];
      out[static_cast<std::size_t>(y) * wo + x] = s;
    }
  }
  return out;
}

}  // namespace

double ssim(const Image& a, const Image& b) {
  if (a.h != b.h || a.w != b.w) throw ParamError("ssim needs same-shape images");
  if (a.h < kSsimWindow || a.w < kSsimWindow)
    throw ParamError("ssim needs images at least 11x11");
  const std::size_t n = a.px.size();
  std::vector<double> va(n), vb(n), vaa(n), vbb(n), vab(n);
  for (std::size_t i = 0; i < n; ++i) {
    va[i] = a.px[i];
    vb[i] = b.px[i];
    vaa[i] = va[i] * va[i];
    vbb[i] = vb[i] * vb[i];
    vab[i] = va[i] * vb[i];
  }
  const std::vector<double> k = ssim_kernel();
  const auto mu_a = filter_valid(va, a.h, a.w, k);
  const auto mu_b = filter_valid(vb, a.h, a.w, k);
  const auto m_aa = filter_valid(vaa, a.h, a.w, k);
  const auto m_bb = filter_valid(vbb, a.h, a.w, k);
  const auto m_ab = filter_valid(vab, a.h, a.w, k);

  const double range = 2.0;
  const double c1 = (0.01 * range) * (0.01 * range);
  const double c2 = (0.03 * range) * (0.03 * range);
  double sum = 0.0;
  for (std::size_t i = 0; i < mu_a.size(); ++i) {
    const double sa = m_aa[i] - mu_a[i] * mu_a[i];
    const double sb = m_bb[i] - mu_b[i] * mu_b[i];
    const double sab = m_ab[i] - mu_a[i] * mu_b[i];
    sum += ((2.0 * mu_a[i] * mu_b[i] + c1) * (2.0 * sab + c2)) /
           ((mu_a[i] * mu_a[i] + mu_b[i] * mu_b[i] + c1) * (sa + sb + c2));
  }
  return sum / static_cast<double>(mu_a.size());
}

PairPdf ssim_pair_pdf(const std::vector<const Image*>& a, const std::vector<const Image*>& b,
                      int n_pairs, std::uint64_t seed) {
  if (a.empty() || b.empty()) throw ParamError("pair pdf needs nonempty sets");
  if (n_pairs < 1) throw ParamError("pair pdf needs at least one pair");
  const bool can_differ = a.size() > 1 || b.size() > 1;
  rng::Stream s(seed);
  PairPdf out;
  out.samples.reserve(n_pairs);
  for (int p = 0; p < n_pairs; ++p) {
    std::size_t i = 0, j = 0;
    for (int attempt = 0; attempt < 64; ++attempt) {
      i = s.next_below(a.size());
      j = s.next_below(b.size());
      if (a[i] != b[j] || !can_differ) break;
    }
    out.samples.push_back(ssim(*a[i], *b[j]));
  }
  std::sort(out.samples.begin(), out.samples.end());

  const int bins = 200;
  const double width = 2.0 / bins;
  out.hist.assign(bins, 0.0);
  double sum = 0.0, sq = 0.0;
  for (double v : out.samples) {
    int idx = static_cast<int>(std::floor((v + 1.0) / width));
    idx = std::clamp(idx, 0, bins - 1);
    out.hist[idx] += 1.0;
    sum += v;
    sq += v * v;
  }
  const double n = static_cast<double>(out.samples.size());
  for (double& h : out.hist) h /= n * width;
  out.mean = sum / n;
  out.stddev = std::sqrt(std::max(sq / n - out.mean * out.mean, 0.0));

  double bw = 1.06 * out.stddev * std::pow(n, -0.2);
  bw = std::max(bw, 5e-3);
  out.density.assign(bins, 0.0);
  for (int g = 0; g < bins; ++g) {
    const double x = -1.0 + (g + 0.5) * width;
    double d = 0.0;
    for (double v : out.samples) {
      const double z = (x - v) / bw;
      d += std::exp(-0.5 * z * z);
    }
    out.density[g] = d / (n * bw * std::sqrt(2.0 * M_PI));
  }
  return out;
}

double ks_statistic(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.empty() || b.empty()) throw ParamError("ks statistic needs nonempty samples");
  std::vector<double> sa = a, sb = b;
  std::sort(sa.begin(), sa.end());
  std::sort(sb.begin(), sb.end());
  const double na = static_cast<double>(sa.size());
  const double nb = static_cast<double>(sb.size());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < sa.size() || j < sb.size()) {
    double v;
    if (j >= sb.size() || (i < sa.size() && sa[i] <= sb[j]))
      v = sa[i];
    else
      v = sb[j];
    while (i < sa.size() && sa[i] == v) ++i;
    while (j < sb.size() && sb[j] == v) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  return d;
}

double ks_statistic(const PairPdf& a, const PairPdf& b) {
  return ks_statistic(a.samples, b.samples);
}

void SignalParams::validate() const {
  if (!std::isfinite(amplitude)) throw ParamError("signal amplitude must be finite");
  if (!(spatial_std > 0.0)) throw ParamError("signal spatial std must be positive");
  if (patch_h < 1 || patch_w < 1) throw ParamError("patch size must be positive");
}

Image signal_image(const SignalParams& sp) {
  sp.validate();
  Image s(sp.patch_h, sp.patch_w);
  const int cy = sp.patch_h / 2;
  const int cx = sp.patch_w / 2;
  const double denom = 2.0 * sp.spatial_std * sp.spatial_std;
  for (int y = 0; y < sp.patch_h; ++y)
    for (int x = 0; x < sp.patch_w; ++x) {
      const double r2 = static_cast<double>(y - cy) * (y - cy) + static_cast<double>(x - cx) * (x - cx);
      s.at(y, x) = static_cast<float>(sp.amplitude * std::exp(-r2 / denom));
    }
  return s;
}

SkeDataset make_ske_dataset(const std::vector<const Image*>& backgrounds, const SignalParams& sp,
                            std::uint64_t seed) {
  sp.validate();
  if (backgrounds.empty()) throw ParamError("ske dataset needs at least one background");
  for (const Image* bg : backgrounds)
    if (bg->h < sp.patch_h || bg->w < sp.patch_w)
      throw ParamError("background " + std::to_string(bg->h) + "x" + std::to_string(bg->w) +
                       " is smaller than the patch");

  std::vector<std::size_t> order(backgrounds.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  rng::Stream s(seed);
  for (std::size_t i = order.size(); i > 1; --i)
    std::swap(order[i - 1], order[s.next_below(i)]);

  const Image bump = signal_image(sp);
  SkeDataset out;
  out.present.reserve(backgrounds.size());
  out.absent.reserve(backgrounds.size());
  for (std::size_t idx : order) {
    const Image& bg = *backgrounds[idx];
    const int oy = (bg.h - sp.patch_h) / 2;
    const int ox = (bg.w - sp.patch_w) / 2;
    Image absent(sp.patch_h, sp.patch_w);
    absent.tag = bg.tag;
    absent.norm = bg.norm;
    absent.provenance = bg.provenance;
    for (int y = 0; y < sp.patch_h; ++y)
      for (int x = 0; x < sp.patch_w; ++x) absent.at(y, x) = bg.at(oy + y, ox + x);
    Image present = absent;
    for (std::size_t i = 0; i < present.px.size(); ++i) present.px[i] += bump.px[i];
    out.absent.push_back(std::move(absent));
    out.present.push_back(std::move(present));
  }
  return out;
}

namespace {

Eigen::MatrixXd flatten_set(const std::vector<const Image*>& imgs, Eigen::Index expect_dim) {
  Eigen::MatrixXd x(static_cast<Eigen::Index>(imgs.size()), expect_dim);
  for (std::size_t i = 0; i < imgs.size(); ++i) {
    if (static_cast<Eigen::Index>(imgs[i]->size()) != expect_dim)
      throw ParamError("patch sizes differ across the set");
    for (Eigen::Index j = 0; j < expect_dim; ++j)
      x(static_cast<Eigen::Index>(i), j) = imgs[i]->px[static_cast<std::size_t>(j)];
  }
  return x;
}

}  // namespace

Eigen::VectorXd ho_template(const std::vector<const Image*>& train_present,
                            const std::vector<const Image*>& train_absent,
                            double regularization) {
  if (train_present.size() < 2 || train_absent.size() < 2)
    throw ParamError("hotelling template needs at least 2 images per class");
  if (!(regularization >= 0.0)) throw ParamError("regularization must be non-negative");
  const Eigen::Index dim = static_cast<Eigen::Index>(train_present[0]->size());
  const Eigen::MatrixXd p = flatten_set(train_present, dim);
  const Eigen::MatrixXd a = flatten_set(train_absent, dim);

  const Eigen::VectorXd mu_p = p.colwise().mean();
  const Eigen::VectorXd mu_a = a.colwise().mean();
  const Eigen::MatrixXd cp = p.rowwise() - mu_p.transpose();
  const Eigen::MatrixXd ca = a.rowwise() - mu_a.transpose();
  Eigen::MatrixXd sbar = (cp.adjoint() * cp) / static_cast<double>(p.rows() - 1);
  sbar += (ca.adjoint() * ca) / static_cast<double>(a.rows() - 1);
  sbar *= 0.5;
  sbar.diagonal().array() += regularization * sbar.trace() / static_cast<double>(dim);

  Eigen::LLT<Eigen::MatrixXd> llt(sbar);
  if (llt.info() != Eigen::Success)
    throw DataError("average covariance is not positive definite; increase the regularization");
  return llt.solve(mu_p - mu_a);
}

RocResult ho_roc(const Eigen::VectorXd& w, const std::vector<const Image*>& test_present,
                 const std::vector<const Image*>& test_absent) {
  if (test_present.empty() || test_absent.empty())
    throw ParamError("roc needs nonempty test sets");
  RocResult out;
  auto score = [&](const std::vector<const Image*>& imgs, std::vector<double>* t) {
    t->reserve(imgs.size());
    for (const Image* im : imgs) {
      if (static_cast<Eigen::Index>(im->size()) != w.size())
        throw ParamError("test patch size does not match the template");
      double acc = 0.0;
      for (std::size_t i = 0; i < im->px.size(); ++i)
        acc += w[static_cast<Eigen::Index>(i)] * im->px[i];
      t->push_back(acc);
    }
  };
  score(test_present, &out.t_present);
  score(test_absent, &out.t_absent);

  std::vector<double> sp = out.t_present, sa = out.t_absent;
  std::sort(sp.begin(), sp.end());
  std::sort(sa.begin(), sa.end());

  std::vector<double> all = sp;
  all.insert(all.end(), sa.begin(), sa.end());
  std::sort(all.begin(), all.end(), std::greater<>());
  all.erase(std::unique(all.begin(), all.end()), all.end());
  out.thresholds = all;

  const double np = static_cast<double>(sp.size());
  const double na = static_cast<double>(sa.size());
  out.fpf.push_back(0.0);
  out.tpf.push_back(0.0);
  for (double th : out.thresholds) {
    const auto ge = [th](const std::vector<double>& v) {
      return static_cast<double>(v.end() - std::lower_bound(v.begin(), v.end(), th));
    };
    out.tpf.push_back(ge(sp) / np);
    out.fpf.push_back(ge(sa) / na);
  }

  double u = 0.0;
  for (double t : sp) {
    const auto lo = std::lower_bound(sa.begin(), sa.end(), t);
    const auto hi = std::upper_bound(sa.begin(), sa.end(), t);
    u += static_cast<double>(lo - sa.begin()) + 0.5 * static_cast<double>(hi - lo);
  }
  out.auc = u / (np * na);
  return out;
}

void save_eval_report(const EvalReport& r, const std::filesystem::path& file) {
  json doc;
  doc["format_version"] = 1;
  doc["scalars"] = json::object();
  for (const auto& [k, v] : r.scalars) doc["scalars"][k] = v;
  doc["curves"] = json::object();
  for (const auto& [k, v] : r.curves) doc["curves"][k] = v;
  std::ofstream f(file, std::ios::trunc);
  if (!f) throw DataError("cannot write eval report: " + file.string());
  f << doc.dump(2) << "\n";
  if (!f) throw DataError("short eval report write: " + file.string());
}

EvalReport load_eval_report(const std::filesystem::path& file) {
  std::ifstream f(file);
  if (!f) throw DataError("cannot open eval report: " + file.string());
  try {
    const json doc = json::parse(f);
    detail::reject_unknown_keys(doc, {"format_version", "scalars", "curves"}, "eval report");
    if (doc.value("format_version", 1) != 1)
      throw DataError("unsupported eval report version in " + file.string());
    EvalReport r;
    if (doc.contains("scalars"))
      for (const auto& [k, v] : doc["scalars"].items()) r.scalars[k] = v.get<double>();
    if (doc.contains("curves"))
      for (const auto& [k, v] : doc["curves"].items())
        r.curves[k] = v.get<std::vector<double>>();
    return r;
  } catch (const json::exception& e) {
    throw DataError("malformed eval report " + file.string() + ": " + e.what());
  } catch (const ConfigError& e) {
    throw DataError("malformed eval report " + file.string() + ": " + e.what());
  }
}

namespace {

const std::vector<cv::Scalar>& palette() {
  static const std::vector<cv::Scalar> p = {
      cv::Scalar(180, 60, 30), cv::Scalar(40, 60, 200), cv::Scalar(40, 150, 60),
      cv::Scalar(160, 40, 160), cv::Scalar(30, 140, 180)};
  return p;
}

void draw_frame(cv::Mat& canvas, int left, int top, int right, int bottom,
                const std::string& title, const std::string& x_label, const std::string& y_label) {
  canvas.setTo(cv::Scalar(255, 255, 255));
  const cv::Scalar black(0, 0, 0);
  cv::rectangle(canvas, {left, top}, {right, bottom}, black, 1);
  cv::putText(canvas, title, {left, top - 14}, cv::FONT_HERSHEY_SIMPLEX, 0.6, black, 1,
              cv::LINE_AA);
  cv::putText(canvas, x_label, {(left + right) / 2 - 40, bottom + 40}, cv::FONT_HERSHEY_SIMPLEX,
              0.5, black, 1, cv::LINE_AA);
  cv::putText(canvas, y_label, {10, top - 14}, cv::FONT_HERSHEY_SIMPLEX, 0.5, black, 1,
              cv::LINE_AA);
}

std::string tick_label(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3g", v);
  return buf;
}

}  // namespace

void save_line_plot(const std::filesystem::path& file, const std::string& title,
                    const std::string& x_label, const std::string& y_label,
                    const std::vector<LabeledCurve>& curves, bool log_y) {
  if (curves.empty()) throw ParamError("a plot needs at least one curve");
  double xmin = 0, xmax = 0, ymin = 0, ymax = 0;
  bool first = true;
  for (const auto& c : curves) {
    if (c.xs.size() != c.ys.size()) throw ParamError("curve " + c.label + " has mismatched axes");
    for (std::size_t i = 0; i < c.xs.size(); ++i) {
      double y = c.ys[i];
      if (log_y) {
        if (y <= 0.0) continue;
        y = std::log10(y);
      }
      if (first) {
        xmin = xmax = c.xs[i];
        ymin = ymax = y;
        first = false;
      } else {
        xmin = std::min(xmin, c.xs[i]);
        xmax = std::max(xmax, c.xs[i]);
        ymin = std::min(ymin, y);
        ymax = std::max(ymax, y);
      }
    }
  }
  if (first) throw ParamError("no plottable points");
  if (xmax == xmin) xmax = xmin + 1.0;
  if (ymax == ymin) ymax = ymin + 1.0;

  const int width = 900, height = 600, left = 80, top = 50, right = width - 30,
            bottom = height - 60;
  cv::Mat canvas(height, width, CV_8UC3);
  draw_frame(canvas, left, top, right, bottom, title, x_label,
             log_y ? "log10 " + y_label : y_label);
  auto px = [&](double x) {
    return left + static_cast<int>((x - xmin) / (xmax - xmin) * (right - left));
  };
  auto py = [&](double y) {
    return bottom - static_cast<int>((y - ymin) / (ymax - ymin) * (bottom - top));
  };
  const cv::Scalar black(0, 0, 0);
  for (int t = 0; t <= 4; ++t) {
    const double xv = xmin + (xmax - xmin) * t / 4.0;
    const double yv = ymin + (ymax - ymin) * t / 4.0;
    cv::line(canvas, {px(xv), bottom}, {px(xv), bottom + 5}, black, 1);
    cv::putText(canvas, tick_label(xv), {px(xv) - 15, bottom + 22}, cv::FONT_HERSHEY_SIMPLEX, 0.4,
                black, 1, cv::LINE_AA);
    cv::line(canvas, {left - 5, py(yv)}, {left, py(yv)}, black, 1);
    cv::putText(canvas, tick_label(yv), {8, py(yv) + 4}, cv::FONT_HERSHEY_SIMPLEX, 0.4, black, 1,
                cv::LINE_AA);
  }
  for (std::size_t ci = 0; ci < curves.size(); ++ci) {
    const auto& c = curves[ci];
    const cv::Scalar color = palette()[ci % palette().size()];
    cv::Point prev;
    bool have_prev = false;
    for (std::size_t i = 0; i < c.xs.size(); ++i) {
      double y = c.ys[i];
      if (log_y) {
        if (y <= 0.0) {
          have_prev = false;
          continue;
        }
        y = std::log10(y);
      }
      const cv::Point pt(px(c.xs[i]), py(y));
      if (have_prev) cv::line(canvas, prev, pt, color, 2, cv::LINE_AA);
      prev = pt;
      have_prev = true;
    }
    cv::putText(canvas, c.label, {right - 220, top + 24 + 22 * static_cast<int>(ci)},
                cv::FONT_HERSHEY_SIMPLEX, 0.5, color, 1, cv::LINE_AA);
  }
  if (!cv::imwrite(file.string(), canvas))
    throw DataError("cannot write plot: " + file.string());
}

void save_roc_plot(const std::filesystem::path& file, const RocResult& roc) {
  const int size = 600, left = 70, top = 50, right = size - 30, bottom = size - 60;
  cv::Mat canvas(size, size, CV_8UC3);
  draw_frame(canvas, left, top, right, bottom, "ROC", "FPF", "TPF");
  auto px = [&](double x) { return left + static_cast<int>(x * (right - left)); };
  auto py = [&](double y) { return bottom - static_cast<int>(y * (bottom - top)); };
  for (int t = 0; t <= 4; ++t) {
    const double v = t / 4.0;
    cv::putText(canvas, tick_label(v), {px(v) - 12, bottom + 22}, cv::FONT_HERSHEY_SIMPLEX, 0.4,
                cv::Scalar(0, 0, 0), 1, cv::LINE_AA);
    cv::putText(canvas, tick_label(v), {8, py(v) + 4}, cv::FONT_HERSHEY_SIMPLEX, 0.4,
                cv::Scalar(0, 0, 0), 1, cv::LINE_AA);
  }
  for (double d = 0.0; d < 1.0; d += 0.05)
    cv::line(canvas, {px(d), py(d)}, {px(d + 0.025), py(d + 0.025)}, cv::Scalar(180, 180, 180), 1);
  for (std::size_t i = 1; i < roc.fpf.size(); ++i)
    cv::line(canvas, {px(roc.fpf[i - 1]), py(roc.tpf[i - 1])}, {px(roc.fpf[i]), py(roc.tpf[i])},
             palette()[0], 2, cv::LINE_AA);
  char label[64];
  std::snprintf(label, sizeof(label), "AUC = %.4f", roc.auc);
  cv::putText(canvas, label, {right - 190, bottom - 16}, cv::FONT_HERSHEY_SIMPLEX, 0.55,
              cv::Scalar(0, 0, 0), 1, cv::LINE_AA);
  if (!cv::imwrite(file.string(), canvas))
    throw DataError("cannot write plot: " + file.string());
}

}  // namespace somkit::eval

// Copyright (c) 2026, strokeseg contributors
// SPDX-License-Identifier: Apache-2.0

#include "strokeseg/preprocess.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "json.hpp"

#include "strokeseg/error.hpp"

namespace strokeseg::preprocess {
namespace {

struct AxisTaps {
  std::vector<int> lo, hi;
  std::vector<double> frac;  // weight of `hi`
};

// Sample positions c_i = (i + 0.5) * ratio - 0.5, clamped to [0, n - 1].
AxisTaps linear_taps(int n_in, int n_out, double ratio) {
  AxisTaps t;
  t.lo.resize(n_out);
  t.hi.resize(n_out);
  t.frac.resize(n_out);
  for (int i = 0; i < n_out; ++i) {
    double c = (i + 0.5) * ratio - 0.5;
    c = std::clamp(c, 0.0, static_cast<double>(n_in - 1));
    int lo = static_cast<int>(std::floor(c));
    lo = std::min(lo, n_in - 1);
    t.lo[i] = lo;
    t.hi[i] = std::min(lo + 1, n_in - 1);
    t.frac[i] = c - lo;
  }
  return t;
}

std::vector<int> nearest_taps(int n_in, int n_out, double ratio) {
  std::vector<int> idx(n_out);
  for (int i = 0; i < n_out; ++i) {
    const double c = (i + 0.5) * ratio - 0.5;
    idx[i] = std::clamp(static_cast<int>(std::floor(c + 0.5)), 0, n_in - 1);
  }
  return idx;
}

double lerp(double a, double b, double t) { return a + t * (b - a); }

Volume regrid(const Volume& v, const Index3& out_shape, const Real3& ratio, Interp interp) {
  Geometry g;
  g.shape = out_shape;
  for (int a = 0; a < 3; ++a) {
    g.spacing[a] = v.spacing()[a] * ratio[a];
    g.origin[a] = v.origin()[a] + 0.5 * (g.spacing[a] - v.spacing()[a]);
  }
  Volume out(g);
  const auto& in_shape = v.shape();
  if (interp == Interp::kNearest) {
    const auto ix = nearest_taps(in_shape[0], out_shape[0], ratio[0]);
    const auto iy = nearest_taps(in_shape[1], out_shape[1], ratio[1]);
    const auto iz = nearest_taps(in_shape[2], out_shape[2], ratio[2]);
    for (int z = 0; z < out_shape[2]; ++z)
      for (int y = 0; y < out_shape[1]; ++y)
        for (int x = 0; x < out_shape[0]; ++x) out.at(x, y, z) = v.at(ix[x], iy[y], iz[z]);
    return out;
  }
  const AxisTaps tx = linear_taps(in_shape[0], out_shape[0], ratio[0]);
  const AxisTaps ty = linear_taps(in_shape[1], out_shape[1], ratio[1]);
  const AxisTaps tz = linear_taps(in_shape[2], out_shape[2], ratio[2]);
  for (int z = 0; z < out_shape[2]; ++z) {
    for (int y = 0; y < out_shape[1]; ++y) {
      for (int x = 0; x < out_shape[0]; ++x) {
        auto sample = [&](int yy, int zz) {
          return lerp(v.at(tx.lo[x], yy, zz), v.at(tx.hi[x], yy, zz), tx.frac[x]);
        };
        const double c0 = lerp(sample(ty.lo[y], tz.lo[z]), sample(ty.hi[y], tz.lo[z]), ty.frac[y]);
        const double c1 = lerp(sample(ty.lo[y], tz.hi[z]), sample(ty.hi[y], tz.hi[z]), ty.frac[y]);
        out.at(x, y, z) = lerp(c0, c1, tz.frac[z]);
      }
    }
  }
  return out;
}

int round_half_away(double x) { return static_cast<int>(x < 0 ? std::ceil(x - 0.5) : std::floor(x + 0.5)); }

// Mirror ("reflect", half-sample symmetric) index into [0, n).
int reflect_index(int i, int n) {
  const int period = 2 * n;
  int j = i % period;
  if (j < 0) j += period;
  return j < n ? j : period - 1 - j;
}

// n x n operator equivalent to convolving a line with a truncated Gaussian
// under reflect boundary handling.
Eigen::MatrixXd folded_gaussian(int n, double sigma_vox) {
  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(n, n);
  const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma_vox)));
  std::vector<double> taps(2 * radius + 1);
  double sum = 0.0;
  for (int t = -radius; t <= radius; ++t) {
    taps[t + radius] = std::exp(-0.5 * (t * t) / (sigma_vox * sigma_vox));
    sum += taps[t + radius];
  }
  for (double& t : taps) t /= sum;
  for (int i = 0; i < n; ++i) {
    for (int t = -radius; t <= radius; ++t) w(i, reflect_index(i + t, n)) += taps[t + radius];
  }
  return w;
}

using ColMajorMap = Eigen::Map<Eigen::MatrixXd>;

void smooth_axis(std::vector<double>& data, const Index3& shape, int axis, const Eigen::MatrixXd& w) {
  const Eigen::Index nx = shape[0], ny = shape[1], nz = shape[2];
  if (axis == 0) {
    ColMajorMap m(data.data(), nx, ny * nz);
    Eigen::MatrixXd r = w * m;
    m = r;
  } else if (axis == 1) {
    for (Eigen::Index z = 0; z < nz; ++z) {
      ColMajorMap m(data.data() + z * nx * ny, nx, ny);
      Eigen::MatrixXd r = m * w.transpose();
      m = r;
    }
  } else {
    ColMajorMap m(data.data(), nx * ny, nz);
    Eigen::MatrixXd r = m * w.transpose();
    m = r;
  }
}

void gaussian_smooth(std::vector<double>& data, const Geometry& g, double sigma_mm) {
  for (int a = 0; a < 3; ++a) {
    if (g.shape[a] == 1) continue;
    smooth_axis(data, g.shape, a, folded_gaussian(g.shape[a], sigma_mm / g.spacing[a]));
  }
}

using Mat3 = std::array<std::array<double, 3>, 3>;

Mat3 matmul(const Mat3& a, const Mat3& b) {
  Mat3 r{};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      for (int k = 0; k < 3; ++k) r[i][j] += a[i][k] * b[k][j];
  return r;
}

Mat3 rotation(int axis, double radians) {
  const double c = std::cos(radians), s = std::sin(radians);
  Mat3 r{};
  const int i = (axis + 1) % 3, j = (axis + 2) % 3;
  r[axis][axis] = 1.0;
  r[i][i] = c;
  r[i][j] = -s;
  r[j][i] = s;
  r[j][j] = c;
  return r;
}

double sample_linear_zero(const Volume& v, double cx, double cy, double cz) {
  const auto& n = v.shape();
  constexpr double kTol = 1e-9;
  const double c[3] = {cx, cy, cz};
  int lo[3], hi[3];
  double f[3];
  for (int a = 0; a < 3; ++a) {
    if (c[a] < -kTol || c[a] > n[a] - 1 + kTol) return 0.0;
    const double cc = std::clamp(c[a], 0.0, static_cast<double>(n[a] - 1));
    lo[a] = std::min(static_cast<int>(std::floor(cc)), n[a] - 1);
    hi[a] = std::min(lo[a] + 1, n[a] - 1);
    f[a] = cc - lo[a];
  }
  auto row = [&](int y, int z) { return lerp(v.at(lo[0], y, z), v.at(hi[0], y, z), f[0]); };
  const double c0 = lerp(row(lo[1], lo[2]), row(hi[1], lo[2]), f[1]);
  const double c1 = lerp(row(lo[1], hi[2]), row(hi[1], hi[2]), f[1]);
  return lerp(c0, c1, f[2]);
}

std::uint8_t sample_nearest_zero(const Mask& m, double cx, double cy, double cz) {
  const auto& n = m.shape();
  const double c[3] = {cx, cy, cz};
  int idx[3];
  for (int a = 0; a < 3; ++a) {
    idx[a] = static_cast<int>(std::floor(c[a] + 0.5));
    if (idx[a] < 0 || idx[a] >= n[a]) return 0;
  }
  return m.at(idx[0], idx[1], idx[2]);
}

template <typename F>
Subject run_stage(const std::string& name, std::vector<std::string>& trace, F&& f) {
  try {
    Subject s = f();
    trace.push_back(name);
    return s;
  } catch (const Error& e) {
    rethrow_with_stage(e, "stage '" + name + "'");
  }
}

}  // namespace

const char* to_string(PipelineMode mode) {
  return mode == PipelineMode::kComprehensive ? "comprehensive" : "basic";
}

PipelineMode parse_pipeline_mode(const std::string& s) {
  if (s == "comprehensive") return PipelineMode::kComprehensive;
  if (s == "basic") return PipelineMode::kBasic;
  throw Error(ErrorCode::kInvalidArgument, "unknown pipeline mode '" + s + "'");
}

void BiasCorrectionConfig::validate() const {
  if (max_iterations < 1) throw Error(ErrorCode::kInvalidArgument, "bias max_iterations must be >= 1");
  if (!(smoothing_scale_mm > 0)) throw Error(ErrorCode::kInvalidArgument, "bias smoothing_scale_mm must be > 0");
  if (!(convergence_tol > 0)) throw Error(ErrorCode::kInvalidArgument, "bias convergence_tol must be > 0");
  if (!(epsilon > 0)) throw Error(ErrorCode::kInvalidArgument, "bias epsilon must be > 0");
  if (!(outlier_threshold > 0)) throw Error(ErrorCode::kInvalidArgument, "bias outlier_threshold must be > 0");
}

void AugmentationConfig::validate() const {
  if (!(flip_probability_per_axis >= 0 && flip_probability_per_axis <= 1)) {
    throw Error(ErrorCode::kInvalidArgument, "flip probability must lie in [0, 1]");
  }
  if (!(max_rotation_degrees >= 0)) throw Error(ErrorCode::kInvalidArgument, "max rotation must be >= 0");
  if (!(affine_scale_range.first > 0 && affine_scale_range.first <= affine_scale_range.second)) {
    throw Error(ErrorCode::kInvalidArgument, "affine scale range must satisfy 0 < lo <= hi");
  }
  if (!(affine_translation_mm >= 0)) throw Error(ErrorCode::kInvalidArgument, "translation must be >= 0");
}

void PipelineConfig::validate() const {
  for (int a = 0; a < 3; ++a) {
    if (target_shape[a] < 8) throw Error(ErrorCode::kInvalidArgument, "target_shape components must be >= 8");
    if (!(target_spacing[a] > 0)) throw Error(ErrorCode::kInvalidArgument, "target_spacing components must be > 0");
  }
  bias_correction.validate();
  augmentation.validate();
}

Volume resample(const Volume& v, const Real3& target_spacing, Interp interp) {
  Index3 shape{};
  Real3 ratio{};
  for (int a = 0; a < 3; ++a) {
    if (!(target_spacing[a] > 0) || !std::isfinite(target_spacing[a])) {
      throw Error(ErrorCode::kInvalidArgument, "resample: target spacing must be positive");
    }
    shape[a] = std::max(1, round_half_away(v.shape()[a] * v.spacing()[a] / target_spacing[a]));
    ratio[a] = target_spacing[a] / v.spacing()[a];
  }
  Volume out = regrid(v, shape, ratio, interp);
  Geometry g = out.geometry();
  g.spacing = target_spacing;
  return Volume(g, std::vector<double>(out.values().begin(), out.values().end()));
}

Mask resample(const Mask& m, const Real3& target_spacing) {
  return Mask::from_volume(resample(m.to_volume(), target_spacing, Interp::kNearest));
}

Volume resize(const Volume& v, const Index3& target_shape, Interp interp) {
  Real3 ratio{};
  for (int a = 0; a < 3; ++a) {
    if (target_shape[a] < 1) throw Error(ErrorCode::kInvalidArgument, "resize: target shape must be positive");
    ratio[a] = static_cast<double>(v.shape()[a]) / target_shape[a];
  }
  return regrid(v, target_shape, ratio, interp);
}

Mask resize(const Mask& m, const Index3& target_shape) {
  return Mask::from_volume(resize(m.to_volume(), target_shape, Interp::kNearest));
}

namespace {

double median_of(std::vector<double>& x) {
  const auto mid = x.begin() + static_cast<std::ptrdiff_t>(x.size() / 2);
  std::nth_element(x.begin(), mid, x.end());
  return *mid;
}

// Two-class Otsu threshold on a 256-bin histogram; returns the upper edge of
// the lower class, or 0 when all values are equal.
double otsu_threshold(const Volume& v) {
  const VolumeStats st = volume_stats(v);
  if (!(st.max > st.min)) return 0.0;
  constexpr int kBins = 256;
  const double width = (st.max - st.min) / kBins;
  std::vector<double> hist(kBins, 0.0);
  for (double x : v.values()) hist[std::min(kBins - 1, static_cast<int>((x - st.min) / width))] += 1.0;
  double total = 0.0, sum = 0.0;
  for (int b = 0; b < kBins; ++b) {
    total += hist[b];
    sum += b * hist[b];
  }
  double w0 = 0.0, sum0 = 0.0, best = -1.0;
  int cut = 0;
  for (int b = 0; b < kBins - 1; ++b) {
    w0 += hist[b];
    sum0 += b * hist[b];
    const double w1 = total - w0;
    if (w0 == 0.0 || w1 == 0.0) continue;
    const double d = sum0 / w0 - (sum - sum0) / w1;
    const double between = w0 * w1 * d * d;
    if (between > best) {
      best = between;
      cut = b;
    }
  }
  return st.min + (cut + 1) * width;
}

}  // namespace

BiasCorrectionResult bias_field_correct(const Volume& v, const BiasCorrectionConfig& cfg) {
  cfg.validate();
  const std::size_t n = v.size();
  std::vector<double> fg(n, 0.0);
  std::vector<double> u(n, 0.0);
  std::size_t fg_count = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::isfinite(v[i])) throw Error(ErrorCode::kNonFinite, "bias_field_correct: non-finite intensity");
    if (v[i] < 0) throw Error(ErrorCode::kInvalidArgument, "bias_field_correct: negative intensity");
  }
  const double floor = cfg.otsu_mask ? std::max(cfg.epsilon, otsu_threshold(v)) : cfg.epsilon;
  for (std::size_t i = 0; i < n; ++i) {
    const double x = v[i];
    if (x > floor) {
      fg[i] = 1.0;
      u[i] = std::log(x + cfg.epsilon);
      ++fg_count;
    }
  }
  if (fg_count == 0) throw Error(ErrorCode::kDegenerateInput, "bias_field_correct: degenerate input (no voxel above epsilon)");

  // The smoothing scale is a full width at half maximum.
  const double sigma_mm = cfg.smoothing_scale_mm / (2.0 * std::sqrt(2.0 * std::log(2.0)));

  // Voxels far from the dominant tissue intensity (lesions, vessels) would
  // drag the low-pass estimate; each pass fits the field to the inliers only
  // and extends it into the rejected voxels by normalized smoothing.
  std::vector<double> weight(n), support(n), smooth(n), log_field(n, 0.0), scratch;
  scratch.reserve(fg_count);
  BiasCorrectionResult result;
  for (int it = 0; it < cfg.max_iterations; ++it) {
    scratch.clear();
    for (std::size_t i = 0; i < n; ++i)
      if (fg[i] > 0) scratch.push_back(u[i]);
    const double center = median_of(scratch);
    for (double& x : scratch) x = std::abs(x - center);
    const double spread = std::max(1.4826 * median_of(scratch), 1e-3);
    for (std::size_t i = 0; i < n; ++i) {
      weight[i] = fg[i] > 0 && std::abs(u[i] - center) <= cfg.outlier_threshold * spread ? 1.0 : 0.0;
      support[i] = weight[i];
      smooth[i] = u[i] * weight[i];
    }
    gaussian_smooth(support, v.geometry(), sigma_mm);
    gaussian_smooth(smooth, v.geometry(), sigma_mm);
    double max_update = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double s = support[i] > 1e-12 ? smooth[i] / support[i] : 0.0;
      log_field[i] += s;
      if (fg[i] > 0) {
        u[i] -= s;
        max_update = std::max(max_update, std::abs(s - center));
      }
    }
    // The constant part of the update is irrelevant (the field is rescaled
    // to unit mean below), so convergence looks at its variation only.
    result.iterations = it + 1;
    if (it > 0 && max_update < cfg.convergence_tol) {
      result.converged = true;
      break;
    }
  }

  std::vector<double> field(n);
  double mean_fg = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    field[i] = std::exp(log_field[i]);
    if (fg[i] > 0) mean_fg += field[i];
  }
  mean_fg /= static_cast<double>(fg_count);
  std::vector<double> corrected(n);
  for (std::size_t i = 0; i < n; ++i) {
    field[i] /= mean_fg;
    corrected[i] = v[i] / field[i];
  }
  result.corrected = Volume(v.geometry(), std::move(corrected));
  result.field = Volume(v.geometry(), std::move(field));
  return result;
}

Volume normalize_intensity(const Volume& v) {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (double x : v.values()) {
    if (std::isnan(x)) throw Error(ErrorCode::kNonFinite, "normalize_intensity: NaN voxel");
    lo = std::min(lo, x);
    hi = std::max(hi, x);
  }
  Volume out(v.geometry(), 0.0);
  if (!(hi > lo)) return out;
  const double range = hi - lo;
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = std::clamp((v[i] - lo) / range, 0.0, 1.0);
  return out;
}

Volume flip(const Volume& v, int axis) {
  if (axis < 0 || axis > 2) throw Error(ErrorCode::kInvalidArgument, "flip: axis must be 0, 1 or 2");
  Volume out(v.geometry());
  const auto& n = v.shape();
  for (int z = 0; z < n[2]; ++z)
    for (int y = 0; y < n[1]; ++y)
      for (int x = 0; x < n[0]; ++x) {
        Index3 src{x, y, z};
        src[axis] = n[axis] - 1 - src[axis];
        out.at(x, y, z) = v.at(src[0], src[1], src[2]);
      }
  return out;
}

AugmentResult augment(const Volume& image, const Mask& mask, const AugmentationConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  if (!same_geometry(image.geometry(), mask.geometry())) {
    throw Error(ErrorCode::kGeometryMismatch, "augment: image and mask geometry differ");
  }
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::array<bool, 3> flips{};
  for (bool& f : flips) f = unit(rng) < cfg.flip_probability_per_axis;
  const double max_rad = cfg.max_rotation_degrees * std::numbers::pi / 180.0;
  std::array<double, 3> angles{};
  for (double& a : angles) a = (2.0 * unit(rng) - 1.0) * max_rad;
  const auto [s_lo, s_hi] = cfg.affine_scale_range;
  const double scale = s_lo + unit(rng) * (s_hi - s_lo);
  std::array<double, 3> shift{};
  for (double& t : shift) t = (2.0 * unit(rng) - 1.0) * cfg.affine_translation_mm;

  const auto& n = image.shape();
  const auto& sp = image.spacing();
  const bool pure_flip = angles == std::array<double, 3>{} && scale == 1.0 && shift == std::array<double, 3>{};

  Volume out_img(image.geometry());
  Mask out_mask(mask.geometry());
  if (pure_flip) {
    for (int z = 0; z < n[2]; ++z)
      for (int y = 0; y < n[1]; ++y)
        for (int x = 0; x < n[0]; ++x) {
          Index3 src{x, y, z};
          for (int a = 0; a < 3; ++a)
            if (flips[a]) src[a] = n[a] - 1 - src[a];
          out_img.at(x, y, z) = image.at(src[0], src[1], src[2]);
          out_mask.set(x, y, z, mask.at(src[0], src[1], src[2]) != 0);
        }
    return {std::move(out_img), std::move(out_mask)};
  }

  // Output -> input mapping about the grid center, in mm:
  // p_in = R^T (p_out - t) / scale, followed by the index flips.
  const Mat3 r = matmul(rotation(2, angles[2]), matmul(rotation(1, angles[1]), rotation(0, angles[0])));
  Real3 center{};
  for (int a = 0; a < 3; ++a) center[a] = 0.5 * (n[a] - 1);
  for (int z = 0; z < n[2]; ++z)
    for (int y = 0; y < n[1]; ++y)
      for (int x = 0; x < n[0]; ++x) {
        const double p[3] = {(x - center[0]) * sp[0] - shift[0], (y - center[1]) * sp[1] - shift[1],
                             (z - center[2]) * sp[2] - shift[2]};
        double c[3];
        for (int a = 0; a < 3; ++a) {
          const double q = (r[0][a] * p[0] + r[1][a] * p[1] + r[2][a] * p[2]) / scale;
          c[a] = q / sp[a] + center[a];
          if (flips[a]) c[a] = (n[a] - 1) - c[a];
        }
        out_img.at(x, y, z) = sample_linear_zero(image, c[0], c[1], c[2]);
        out_mask.set(x, y, z, sample_nearest_zero(mask, c[0], c[1], c[2]) != 0);
      }
  return {std::move(out_img), std::move(out_mask)};
}

std::vector<std::string> canonical_stages(const PipelineConfig& cfg) {
  std::vector<std::string> stages;
  if (cfg.mode == PipelineMode::kComprehensive) {
    stages = {"replace_nans_with_zero", "resample", "bias_field_correct", "normalize_intensity", "resize"};
  } else {
    stages = {"replace_nans_with_zero", "normalize_intensity", "resize"};
  }
  if (cfg.augment_enabled) stages.emplace_back("augment");
  return stages;
}

PipelineResult run_pipeline(const Subject& s, const PipelineConfig& cfg) {
  cfg.validate();
  check_subject(s);
  PipelineResult result;
  auto& trace = result.trace;
  Subject cur = s;
  for (const std::string& stage : canonical_stages(cfg)) {
    if (stage == "replace_nans_with_zero") {
      cur = run_stage(stage, trace, [&] {
        Subject next = cur;
        next.image = replace_nans_with_zero(cur.image);
        return next;
      });
    } else if (stage == "resample") {
      cur = run_stage(stage, trace, [&] {
        Subject next = cur;
        next.image = resample(cur.image, cfg.target_spacing, Interp::kLinear);
        if (cur.mask) next.mask = resample(*cur.mask, cfg.target_spacing);
        return next;
      });
    } else if (stage == "bias_field_correct") {
      cur = run_stage(stage, trace, [&] {
        Subject next = cur;
        Volume img = cur.image;
        // Negative values are background noise. Shifting the whole image
        // instead would add an offset the multiplicative model cannot remove.
        for (double& x : img.values()) x = std::max(x, 0.0);
        next.image = bias_field_correct(img, cfg.bias_correction).corrected;
        return next;
      });
    } else if (stage == "normalize_intensity") {
      cur = run_stage(stage, trace, [&] {
        Subject next = cur;
        next.image = normalize_intensity(cur.image);
        return next;
      });
    } else if (stage == "resize") {
      cur = run_stage(stage, trace, [&] {
        Subject next = cur;
        next.image = resize(cur.image, cfg.target_shape, Interp::kLinear);
        if (cur.mask) next.mask = resize(*cur.mask, cfg.target_shape);
        return next;
      });
    } else if (stage == "augment") {
      cur = run_stage(stage, trace, [&] {
        Subject next = cur;
        const Mask m = cur.mask ? *cur.mask : Mask(cur.image.geometry());
        auto aug = augment(cur.image, m, cfg.augmentation, cfg.augment_seed);
        next.image = std::move(aug.image);
        if (cur.mask) next.mask = std::move(aug.mask);
        return next;
      });
    }
  }
  result.subject = std::move(cur);
  return result;
}

std::string trace_to_json_lines(const std::string& subject_id, const std::vector<std::string>& trace) {
  std::string out;
  for (std::size_t i = 0; i < trace.size(); ++i) {
    const nlohmann::json line = {{"subject", subject_id}, {"step", i}, {"stage", trace[i]}};
    out += line.dump() + "\n";
  }
  return out;
}

double coefficient_of_variation(const Volume& v, const Mask& region) {
  double sum = 0.0, sq = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!region[i]) continue;
    sum += v[i];
    sq += v[i] * v[i];
    ++n;
  }
  if (n == 0) throw Error(ErrorCode::kInvalidArgument, "coefficient_of_variation: empty region");
  const double mean = sum / n;
  const double var = std::max(0.0, sq / n - mean * mean);
  return std::sqrt(var) / mean;
}

}  // namespace strokeseg::preprocess

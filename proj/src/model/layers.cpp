// Copyright (c) 2026, strokeseg contributors
// SPDX-License-Identifier: Apache-2.0

#include "strokeseg/nn/layers.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstring>

#include "strokeseg/error.hpp"

namespace strokeseg::nn {
namespace {

using Mat = Eigen::MatrixXd;
using MapM = Eigen::Map<Mat>;
using CMapM = Eigen::Map<const Mat>;
using SMapM = Eigen::Map<Mat, 0, Eigen::OuterStride<>>;
using CSMapM = Eigen::Map<const Mat, 0, Eigen::OuterStride<>>;

void normal_fill(Tensor& t, double stddev, std::mt19937_64& rng) {
  std::normal_distribution<double> d(0.0, stddev);
  for (double& v : t.values()) v = d(rng);
}

void require_channels(const Tensor& x, std::int64_t c, const char* layer) {
  const FeatureShape s = feature_shape(x);
  if (s.c != c) {
    throw Error(ErrorCode::kShapeMismatch, std::string(layer) + ": expected " + std::to_string(c) +
                                               " channels, got " + x.shape_string());
  }
}

// Lowers one output z-slice of a same-padded convolution into colT
// (XY rows, Cin*k^3 columns, column-major).
void im2col_slice(const double* x, const FeatureShape& s, int k, std::int64_t z, double* col) {
  const int p = k / 2;
  const std::int64_t X = s.x, Y = s.y, Z = s.z, XY = X * Y, S = XY * Z;
  const std::int64_t k3 = static_cast<std::int64_t>(k) * k * k;
  for (std::int64_t ci = 0; ci < s.c; ++ci) {
    for (int dz = 0; dz < k; ++dz) {
      const std::int64_t zz = z + dz - p;
      for (int dy = 0; dy < k; ++dy) {
        for (int dx = 0; dx < k; ++dx) {
          double* c = col + (ci * k3 + (dz * k + dy) * k + dx) * XY;
          if (zz < 0 || zz >= Z) {
            std::fill(c, c + XY, 0.0);
            continue;
          }
          const std::int64_t x0 = std::max<std::int64_t>(0, p - dx);
          const std::int64_t x1 = std::min<std::int64_t>(X, X + p - dx);
          for (std::int64_t y = 0; y < Y; ++y) {
            double* row = c + y * X;
            const std::int64_t yy = y + dy - p;
            if (yy < 0 || yy >= Y || x1 <= x0) {
              std::fill(row, row + X, 0.0);
              continue;
            }
            const double* src = x + ci * S + zz * XY + yy * X + (dx - p);
            std::fill(row, row + x0, 0.0);
            std::memcpy(row + x0, src + x0, sizeof(double) * (x1 - x0));
            std::fill(row + x1, row + X, 0.0);
          }
        }
      }
    }
  }
}

// out (Cout maps of S) = conv(x, wt) for one sample; wt is (Cin*k^3 x Cout).
void conv_sample(const double* x, const FeatureShape& s, int k, const CMapM& wt, double* out,
                 AlignedBuffer& col) {
  const std::int64_t XY = s.x * s.y, S = XY * s.z, cout = wt.cols();
  if (k == 1) {
    CMapM xm(x, S, s.c);
    MapM om(out, S, cout);
    om.noalias() = xm * wt;
    return;
  }
  col.resize(static_cast<std::size_t>(XY * wt.rows()));
  for (std::int64_t z = 0; z < s.z; ++z) {
    im2col_slice(x, s, k, z, col.data());
    CMapM cm(col.data(), XY, wt.rows());
    SMapM om(out + z * XY, XY, cout, Eigen::OuterStride<>(S));
    om.noalias() = cm * wt;
  }
}

}  // namespace

// ---------------------------------------------------------------- Conv3d

Conv3d::Conv3d(ModelParams& store, const std::string& name, std::int64_t cin, std::int64_t cout,
               int k, bool bias, std::mt19937_64& init)
    : cin_(cin), cout_(cout), k_(k) {
  if (k < 1 || k % 2 == 0) throw Error(ErrorCode::kInvalidArgument, name + ": kernel size must be odd");
  Tensor w({cout, cin, k, k, k});
  normal_fill(w, std::sqrt(2.0 / static_cast<double>(cin * k * k * k)), init);
  w_ = store.add(name + ".weight", std::move(w));
  if (bias) b_ = store.add(name + ".bias", Tensor({cout}));
}

Tensor Conv3d::forward(const Tensor& x) {
  require_channels(x, cin_, "conv3d");
  const FeatureShape s = feature_shape(x);
  x_ = x;
  FeatureShape so = s;
  so.c = cout_;
  Tensor out = make_feature_map(so);
  const std::int64_t K = cin_ * k_ * k_ * k_, S = s.spatial();
  CMapM wt(w_->value.data(), K, cout_);
  AlignedBuffer col;
  for (std::int64_t n = 0; n < s.n; ++n) {
    double* o = out.data() + n * cout_ * S;
    conv_sample(x.data() + n * cin_ * S, s, k_, wt, o, col);
    if (b_) {
      for (std::int64_t c = 0; c < cout_; ++c) {
        const double b = b_->value[c];
        for (std::int64_t i = 0; i < S; ++i) o[c * S + i] += b;
      }
    }
  }
  return out;
}

Tensor Conv3d::backward(const Tensor& dy) {
  const FeatureShape s = feature_shape(x_);
  const std::int64_t K = cin_ * k_ * k_ * k_, S = s.spatial(), XY = s.x * s.y;
  const std::int64_t k3 = static_cast<std::int64_t>(k_) * k_ * k_;
  MapM dwt(w_->gradient().data(), K, cout_);
  AlignedBuffer col;
  FeatureShape sdy = s;
  sdy.c = cout_;

  // Flipped, transposed kernel: the input gradient is a same-padded
  // convolution of dy with it.
  AlignedBuffer wf(static_cast<std::size_t>(cout_ * k3 * cin_));
  const double* w = w_->value.data();
  for (std::int64_t co = 0; co < cout_; ++co)
    for (std::int64_t ci = 0; ci < cin_; ++ci)
      for (std::int64_t kk = 0; kk < k3; ++kk)
        wf[static_cast<std::size_t>(ci * cout_ * k3 + co * k3 + (k3 - 1 - kk))] = w[(co * cin_ + ci) * k3 + kk];
  CMapM wft(wf.data(), cout_ * k3, cin_);

  Tensor dx = Tensor::zeros_like(x_);
  for (std::int64_t n = 0; n < s.n; ++n) {
    const double* xs = x_.data() + n * cin_ * S;
    const double* g = dy.data() + n * cout_ * S;
    if (k_ == 1) {
      CMapM xm(xs, S, cin_);
      CMapM gm(g, S, cout_);
      dwt.noalias() += xm.transpose() * gm;
    } else {
      col.resize(static_cast<std::size_t>(XY * K));
      for (std::int64_t z = 0; z < s.z; ++z) {
        im2col_slice(xs, s, k_, z, col.data());
        CMapM cm(col.data(), XY, K);
        CSMapM gm(g + z * XY, XY, cout_, Eigen::OuterStride<>(S));
        dwt.noalias() += cm.transpose() * gm;
      }
    }
    conv_sample(g, sdy, k_, wft, dx.data() + n * cin_ * S, col);
    if (b_) {
      double* db = b_->gradient().data();
      for (std::int64_t c = 0; c < cout_; ++c) {
        double acc = 0.0;
        for (std::int64_t i = 0; i < S; ++i) acc += g[c * S + i];
        db[c] += acc;
      }
    }
  }
  return dx;
}

// ---------------------------------------------------------------- PatchDown

PatchDown::PatchDown(ModelParams& store, const std::string& name, std::int64_t cin, std::int64_t cout,
                     std::mt19937_64& init)
    : cin_(cin), cout_(cout) {
  Tensor w({cout, cin, 2, 2, 2});
  normal_fill(w, std::sqrt(2.0 / static_cast<double>(cin * 8)), init);
  w_ = store.add(name + ".weight", std::move(w));
  b_ = store.add(name + ".bias", Tensor({cout}));
}

Tensor PatchDown::forward(const Tensor& x) {
  require_channels(x, cin_, "patch_down");
  const FeatureShape s = feature_shape(x);
  if (s.x % 2 || s.y % 2 || s.z % 2) {
    throw Error(ErrorCode::kShapeMismatch, "patch_down: spatial dims must be even, got " + x.shape_string());
  }
  in_shape_ = s;
  const FeatureShape so{s.n, cout_, s.x / 2, s.y / 2, s.z / 2};
  const std::int64_t S = s.spatial(), So = so.spatial(), K = cin_ * 8;
  gathered_ = Tensor({s.n, K, So});
  Tensor out = make_feature_map(so);
  CMapM wt(w_->value.data(), K, cout_);
  for (std::int64_t n = 0; n < s.n; ++n) {
    double* g = gathered_.data() + n * K * So;
    const double* xs = x.data() + n * cin_ * S;
    for (std::int64_t ci = 0; ci < cin_; ++ci)
      for (int d = 0; d < 8; ++d) {
        const int dz = d >> 2, dy = (d >> 1) & 1, dx = d & 1;
        double* col = g + (ci * 8 + d) * So;
        for (std::int64_t z = 0; z < so.z; ++z)
          for (std::int64_t y = 0; y < so.y; ++y) {
            const double* src = xs + ci * S + ((2 * z + dz) * s.y + 2 * y + dy) * s.x + dx;
            double* dst = col + (z * so.y + y) * so.x;
            for (std::int64_t xx = 0; xx < so.x; ++xx) dst[xx] = src[2 * xx];
          }
      }
    MapM om(out.data() + n * cout_ * So, So, cout_);
    om.noalias() = CMapM(g, So, K) * wt;
    for (std::int64_t c = 0; c < cout_; ++c) om.col(c).array() += b_->value[c];
  }
  return out;
}

Tensor PatchDown::backward(const Tensor& dy) {
  const FeatureShape s = in_shape_;
  const std::int64_t S = s.spatial(), So = S / 8, K = cin_ * 8;
  const std::int64_t ox = s.x / 2, oy = s.y / 2, oz = s.z / 2;
  CMapM wt(w_->value.data(), K, cout_);
  MapM dwt(w_->gradient().data(), K, cout_);
  double* db = b_->gradient().data();
  Tensor dx = make_feature_map(s);
  Mat dg(So, K);
  for (std::int64_t n = 0; n < s.n; ++n) {
    CMapM gm(dy.data() + n * cout_ * So, So, cout_);
    dwt.noalias() += CMapM(gathered_.data() + n * K * So, So, K).transpose() * gm;
    for (std::int64_t c = 0; c < cout_; ++c) db[c] += gm.col(c).sum();
    dg.noalias() = gm * wt.transpose();
    double* dxs = dx.data() + n * cin_ * S;
    for (std::int64_t ci = 0; ci < cin_; ++ci)
      for (int d = 0; d < 8; ++d) {
        const int dz = d >> 2, dyy = (d >> 1) & 1, dxx = d & 1;
        const double* col = dg.data() + (ci * 8 + d) * So;
        for (std::int64_t z = 0; z < oz; ++z)
          for (std::int64_t y = 0; y < oy; ++y) {
            double* dst = dxs + ci * S + ((2 * z + dz) * s.y + 2 * y + dyy) * s.x + dxx;
            const double* src = col + (z * oy + y) * ox;
            for (std::int64_t xx = 0; xx < ox; ++xx) dst[2 * xx] = src[xx];
          }
      }
  }
  return dx;
}

// ---------------------------------------------------------------- PatchUp

PatchUp::PatchUp(ModelParams& store, const std::string& name, std::int64_t cin, std::int64_t cout,
                 std::mt19937_64& init)
    : cin_(cin), cout_(cout) {
  Tensor w({cin, cout, 2, 2, 2});
  normal_fill(w, std::sqrt(2.0 / static_cast<double>(cin)), init);
  w_ = store.add(name + ".weight", std::move(w));
  b_ = store.add(name + ".bias", Tensor({cout}));
}

Tensor PatchUp::forward(const Tensor& x) {
  require_channels(x, cin_, "patch_up");
  const FeatureShape s = feature_shape(x);
  x_ = x;
  const FeatureShape so{s.n, cout_, 2 * s.x, 2 * s.y, 2 * s.z};
  const std::int64_t S = s.spatial(), So = so.spatial();
  Tensor out = make_feature_map(so);
  CMapM m(w_->value.data(), cout_ * 8, cin_);
  Mat ym(S, cout_ * 8);
  for (std::int64_t n = 0; n < s.n; ++n) {
    ym.noalias() = CMapM(x.data() + n * cin_ * S, S, cin_) * m.transpose();
    double* os = out.data() + n * cout_ * So;
    for (std::int64_t co = 0; co < cout_; ++co) {
      const double b = b_->value[co];
      for (int d = 0; d < 8; ++d) {
        const int dz = d >> 2, dy = (d >> 1) & 1, dx = d & 1;
        const double* col = ym.data() + (co * 8 + d) * S;
        for (std::int64_t z = 0; z < s.z; ++z)
          for (std::int64_t y = 0; y < s.y; ++y) {
            double* dst = os + co * So + ((2 * z + dz) * so.y + 2 * y + dy) * so.x + dx;
            const double* src = col + (z * s.y + y) * s.x;
            for (std::int64_t xx = 0; xx < s.x; ++xx) dst[2 * xx] = src[xx] + b;
          }
      }
    }
  }
  return out;
}

Tensor PatchUp::backward(const Tensor& dy) {
  const FeatureShape s = feature_shape(x_);
  const std::int64_t S = s.spatial(), So = 8 * S;
  const std::int64_t ux = 2 * s.x, uy = 2 * s.y;
  CMapM m(w_->value.data(), cout_ * 8, cin_);
  MapM dm(w_->gradient().data(), cout_ * 8, cin_);
  double* db = b_->gradient().data();
  Tensor dx = Tensor::zeros_like(x_);
  Mat dym(S, cout_ * 8);
  for (std::int64_t n = 0; n < s.n; ++n) {
    const double* gs = dy.data() + n * cout_ * So;
    for (std::int64_t co = 0; co < cout_; ++co) {
      double acc = 0.0;
      for (int d = 0; d < 8; ++d) {
        const int dz = d >> 2, dyy = (d >> 1) & 1, dxx = d & 1;
        double* col = dym.data() + (co * 8 + d) * S;
        for (std::int64_t z = 0; z < s.z; ++z)
          for (std::int64_t y = 0; y < s.y; ++y) {
            const double* src = gs + co * So + ((2 * z + dz) * uy + 2 * y + dyy) * ux + dxx;
            double* dst = col + (z * s.y + y) * s.x;
            for (std::int64_t xx = 0; xx < s.x; ++xx) {
              dst[xx] = src[2 * xx];
              acc += src[2 * xx];
            }
          }
      }
      db[co] += acc;
    }
    CMapM xm(x_.data() + n * cin_ * S, S, cin_);
    dm.noalias() += dym.transpose() * xm;
    MapM(dx.data() + n * cin_ * S, S, cin_).noalias() = dym * m;
  }
  return dx;
}

// ---------------------------------------------------------------- BatchNorm3d

BatchNorm3d::BatchNorm3d(ModelParams& store, const std::string& name, std::int64_t channels) : c_(channels) {
  gamma_ = store.add(name + ".weight", Tensor({channels}, 1.0));
  beta_ = store.add(name + ".bias", Tensor({channels}));
  mean_ = store.add(name + ".running_mean", Tensor({channels}), false);
  var_ = store.add(name + ".running_var", Tensor({channels}, 1.0), false);
}

Tensor BatchNorm3d::forward(const Tensor& x, Mode mode) {
  require_channels(x, c_, "batch_norm");
  const FeatureShape s = feature_shape(x);
  const std::int64_t S = s.spatial();
  const double m = static_cast<double>(s.n * S);
  mode_ = mode;
  xhat_ = Tensor::zeros_like(x);
  inv_std_.assign(static_cast<std::size_t>(c_), 0.0);
  Tensor out = Tensor::zeros_like(x);
  for (std::int64_t c = 0; c < c_; ++c) {
    double mean, var;
    if (mode == Mode::kTrain) {
      double sum = 0.0;
      for (std::int64_t n = 0; n < s.n; ++n) {
        const double* p = x.data() + (n * c_ + c) * S;
        for (std::int64_t i = 0; i < S; ++i) sum += p[i];
      }
      mean = sum / m;
      double sq = 0.0;
      for (std::int64_t n = 0; n < s.n; ++n) {
        const double* p = x.data() + (n * c_ + c) * S;
        for (std::int64_t i = 0; i < S; ++i) sq += (p[i] - mean) * (p[i] - mean);
      }
      var = sq / m;
      const double unbiased = m > 1.0 ? sq / (m - 1.0) : var;
      mean_->value[c] = (1.0 - kMomentum) * mean_->value[c] + kMomentum * mean;
      var_->value[c] = (1.0 - kMomentum) * var_->value[c] + kMomentum * unbiased;
    } else {
      mean = mean_->value[c];
      var = var_->value[c];
    }
    const double inv = 1.0 / std::sqrt(var + kEps);
    inv_std_[static_cast<std::size_t>(c)] = inv;
    const double g = gamma_->value[c], b = beta_->value[c];
    for (std::int64_t n = 0; n < s.n; ++n) {
      const std::int64_t off = (n * c_ + c) * S;
      for (std::int64_t i = 0; i < S; ++i) {
        const double h = (x[off + i] - mean) * inv;
        xhat_[off + i] = h;
        out[off + i] = g * h + b;
      }
    }
  }
  return out;
}

Tensor BatchNorm3d::backward(const Tensor& dy) {
  const FeatureShape s = feature_shape(xhat_);
  const std::int64_t S = s.spatial();
  const double m = static_cast<double>(s.n * S);
  Tensor dx = Tensor::zeros_like(dy);
  double* dg = gamma_->gradient().data();
  double* dbeta = beta_->gradient().data();
  for (std::int64_t c = 0; c < c_; ++c) {
    double sdy = 0.0, sdyh = 0.0;
    for (std::int64_t n = 0; n < s.n; ++n) {
      const std::int64_t off = (n * c_ + c) * S;
      for (std::int64_t i = 0; i < S; ++i) {
        sdy += dy[off + i];
        sdyh += dy[off + i] * xhat_[off + i];
      }
    }
    dg[c] += sdyh;
    dbeta[c] += sdy;
    const double k = gamma_->value[c] * inv_std_[static_cast<std::size_t>(c)];
    for (std::int64_t n = 0; n < s.n; ++n) {
      const std::int64_t off = (n * c_ + c) * S;
      if (mode_ == Mode::kTrain) {
        for (std::int64_t i = 0; i < S; ++i)
          dx[off + i] = k * (dy[off + i] - sdy / m - xhat_[off + i] * sdyh / m);
      } else {
        for (std::int64_t i = 0; i < S; ++i) dx[off + i] = k * dy[off + i];
      }
    }
  }
  return dx;
}

// ---------------------------------------------------------------- PReLU

PReLU::PReLU(ModelParams& store, const std::string& name, std::int64_t channels) {
  a_ = store.add(name + ".slope", Tensor({channels}, 0.25));
}

Tensor PReLU::forward(const Tensor& x) {
  require_channels(x, a_->value.size(), "prelu");
  const FeatureShape s = feature_shape(x);
  const std::int64_t S = s.spatial();
  x_ = x;
  Tensor out = x;
  for (std::int64_t n = 0; n < s.n; ++n)
    for (std::int64_t c = 0; c < s.c; ++c) {
      const double a = a_->value[c];
      double* p = out.data() + (n * s.c + c) * S;
      for (std::int64_t i = 0; i < S; ++i)
        if (p[i] <= 0.0) p[i] *= a;
    }
  return out;
}

Tensor PReLU::backward(const Tensor& dy) {
  const FeatureShape s = feature_shape(x_);
  const std::int64_t S = s.spatial();
  Tensor dx = dy;
  double* da = a_->gradient().data();
  for (std::int64_t n = 0; n < s.n; ++n)
    for (std::int64_t c = 0; c < s.c; ++c) {
      const double a = a_->value[c];
      const std::int64_t off = (n * s.c + c) * S;
      double acc = 0.0;
      for (std::int64_t i = 0; i < S; ++i) {
        if (x_[off + i] <= 0.0) {
          acc += dy[off + i] * x_[off + i];
          dx[off + i] *= a;
        }
      }
      da[c] += acc;
    }
  return dx;
}

// ---------------------------------------------------------------- ReLU / Dropout

Tensor ReLU::forward(const Tensor& x) {
  x_ = x;
  Tensor out = x;
  for (double& v : out.values()) v = v > 0.0 ? v : 0.0;
  return out;
}

Tensor ReLU::backward(const Tensor& dy) {
  Tensor dx = dy;
  for (std::int64_t i = 0; i < dx.size(); ++i)
    if (x_[i] <= 0.0) dx[i] = 0.0;
  return dx;
}

Tensor Dropout::forward(const Tensor& x, Mode mode) {
  keep_.clear();
  if (mode == Mode::kEval || rate_ <= 0.0) return x;
  if (!rng_) throw Error(ErrorCode::kInvalidArgument, "dropout: no random source attached");
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double scale = 1.0 / (1.0 - rate_);
  keep_.resize(static_cast<std::size_t>(x.size()));
  Tensor out = x;
  for (std::int64_t i = 0; i < x.size(); ++i) {
    const double k = u(*rng_) < rate_ ? 0.0 : scale;
    keep_[static_cast<std::size_t>(i)] = k;
    out[i] *= k;
  }
  return out;
}

Tensor Dropout::backward(const Tensor& dy) {
  if (keep_.empty()) return dy;
  Tensor dx = dy;
  for (std::int64_t i = 0; i < dx.size(); ++i) dx[i] *= keep_[static_cast<std::size_t>(i)];
  return dx;
}

// ---------------------------------------------------------------- LayerNorm

LayerNorm::LayerNorm(ModelParams& store, const std::string& name, std::int64_t channels) : c_(channels) {
  gamma_ = store.add(name + ".weight", Tensor({channels}, 1.0));
  beta_ = store.add(name + ".bias", Tensor({channels}));
}

Tensor LayerNorm::forward(const Tensor& x) {
  if (x.rank() == 0 || x.dims().back() != c_) {
    throw Error(ErrorCode::kShapeMismatch, "layer_norm: expected trailing dim " + std::to_string(c_) +
                                               ", got " + x.shape_string());
  }
  const std::int64_t rows = x.size() / c_;
  xhat_ = Tensor::zeros_like(x);
  inv_std_.assign(static_cast<std::size_t>(rows), 0.0);
  Tensor out = Tensor::zeros_like(x);
  const double* g = gamma_->value.data();
  const double* b = beta_->value.data();
  for (std::int64_t r = 0; r < rows; ++r) {
    const double* p = x.data() + r * c_;
    double mean = 0.0;
    for (std::int64_t c = 0; c < c_; ++c) mean += p[c];
    mean /= static_cast<double>(c_);
    double var = 0.0;
    for (std::int64_t c = 0; c < c_; ++c) var += (p[c] - mean) * (p[c] - mean);
    var /= static_cast<double>(c_);
    const double inv = 1.0 / std::sqrt(var + kEps);
    inv_std_[static_cast<std::size_t>(r)] = inv;
    double* h = xhat_.data() + r * c_;
    double* o = out.data() + r * c_;
    for (std::int64_t c = 0; c < c_; ++c) {
      h[c] = (p[c] - mean) * inv;
      o[c] = g[c] * h[c] + b[c];
    }
  }
  return out;
}

Tensor LayerNorm::backward(const Tensor& dy) {
  const std::int64_t rows = dy.size() / c_;
  Tensor dx = Tensor::zeros_like(dy);
  double* dg = gamma_->gradient().data();
  double* db = beta_->gradient().data();
  const double* g = gamma_->value.data();
  const double cn = static_cast<double>(c_);
  for (std::int64_t r = 0; r < rows; ++r) {
    const double* d = dy.data() + r * c_;
    const double* h = xhat_.data() + r * c_;
    double s1 = 0.0, s2 = 0.0;
    for (std::int64_t c = 0; c < c_; ++c) {
      dg[c] += d[c] * h[c];
      db[c] += d[c];
      const double dh = d[c] * g[c];
      s1 += dh;
      s2 += dh * h[c];
    }
    const double inv = inv_std_[static_cast<std::size_t>(r)];
    double* o = dx.data() + r * c_;
    for (std::int64_t c = 0; c < c_; ++c) o[c] = inv * (d[c] * g[c] - s1 / cn - h[c] * s2 / cn);
  }
  return dx;
}

// ---------------------------------------------------------------- Linear

Linear::Linear(ModelParams& store, const std::string& name, std::int64_t in, std::int64_t out,
               std::mt19937_64& init)
    : in_(in), out_(out) {
  Tensor w({out, in});
  normal_fill(w, std::sqrt(2.0 / static_cast<double>(in + out)), init);
  w_ = store.add(name + ".weight", std::move(w));
  b_ = store.add(name + ".bias", Tensor({out}));
}

Tensor Linear::forward(const Tensor& x) {
  if (x.rank() == 0 || x.dims().back() != in_) {
    throw Error(ErrorCode::kShapeMismatch, "linear: expected trailing dim " + std::to_string(in_) +
                                               ", got " + x.shape_string());
  }
  x_ = x;
  const std::int64_t rows = x.size() / in_;
  std::vector<std::int64_t> od = x.dims();
  od.back() = out_;
  Tensor out(od);
  MapM om(out.data(), out_, rows);
  om.noalias() = CMapM(w_->value.data(), in_, out_).transpose() * CMapM(x.data(), in_, rows);
  om.colwise() += Eigen::Map<const Eigen::VectorXd>(b_->value.data(), out_);
  return out;
}

Tensor Linear::backward(const Tensor& dy) {
  const std::int64_t rows = dy.size() / out_;
  CMapM g(dy.data(), out_, rows);
  MapM(w_->gradient().data(), in_, out_).noalias() += CMapM(x_.data(), in_, rows) * g.transpose();
  Eigen::Map<Eigen::VectorXd>(b_->gradient().data(), out_) += g.rowwise().sum();
  Tensor dx = Tensor::zeros_like(x_);
  MapM(dx.data(), in_, rows).noalias() = CMapM(w_->value.data(), in_, out_) * g;
  return dx;
}

// ---------------------------------------------------------------- Gelu

Tensor Gelu::forward(const Tensor& x) {
  x_ = x;
  Tensor out = x;
  for (double& v : out.values()) v = 0.5 * v * (1.0 + std::erf(v * M_SQRT1_2));
  return out;
}

Tensor Gelu::backward(const Tensor& dy) {
  Tensor dx = dy;
  const double inv_sqrt_2pi = 0.5 * M_2_SQRTPI * M_SQRT1_2;
  for (std::int64_t i = 0; i < dx.size(); ++i) {
    const double v = x_[i];
    const double cdf = 0.5 * (1.0 + std::erf(v * M_SQRT1_2));
    dx[i] *= cdf + v * inv_sqrt_2pi * std::exp(-0.5 * v * v);
  }
  return dx;
}

}  // namespace strokeseg::nn

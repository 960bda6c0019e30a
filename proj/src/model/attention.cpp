// Copyright (c) 2026, strokeseg contributors
// SPDX-License-Identifier: Apache-2.0

#include "strokeseg/nn/attention.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <cstring>
#include <limits>

#include "strokeseg/error.hpp"

namespace strokeseg::nn {
namespace {

using Mat = Eigen::MatrixXd;
using MapM = Eigen::Map<Mat>;
using CMapM = Eigen::Map<const Mat>;
using SMapM = Eigen::Map<Mat, 0, Eigen::OuterStride<>>;
using CSMapM = Eigen::Map<const Mat, 0, Eigen::OuterStride<>>;

std::int64_t wrap(std::int64_t v, std::int64_t p) { return ((v % p) + p) % p; }

}  // namespace

WindowGrid make_window_grid(std::int64_t n, std::int64_t x, std::int64_t y, std::int64_t z, std::int64_t c,
                            int window, int shift) {
  if (window < 1) throw Error(ErrorCode::kInvalidArgument, "window size must be >= 1");
  if (shift < 0 || shift >= window) throw Error(ErrorCode::kInvalidArgument, "shift must lie in [0, window)");
  WindowGrid g;
  g.n = n;
  g.c = c;
  g.dims = {x, y, z};
  g.window = window;
  g.shift = shift;
  for (int a = 0; a < 3; ++a) {
    g.count[a] = (g.dims[a] + window - 1) / window;
    g.padded[a] = g.count[a] * window;
  }
  return g;
}

Tensor window_partition(const Tensor& tokens, const WindowGrid& g) {
  if (tokens.rank() != 5 || tokens.dim(0) != g.n || tokens.dim(1) != g.dims[0] || tokens.dim(2) != g.dims[1] ||
      tokens.dim(3) != g.dims[2] || tokens.dim(4) != g.c) {
    throw Error(ErrorCode::kShapeMismatch, "window_partition: token grid " + tokens.shape_string() +
                                               " does not match the window grid");
  }
  const std::int64_t w = g.window, T = g.tokens_per_window(), C = g.c, nW = g.windows_per_sample();
  const std::int64_t X = g.dims[0], Y = g.dims[1], Z = g.dims[2];
  Tensor out({g.num_windows(), T, C});
  for (std::int64_t n = 0; n < g.n; ++n)
    for (std::int64_t wz = 0; wz < g.count[2]; ++wz)
      for (std::int64_t wy = 0; wy < g.count[1]; ++wy)
        for (std::int64_t wx = 0; wx < g.count[0]; ++wx) {
          const std::int64_t b = n * nW + (wz * g.count[1] + wy) * g.count[0] + wx;
          for (std::int64_t pz = 0; pz < w; ++pz) {
            const std::int64_t sz = wrap(wz * w + pz + g.shift, g.padded[2]);
            if (sz >= Z) continue;
            for (std::int64_t py = 0; py < w; ++py) {
              const std::int64_t sy = wrap(wy * w + py + g.shift, g.padded[1]);
              if (sy >= Y) continue;
              for (std::int64_t px = 0; px < w; ++px) {
                const std::int64_t sx = wrap(wx * w + px + g.shift, g.padded[0]);
                if (sx >= X) continue;
                const std::int64_t t = (pz * w + py) * w + px;
                std::memcpy(out.data() + (b * T + t) * C, tokens.data() + (((n * Z + sz) * Y + sy) * X + sx) * C,
                            sizeof(double) * C);
              }
            }
          }
        }
  return out;
}

Tensor window_reverse(const Tensor& windows, const WindowGrid& g) {
  const std::int64_t w = g.window, T = g.tokens_per_window(), C = g.c, nW = g.windows_per_sample();
  if (windows.rank() != 3 || windows.dim(0) != g.num_windows() || windows.dim(1) != T || windows.dim(2) != C) {
    throw Error(ErrorCode::kShapeMismatch, "window_reverse: windows " + windows.shape_string() +
                                               " do not match the window grid");
  }
  const std::int64_t X = g.dims[0], Y = g.dims[1], Z = g.dims[2];
  Tensor out({g.n, X, Y, Z, C});
  for (std::int64_t n = 0; n < g.n; ++n)
    for (std::int64_t z = 0; z < Z; ++z) {
      const std::int64_t rz = wrap(z - g.shift, g.padded[2]);
      for (std::int64_t y = 0; y < Y; ++y) {
        const std::int64_t ry = wrap(y - g.shift, g.padded[1]);
        for (std::int64_t x = 0; x < X; ++x) {
          const std::int64_t rx = wrap(x - g.shift, g.padded[0]);
          const std::int64_t b = n * nW + ((rz / w) * g.count[1] + ry / w) * g.count[0] + rx / w;
          const std::int64_t t = ((rz % w) * w + ry % w) * w + rx % w;
          std::memcpy(out.data() + (((n * Z + z) * Y + y) * X + x) * C, windows.data() + (b * T + t) * C,
                      sizeof(double) * C);
        }
      }
    }
  return out;
}

std::vector<std::uint8_t> window_attention_mask(const WindowGrid& g) {
  const std::int64_t w = g.window, T = g.tokens_per_window(), nW = g.windows_per_sample();
  std::vector<std::uint8_t> mask(static_cast<std::size_t>(nW * T * T), 0);
  std::vector<std::uint8_t> valid(static_cast<std::size_t>(T));
  std::vector<int> region(static_cast<std::size_t>(T));
  auto label = [&](std::int64_t r, int axis) {
    if (g.shift == 0) return 0;
    if (r < g.padded[axis] - w) return 0;
    return r < g.padded[axis] - g.shift ? 1 : 2;
  };
  for (std::int64_t wz = 0; wz < g.count[2]; ++wz)
    for (std::int64_t wy = 0; wy < g.count[1]; ++wy)
      for (std::int64_t wx = 0; wx < g.count[0]; ++wx) {
        const std::int64_t wi = (wz * g.count[1] + wy) * g.count[0] + wx;
        for (std::int64_t t = 0; t < T; ++t) {
          const std::int64_t r[3] = {wx * w + t % w, wy * w + (t / w) % w, wz * w + t / (w * w)};
          bool ok = true;
          for (int a = 0; a < 3; ++a) ok = ok && wrap(r[a] + g.shift, g.padded[a]) < g.dims[a];
          valid[static_cast<std::size_t>(t)] = ok;
          region[static_cast<std::size_t>(t)] = (label(r[0], 0) * 3 + label(r[1], 1)) * 3 + label(r[2], 2);
        }
        std::uint8_t* m = mask.data() + wi * T * T;
        for (std::int64_t i = 0; i < T; ++i)
          for (std::int64_t j = 0; j < T; ++j)
            m[i * T + j] = valid[static_cast<std::size_t>(i)] && valid[static_cast<std::size_t>(j)] &&
                           region[static_cast<std::size_t>(i)] == region[static_cast<std::size_t>(j)];
      }
  return mask;
}

std::vector<std::int32_t> relative_position_index(int window) {
  const int w = window, T = w * w * w, span = 2 * w - 1;
  std::vector<std::int32_t> idx(static_cast<std::size_t>(T) * T);
  for (int i = 0; i < T; ++i)
    for (int j = 0; j < T; ++j) {
      const int dx = i % w - j % w, dy = (i / w) % w - (j / w) % w, dz = i / (w * w) - j / (w * w);
      idx[static_cast<std::size_t>(i) * T + j] = ((dx + w - 1) * span + dy + w - 1) * span + dz + w - 1;
    }
  return idx;
}

// ---------------------------------------------------------------- WindowAttention

WindowAttention::WindowAttention(ModelParams& store, const std::string& name, std::int64_t dim, int heads,
                                 int window, std::mt19937_64& init)
    : dim_(dim), heads_(heads), window_(window) {
  if (heads < 1 || dim % heads != 0) {
    throw Error(ErrorCode::kInvalidArgument, name + ": embed dim " + std::to_string(dim) +
                                                 " is not divisible by " + std::to_string(heads) + " heads");
  }
  qkv_ = Linear(store, name + ".qkv", dim, 3 * dim, init);
  proj_ = Linear(store, name + ".proj", dim, dim, init);
  const std::int64_t span = 2 * window - 1;
  Tensor table({span * span * span, heads});
  std::normal_distribution<double> d(0.0, 0.02);
  for (double& v : table.values()) v = d(init);
  table_ = store.add(name + ".relative_position_bias", std::move(table));
  rel_index_ = relative_position_index(window);
}

Tensor WindowAttention::forward(const Tensor& tokens, int shift) {
  if (tokens.rank() != 5 || tokens.dim(4) != dim_) {
    throw Error(ErrorCode::kShapeMismatch, "window attention: expected (N,X,Y,Z," + std::to_string(dim_) +
                                               ") tokens, got " + tokens.shape_string());
  }
  grid_ = make_window_grid(tokens.dim(0), tokens.dim(1), tokens.dim(2), tokens.dim(3), dim_, window_, shift);
  const std::int64_t B = grid_.num_windows(), T = grid_.tokens_per_window(), C = dim_, H = heads_;
  const std::int64_t d = C / H, nW = grid_.windows_per_sample();
  const double scale = 1.0 / std::sqrt(static_cast<double>(d));
  const std::vector<std::uint8_t> mask = window_attention_mask(grid_);
  const double* table = table_->value.data();

  qkv_out_ = qkv_.forward(window_partition(tokens, grid_));
  attn_ = Tensor({B, H, T, T});
  Tensor mixed({B, T, C});
  for (std::int64_t b = 0; b < B; ++b) {
    const double* base = qkv_out_.data() + b * T * 3 * C;
    const std::uint8_t* m = mask.data() + (b % nW) * T * T;
    for (std::int64_t h = 0; h < H; ++h) {
      CSMapM q(base + h * d, d, T, Eigen::OuterStride<>(3 * C));
      CSMapM k(base + C + h * d, d, T, Eigen::OuterStride<>(3 * C));
      CSMapM v(base + 2 * C + h * d, d, T, Eigen::OuterStride<>(3 * C));
      double* a = attn_.data() + (b * H + h) * T * T;
      MapM at(a, T, T);  // at(j, i) = A(i, j)
      at.noalias() = k.transpose() * q;
      for (std::int64_t i = 0; i < T; ++i) {
        double* row = a + i * T;
        double mx = -std::numeric_limits<double>::infinity();
        for (std::int64_t j = 0; j < T; ++j) {
          if (m[i * T + j]) {
            row[j] = row[j] * scale + table[rel_index_[static_cast<std::size_t>(i * T + j)] * H + h];
            mx = std::max(mx, row[j]);
          }
        }
        if (mx == -std::numeric_limits<double>::infinity()) {
          std::fill(row, row + T, 0.0);
          continue;
        }
        double sum = 0.0;
        for (std::int64_t j = 0; j < T; ++j) {
          row[j] = m[i * T + j] ? std::exp(row[j] - mx) : 0.0;
          sum += row[j];
        }
        for (std::int64_t j = 0; j < T; ++j) row[j] /= sum;
      }
      SMapM o(mixed.data() + b * T * C + h * d, d, T, Eigen::OuterStride<>(C));
      o.noalias() = v * at;
    }
  }
  return window_reverse(proj_.forward(mixed), grid_);
}

Tensor WindowAttention::backward(const Tensor& dy) {
  const std::int64_t B = grid_.num_windows(), T = grid_.tokens_per_window(), C = dim_, H = heads_;
  const std::int64_t d = C / H;
  const double scale = 1.0 / std::sqrt(static_cast<double>(d));
  double* dtable = table_->gradient().data();

  const Tensor dmixed = proj_.backward(window_partition(dy, grid_));
  Tensor dqkv = Tensor::zeros_like(qkv_out_);
  Mat da(T, T);
  for (std::int64_t b = 0; b < B; ++b) {
    const double* base = qkv_out_.data() + b * T * 3 * C;
    double* dbase = dqkv.data() + b * T * 3 * C;
    for (std::int64_t h = 0; h < H; ++h) {
      CSMapM q(base + h * d, d, T, Eigen::OuterStride<>(3 * C));
      CSMapM k(base + C + h * d, d, T, Eigen::OuterStride<>(3 * C));
      CSMapM v(base + 2 * C + h * d, d, T, Eigen::OuterStride<>(3 * C));
      SMapM dq(dbase + h * d, d, T, Eigen::OuterStride<>(3 * C));
      SMapM dk(dbase + C + h * d, d, T, Eigen::OuterStride<>(3 * C));
      SMapM dv(dbase + 2 * C + h * d, d, T, Eigen::OuterStride<>(3 * C));
      CSMapM dout(dmixed.data() + b * T * C + h * d, d, T, Eigen::OuterStride<>(C));
      const double* a = attn_.data() + (b * H + h) * T * T;
      CMapM at(a, T, T);

      dv.noalias() = dout * at.transpose();
      da.noalias() = v.transpose() * dout;  // da(j, i) = dA(i, j)
      for (std::int64_t i = 0; i < T; ++i) {
        double* col = da.data() + i * T;
        const double* row = a + i * T;
        double dot = 0.0;
        for (std::int64_t j = 0; j < T; ++j) dot += row[j] * col[j];
        for (std::int64_t j = 0; j < T; ++j) {
          col[j] = row[j] * (col[j] - dot);
          dtable[rel_index_[static_cast<std::size_t>(i * T + j)] * H + h] += col[j];
        }
      }
      dq.noalias() = scale * (k * da);
      dk.noalias() = scale * (q * da.transpose());
    }
  }
  return window_reverse(qkv_.backward(dqkv), grid_);
}

// ---------------------------------------------------------------- SwinBlock

const char* to_string(SwinResidual r) { return r == SwinResidual::kNested ? "nested" : "sequential"; }

SwinResidual parse_swin_residual(const std::string& s) {
  if (s == "nested") return SwinResidual::kNested;
  if (s == "sequential") return SwinResidual::kSequential;
  throw Error(ErrorCode::kInvalidArgument, "unknown swin residual wiring '" + s + "'");
}

SwinBlock::SwinBlock(ModelParams& store, const std::string& name, std::int64_t dim, int heads, int window,
                     int shift, double mlp_ratio, SwinResidual residual, std::mt19937_64& init)
    : dim_(dim), shift_(shift), residual_(residual) {
  ln1_ = LayerNorm(store, name + ".norm1", dim);
  attn_ = WindowAttention(store, name + ".attn", dim, heads, window, init);
  ln2_ = LayerNorm(store, name + ".norm2", dim);
  const auto hidden = static_cast<std::int64_t>(std::llround(mlp_ratio * static_cast<double>(dim)));
  fc1_ = Linear(store, name + ".mlp.fc1", dim, hidden, init);
  fc2_ = Linear(store, name + ".mlp.fc2", hidden, dim, init);
}

Tensor SwinBlock::forward(const Tensor& x) {
  if (x.rank() != 5 || x.dim(4) != dim_) {
    throw Error(ErrorCode::kShapeMismatch, "swin block: expected " + std::to_string(dim_) +
                                               " channels, got " + x.shape_string());
  }
  Tensor y = add(x, attn_.forward(ln1_.forward(x), shift_));
  Tensor m = fc2_.forward(act_.forward(fc1_.forward(ln2_.forward(y))));
  add_inplace(m, residual_ == SwinResidual::kNested ? x : y);
  return m;
}

Tensor SwinBlock::backward(const Tensor& dout) {
  Tensor dy = ln2_.backward(fc1_.backward(act_.backward(fc2_.backward(dout))));
  if (residual_ == SwinResidual::kSequential) add_inplace(dy, dout);
  Tensor dx = add(dy, ln1_.backward(attn_.backward(dy)));
  if (residual_ == SwinResidual::kNested) add_inplace(dx, dout);
  return dx;
}

}  // namespace strokeseg::nn

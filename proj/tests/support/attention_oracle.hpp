// Copyright (c) 2026, strokeseg contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Reference implementations for windowed attention: dense global attention
// over all valid tokens of one sample, and a displacement-based test for
// which token pairs a shifted window may connect.

#include <cmath>
#include <cstdint>
#include <vector>

#include "strokeseg/nn/attention.hpp"

namespace strokeseg::testing {

/// Global multi-head self-attention on tokens (N, X, Y, Z, C) using the
/// weights of `attn`. Relative offsets index the bias table directly, so
/// this equals windowed attention whenever one unshifted window covers the
/// whole grid.
inline nn::Tensor dense_attention(nn::WindowAttention& attn, const nn::Tensor& tokens, int heads, int window) {
  const std::int64_t N = tokens.dim(0), X = tokens.dim(1), Y = tokens.dim(2), Z = tokens.dim(3), C = tokens.dim(4);
  const std::int64_t T = X * Y * Z, d = C / heads;
  const nn::Parameter& wqkv = *attn.qkv().weight();
  const nn::Parameter& bqkv = *attn.qkv().bias();
  const nn::Parameter& wp = *attn.proj().weight();
  const nn::Parameter& bp = *attn.proj().bias();
  const nn::Parameter& table = *attn.bias_table();
  const int span = 2 * window - 1;
  nn::Tensor out(tokens.dims());
  for (std::int64_t n = 0; n < N; ++n) {
    // Token t at (x, y, z) with t = (z * Y + y) * X + x.
    std::vector<std::vector<double>> q(T, std::vector<double>(3 * C));
    for (std::int64_t t = 0; t < T; ++t) {
      const double* src = tokens.data() + (n * T + t) * C;
      for (std::int64_t o = 0; o < 3 * C; ++o) {
        double acc = bqkv.value[o];
        for (std::int64_t i = 0; i < C; ++i) acc += wqkv.value[o * C + i] * src[i];
        q[t][o] = acc;
      }
    }
    auto coord = [&](std::int64_t t) {
      return std::array<std::int64_t, 3>{t % X, (t / X) % Y, t / (X * Y)};
    };
    std::vector<std::vector<double>> mixed(T, std::vector<double>(C, 0.0));
    for (int h = 0; h < heads; ++h) {
      for (std::int64_t i = 0; i < T; ++i) {
        std::vector<double> logits(T);
        double mx = -INFINITY;
        const auto ci = coord(i);
        for (std::int64_t j = 0; j < T; ++j) {
          double dot = 0;
          for (std::int64_t k = 0; k < d; ++k) dot += q[i][h * d + k] * q[j][C + h * d + k];
          const auto cj = coord(j);
          const std::int64_t idx =
              ((ci[0] - cj[0] + window - 1) * span + (ci[1] - cj[1] + window - 1)) * span + (ci[2] - cj[2] + window - 1);
          logits[j] = dot / std::sqrt(static_cast<double>(d)) + table.value[idx * heads + h];
          mx = std::max(mx, logits[j]);
        }
        double sum = 0;
        for (double& l : logits) sum += (l = std::exp(l - mx));
        for (std::int64_t j = 0; j < T; ++j)
          for (std::int64_t k = 0; k < d; ++k) mixed[i][h * d + k] += logits[j] / sum * q[j][2 * C + h * d + k];
      }
    }
    for (std::int64_t t = 0; t < T; ++t) {
      double* dst = out.data() + (n * T + t) * C;
      for (std::int64_t o = 0; o < C; ++o) {
        double acc = bp.value[o];
        for (std::int64_t i = 0; i < C; ++i) acc += wp.value[o * C + i] * mixed[t][i];
        dst[o] = acc;
      }
    }
  }
  return out;
}

/// Grid position of a window slot and the real voxel it holds. A voxel
/// coordinate at or beyond the grid dims means the slot is padding.
struct SlotOrigin {
  std::array<std::int64_t, 3> slot;
  std::array<std::int64_t, 3> voxel;
  bool valid;
};

inline SlotOrigin slot_origin(const nn::WindowGrid& g, std::int64_t window_index, std::int64_t t) {
  const std::int64_t w = g.window;
  const std::int64_t wx = window_index % g.count[0];
  const std::int64_t wy = (window_index / g.count[0]) % g.count[1];
  const std::int64_t wz = window_index / (g.count[0] * g.count[1]);
  const std::array<std::int64_t, 3> local{t % w, (t / w) % w, t / (w * w)};
  const std::array<std::int64_t, 3> win{wx, wy, wz};
  SlotOrigin o{};
  o.valid = true;
  for (int a = 0; a < 3; ++a) {
    o.slot[a] = win[a] * w + local[a];
    o.voxel[a] = (o.slot[a] + g.shift) % g.padded[a];
    if (o.voxel[a] >= g.dims[a]) o.valid = false;
  }
  return o;
}

/// Two slots may attend to each other when both hold real voxels and their
/// displacement inside the window equals their displacement in the volume,
/// i.e. the cyclic roll did not carry either across the grid boundary.
inline bool may_attend(const SlotOrigin& a, const SlotOrigin& b) {
  if (!a.valid || !b.valid) return false;
  for (int k = 0; k < 3; ++k) {
    if (a.slot[k] - b.slot[k] != a.voxel[k] - b.voxel[k]) return false;
  }
  return true;
}

}  // namespace strokeseg::testing

// Copyright (c) 2026, strokeseg contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "strokeseg/nn/layers.hpp"

namespace strokeseg::nn {

/// Geometry of a windowed token grid. Each spatial axis of length d is
/// zero-padded to p = ceil(d / w) * w, then cyclically rolled so that
/// rolled[r] = padded[(r + shift) mod p].
struct WindowGrid {
  std::int64_t n = 0, c = 0;
  std::array<std::int64_t, 3> dims{};    // x, y, z
  std::array<std::int64_t, 3> padded{};  // x, y, z
  std::array<std::int64_t, 3> count{};   // windows per axis
  int window = 1;
  int shift = 0;

  std::int64_t windows_per_sample() const { return count[0] * count[1] * count[2]; }
  std::int64_t num_windows() const { return n * windows_per_sample(); }
  std::int64_t tokens_per_window() const { return static_cast<std::int64_t>(window) * window * window; }
};

WindowGrid make_window_grid(std::int64_t n, std::int64_t x, std::int64_t y, std::int64_t z, std::int64_t c,
                            int window, int shift);

/// Token grid (N, X, Y, Z, C) -> windows (B, T, C) with B = N * windows and
/// T = w^3. Window b = n*nW + (wz*nWy + wy)*nWx + wx; token t = (pz*w + py)*w + px.
Tensor window_partition(const Tensor& tokens, const WindowGrid& g);
/// Exact inverse of window_partition (un-roll, crop the padding).
Tensor window_reverse(const Tensor& windows, const WindowGrid& g);

/// Per-window mask: true where attention from query i to key j is allowed
/// (both are real voxels and, for shifted grids, lie in the same wrap-around
/// region). Padding queries get an empty row. Row-major (T, T) per window, windows_per_sample windows.
std::vector<std::uint8_t> window_attention_mask(const WindowGrid& g);

/// Relative-position table row for tokens i, j of a window of side w.
std::vector<std::int32_t> relative_position_index(int window);

/// Multi-head self-attention inside (optionally shifted) windows with a
/// learned relative position bias per head.
class WindowAttention {
 public:
  WindowAttention() = default;
  WindowAttention(ModelParams& store, const std::string& name, std::int64_t dim, int heads, int window,
                  std::mt19937_64& init);

  /// tokens: (N, X, Y, Z, C). Returns the same shape.
  Tensor forward(const Tensor& tokens, int shift);
  Tensor backward(const Tensor& dy);

  /// Attention probabilities of the last forward, (B, H, T, T).
  const Tensor& attention() const { return attn_; }
  const WindowGrid& grid() const { return grid_; }

  Linear& qkv() { return qkv_; }
  Linear& proj() { return proj_; }
  Parameter* bias_table() const { return table_; }

 private:
  std::int64_t dim_ = 0;
  int heads_ = 1;
  int window_ = 1;
  Linear qkv_;
  Linear proj_;
  Parameter* table_ = nullptr;
  std::vector<std::int32_t> rel_index_;
  WindowGrid grid_;
  Tensor qkv_out_;  // (B, T, 3C)
  Tensor attn_;     // (B, H, T, T)
};

/// How the two residual branches of a transformer block are wired.
///   kNested:     out = x + MLP(LN(x + SW-MSA(LN(x))))
///   kSequential: y = x + SW-MSA(LN(x)); out = y + MLP(LN(y))
enum class SwinResidual { kNested, kSequential };

const char* to_string(SwinResidual r);
SwinResidual parse_swin_residual(const std::string& s);

class SwinBlock {
 public:
  SwinBlock() = default;
  SwinBlock(ModelParams& store, const std::string& name, std::int64_t dim, int heads, int window, int shift,
            double mlp_ratio, SwinResidual residual, std::mt19937_64& init);

  /// tokens: (N, X, Y, Z, C).
  Tensor forward(const Tensor& tokens);
  Tensor backward(const Tensor& dy);

  int shift() const { return shift_; }
  WindowAttention& attention() { return attn_; }
  LayerNorm& norm1() { return ln1_; }
  LayerNorm& norm2() { return ln2_; }
  Linear& fc1() { return fc1_; }
  Linear& fc2() { return fc2_; }

 private:
  std::int64_t dim_ = 0;
  int shift_ = 0;
  SwinResidual residual_ = SwinResidual::kNested;
  LayerNorm ln1_, ln2_;
  WindowAttention attn_;
  Linear fc1_, fc2_;
  Gelu act_;
};

}  // namespace strokeseg::nn

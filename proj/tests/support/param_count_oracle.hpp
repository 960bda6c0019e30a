// Copyright (c) 2026, strokeseg contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Layer-by-layer trainable parameter count written out from the
// architecture description, independent of the model code.

#include <cstdint>

#include "strokeseg/nn/network.hpp"

namespace strokeseg::testing {

inline std::int64_t conv_params(std::int64_t cin, std::int64_t cout, std::int64_t k, bool bias) {
  return cin * cout * k * k * k + (bias ? cout : 0);
}

inline std::int64_t residual_block_params(std::int64_t cin, std::int64_t cout, std::int64_t k, int convs) {
  std::int64_t total = 0;
  for (int i = 0; i < convs; ++i) {
    total += conv_params(i == 0 ? cin : cout, cout, k, false);
    total += 2 * cout;  // BN scale and shift
    total += cout;      // PReLU slope per channel
  }
  if (cin != cout) total += conv_params(cin, cout, 1, true);
  return total;
}

inline std::int64_t closed_form_parameter_count(const nn::ModelConfig& c) {
  auto width = [&](int level) { return static_cast<std::int64_t>(c.base_channels) << level; };
  auto kernel = [&](int level) {
    return c.kernel_sizes.empty() ? std::int64_t{3} : static_cast<std::int64_t>(c.kernel_sizes[level]);
  };
  const int L = c.encoder_depth;
  std::int64_t total = 0;
  for (int l = 0; l < L; ++l) {
    total += residual_block_params(l == 0 ? c.in_channels : width(l), width(l), kernel(l), c.convs_per_block);
  }
  for (int l = 0; l + 1 < L; ++l) {
    total += 8 * width(l) * width(l + 1) + width(l + 1);  // 2x strided down conv
    total += 8 * width(l + 1) * width(l) + width(l);      // 2x transposed up conv
    total += residual_block_params(2 * width(l), width(l), kernel(l), c.convs_per_block);
  }
  std::int64_t global_channels = width(0);
  if (c.use_swin_gce) {
    const std::int64_t E = c.swin.embed_dim;
    const std::int64_t hidden = static_cast<std::int64_t>(c.swin.mlp_ratio * E);
    const std::int64_t span = 2 * c.swin.window_size - 1;
    const std::int64_t taps = c.swin.reduce ? 8 : 1;
    total += taps * width(0) * E + E;  // embed
    for (int b = 0; b < c.swin.num_blocks; ++b) {
      total += 2 * E + 2 * E;                   // two layer norms
      total += 3 * E * E + 3 * E;               // qkv
      total += E * E + E;                       // output projection
      total += span * span * span * c.swin.num_heads;  // relative position bias
      total += E * hidden + hidden + hidden * E + E;   // MLP
    }
    total += taps * E * c.swin.out_channels + c.swin.out_channels;  // un-embed
    global_channels = c.swin.out_channels;
  }
  const std::int64_t F = c.fusion_channels;
  total += (width(0) + global_channels) * F + 2 * F;  // 1x1x1 conv without bias, BN
  total += conv_params(F, F, 3, true) + conv_params(F, c.out_channels, 1, true);
  return total;
}

}  // namespace strokeseg::testing

// Copyright (c) 2026, strokeseg contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <utility>
#include <vector>

#include "support/gradcheck.hpp"
#include "strokeseg/nn/network.hpp"

namespace strokeseg::testing {

struct FamilySample {
  std::string family;
  GradSample sample;
};

/// Finite-difference check of the full toy network (dropout off, train-mode
/// batch norm) on a (batch, 1, side, side, side) input, sampling parameters
/// from every layer family.
inline std::vector<FamilySample> network_gradient_samples(std::uint64_t seed, int per_param = 2,
                                                          std::int64_t batch = 2, std::int64_t side = 16,
                                                          double step = kFdStep) {
  nn::ModelConfig cfg = nn::ModelConfig::toy();
  cfg.dropout_rate = 0.0;
  nn::SegmentationNetwork net(cfg, seed);
  const nn::Tensor x = random_tensor({batch, 1, side, side, side}, seed + 1);
  Probe probe{[&] { return net.forward(x, nn::Mode::kTrain); }, [&](const nn::Tensor& dy) { net.backward(dy); }};
  GradChecker checker(probe, seed + 2, step);
  checker.run_backward(net.params());

  const std::vector<std::pair<std::string, std::string>> targets{
      {"conv", "unet.enc0.conv0.weight"},
      {"conv", "unet.dec1.conv1.weight"},
      {"conv", "unet.dec0.proj.bias"},
      {"conv", "unet.down0.weight"},
      {"conv", "unet.up1.weight"},
      {"batchnorm", "unet.enc1.bn0.weight"},
      {"batchnorm", "unet.dec0.bn1.bias"},
      {"prelu", "unet.enc0.prelu1.slope"},
      {"prelu", "unet.dec1.prelu0.slope"},
      {"layernorm", "swin.block0.norm1.weight"},
      {"layernorm", "swin.block1.norm2.bias"},
      {"attention", "swin.block0.attn.qkv.weight"},
      {"attention", "swin.block1.attn.proj.weight"},
      {"attention", "swin.block1.attn.relative_position_bias"},
      {"mlp", "swin.block0.mlp.fc1.weight"},
      {"mlp", "swin.block1.mlp.fc2.bias"},
      {"embed", "swin.embed.weight"},
      {"embed", "swin.unembed.weight"},
      {"fusion", "fusion.conv.weight"},
      {"fusion", "fusion.bn.weight"},
      {"head", "head.conv3.weight"},
      {"head", "head.conv1.bias"},
  };
  std::vector<FamilySample> out;
  for (const auto& [family, name] : targets) {
    for (const auto& s : checker.check_parameter(net.params().at(name), per_param)) out.push_back({family, s});
  }
  return out;
}

}  // namespace strokeseg::testing

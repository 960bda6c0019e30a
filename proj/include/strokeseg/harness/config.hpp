// Copyright (c) 2026, strokeseg contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"
#include "strokeseg/nn/network.hpp"
#include "strokeseg/nn/optimizer.hpp"
#include "strokeseg/preprocess.hpp"

namespace strokeseg::harness {

struct LossWeights {
  double dice = 1.0;
  double ce = 1.0;

  bool operator==(const LossWeights&) const = default;
};

struct TrainConfig {
  int epochs = 20;
  int batch_size = 2;
  nn::OptimizerConfig optimizer;
  LossWeights loss_weights;
  std::uint64_t seed = 0;
  int eval_every = 1;
  int max_steps = 0;  // 0 = no cap; otherwise stop after this many updates
  double train_fraction = 0.8;
  std::uint64_t split_seed = 0;
  nn::ModelConfig model = nn::ModelConfig::toy();
  preprocess::PipelineConfig pipeline;

  void validate() const;
};

/// Plain-text configuration: one `key = value` per line, `#` starts a
/// comment, unknown keys are errors. Lists are comma separated. Keys not
/// present keep their defaults. See config_keys() for the full list.
TrainConfig parse_config(const std::string& text);
TrainConfig load_config(const std::filesystem::path& path);

/// Every key with its current value, in documentation order.
std::vector<std::pair<std::string, std::string>> config_entries(const TrainConfig& cfg);
std::vector<std::string> config_keys();
/// Config file text that parses back to an equal config.
std::string to_config_text(const TrainConfig& cfg);
nlohmann::json to_json(const TrainConfig& cfg);

/// Keys whose values differ between two configs.
std::vector<std::string> config_diff(const TrainConfig& a, const TrainConfig& b);

}  // namespace strokeseg::harness

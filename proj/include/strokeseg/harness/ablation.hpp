// Copyright (c) 2026, strokeseg contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "strokeseg/harness/training.hpp"

namespace strokeseg::harness {

/// The single config field toggled between the arms of a pair:
///   kSwinGce:       model.use_swin_gce  (true = "on" arm)
///   kPreprocessing: pipeline.mode       (comprehensive = "on" arm)
enum class AblationAxis { kSwinGce, kPreprocessing };

const char* to_string(AblationAxis a);
AblationAxis parse_ablation_axis(const std::string& s);

/// The pair of configs for one seed; they differ only on the axis field.
std::pair<TrainConfig, TrainConfig> ablation_configs(const TrainConfig& base, AblationAxis axis, std::uint64_t seed);

struct AblationArm {
  TrainConfig config;
  metrics::MetricsReport report;
  TrainingHistory history;
};

struct AblationPair {
  std::uint64_t seed = 0;
  AblationArm on, off;
  std::vector<std::string> differing_keys;
  double delta_dsc = 0.0;                // on - off
  std::optional<double> delta_hd95;      // on - off, when both defined
};

struct AblationResult {
  AblationAxis axis = AblationAxis::kSwinGce;
  std::vector<AblationPair> pairs;
  double mean_dsc_on = 0.0, mean_dsc_off = 0.0, mean_delta_dsc = 0.0;
  std::optional<double> mean_hd95_on, mean_hd95_off, mean_delta_hd95;
  int training_runs = 0;

  nlohmann::json to_json() const;
  std::string summary() const;
};

using AblationProgressFn = std::function<void(const std::string& arm, std::uint64_t seed, const EpochRecord&)>;

/// Trains both arms for every seed on the raw dataset split by the base
/// config's split settings, preprocessing each arm with its own pipeline.
/// The held-out subjects are scored with the best-DSC weights of each run.
AblationResult run_ablation(const TrainConfig& base, AblationAxis axis, const std::vector<std::uint64_t>& seeds,
                            const synth::Dataset& raw, const AblationProgressFn& progress = {});

}  // namespace strokeseg::harness

// Copyright (c) 2026, strokeseg contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "strokeseg/harness/config.hpp"
#include "strokeseg/metrics.hpp"
#include "strokeseg/nn/network.hpp"
#include "strokeseg/synthdata.hpp"

namespace strokeseg::harness {

struct LossValue {
  double total = 0.0;
  double dice_loss = 0.0;  // 1 - mean soft dice over the batch
  double ce = 0.0;         // mean binary cross-entropy over all voxels
  nn::Tensor grad;         // d total / d logits
};

/// w_dice * soft-dice loss + w_ce * binary cross-entropy on logistic
/// probabilities. Soft dice is computed per sample with smoothing 1e-5 in
/// numerator and denominator, then averaged. target holds 0/1 values and
/// has the logits' shape (N, 1, X, Y, Z).
LossValue compound_loss(const nn::Tensor& logits, const nn::Tensor& target, const LossWeights& w);
LossValue compound_loss(const nn::Tensor& logits, const Mask& gt, const LossWeights& w);

/// Stacks masks into a (N, 1, X, Y, Z) 0/1 tensor.
nn::Tensor masks_to_tensor(const std::vector<const Mask*>& masks);
nn::Tensor volumes_to_tensor(const std::vector<const Volume*>& volumes);

struct EpochRecord {
  int epoch = 0;  // 1-based
  double train_loss = 0.0;
  std::optional<double> test_loss;
  std::optional<double> test_dsc;
  std::optional<double> test_hd95;
  double wall_seconds = 0.0;
  std::int64_t steps = 0;  // cumulative optimizer steps
};

struct TrainingHistory {
  std::vector<EpochRecord> records;

  nlohmann::json to_json() const;
  static TrainingHistory from_json(const nlohmann::json& j);
  std::string to_csv() const;
};

struct TrainResult {
  std::unique_ptr<nn::SegmentationNetwork> model;  // holds the best-DSC weights
  TrainingHistory history;
  int best_epoch = 0;               // 0 when no evaluation ran
  double best_dsc = 0.0;
  std::uint64_t final_checksum = 0; // parameters after the last step
  std::uint64_t best_checksum = 0;
  std::int64_t steps = 0;
};

using ProgressFn = std::function<void(const EpochRecord&)>;

/// Runs every subject through the preprocessing pipeline (augmentation is
/// applied on the fly during training, not here).
synth::Dataset prepare_dataset(const synth::Dataset& raw, const preprocess::PipelineConfig& cfg);

/// Mini-batch training with per-epoch seeded shuffling. The test set is
/// evaluated every eval_every epochs and on the final epoch.
TrainResult train(const TrainConfig& cfg, const synth::Dataset& train_set, const synth::Dataset& test_set,
                  const ProgressFn& progress = {});

struct Evaluation {
  metrics::MetricsReport report;
  double mean_loss = 0.0;
  std::vector<Mask> predictions;
};

/// Eval-mode forward per subject, threshold 0.5 on the logistic output.
Evaluation evaluate(nn::SegmentationNetwork& net, const synth::Dataset& data, const LossWeights& w = {});

/// Whole-volume prediction; the mask shares the image's geometry.
/// expected_shape, when given, must equal the image shape.
Mask predict(nn::SegmentationNetwork& net, const Volume& image, const std::optional<Index3>& expected_shape = {});

}  // namespace strokeseg::harness

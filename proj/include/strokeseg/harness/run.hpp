// Copyright (c) 2026, strokeseg contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <optional>
#include <vector>

#include "json.hpp"
#include "strokeseg/harness/report.hpp"
#include "strokeseg/harness/training.hpp"

namespace strokeseg::harness {

/// Everything a training run leaves behind. On disk:
///   config.txt    config echo (parses back to the same config)
///   run.json      seed, source hash, config, extra run facts
///   history.json  per-epoch records
///   metrics.json / metrics.csv   held-out evaluation (optional)
///   cases/<id>_{image,truth,pred}.nii.gz   inputs for overlay figures
struct RunRecord {
  TrainConfig config;
  TrainingHistory history;
  std::optional<metrics::MetricsReport> metrics;
  std::vector<OverlayCase> cases;
  nlohmann::json info = nlohmann::json::object();
};

void save_run(const RunRecord& run, const std::filesystem::path& dir);
RunRecord load_run(const std::filesystem::path& dir);

/// Run metadata common to all runs: seed, source hash, config.
nlohmann::json run_info(const TrainConfig& cfg);

}  // namespace strokeseg::harness

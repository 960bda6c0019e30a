// Copyright (c) 2026, strokeseg contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "strokeseg/volume.hpp"

namespace strokeseg::metrics {

/// 2|P n G| / (|P| + |G|). Both empty -> 1.0, exactly one empty -> 0.0.
double dice_score(const Mask& pred, const Mask& gt);

/// Foreground voxels with at least one 6-neighbor that is background or
/// outside the grid, as offsets in ascending order.
std::vector<std::size_t> boundary_voxels(const Mask& m);

/// Combined directed boundary distances {d(p, dG) : p in dP} followed by
/// {d(g, dP) : g in dG}, in mm between voxel centers. Empty when either
/// boundary is empty.
std::vector<double> directed_boundary_distances(const Mask& pred, const Mask& gt);

/// Linear interpolation between closest ranks: rank = q * (n - 1).
double percentile(std::vector<double> values, double q);

/// 95th percentile of the combined directed distances; nullopt when undefined.
std::optional<double> hd95(const Mask& pred, const Mask& gt);

/// Mean of the combined directed distances; nullopt when undefined.
std::optional<double> assd(const Mask& pred, const Mask& gt);

struct CaseMetrics {
  double dsc = 0.0;
  std::optional<double> hd95_mm;
  std::optional<double> assd_mm;
  std::size_t pred_voxels = 0;
  std::size_t gt_voxels = 0;
};

CaseMetrics evaluate_case(const Mask& pred, const Mask& gt);

struct Aggregate {
  double mean = 0.0;
  double median = 0.0;
  double std = 0.0;
  std::size_t defined = 0;
  std::size_t undefined = 0;
};

struct MetricsReport {
  std::vector<std::string> ids;
  std::vector<CaseMetrics> cases;
  Aggregate dsc;
  Aggregate hd95;
  Aggregate assd;

  void add(std::string id, const CaseMetrics& m);
  /// Recomputes the aggregates from the per-case rows.
  void finalize();

  /// One row per case: id,dsc,hd95_mm,assd_mm,pred_voxels,gt_voxels
  /// (undefined distances are written as "nan").
  std::string to_csv() const;
  /// {"cases": [...], "aggregates": {...}}; undefined distances are null.
  std::string to_json() const;
  static MetricsReport from_json(const std::string& text);
};

}  // namespace strokeseg::metrics

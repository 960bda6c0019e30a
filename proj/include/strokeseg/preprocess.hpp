// Copyright (c) 2026, strokeseg contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "strokeseg/volume.hpp"

namespace strokeseg::preprocess {

enum class Interp { kNearest, kLinear };
enum class PipelineMode { kComprehensive, kBasic };

const char* to_string(PipelineMode mode);
PipelineMode parse_pipeline_mode(const std::string& s);

struct BiasCorrectionConfig {
  int max_iterations = 50;
  double smoothing_scale_mm = 40.0;  // FWHM of the Gaussian low-pass
  double convergence_tol = 1e-3;  // on max |log-field update| per iteration
  double epsilon = 1e-6;
  double outlier_threshold = 3.0;  // robust z-score beyond which voxels do not inform the field
  bool otsu_mask = true;           // foreground = above the Otsu threshold; otherwise v > epsilon

  void validate() const;
};

struct AugmentationConfig {
  double flip_probability_per_axis = 0.5;
  double max_rotation_degrees = 10.0;
  std::pair<double, double> affine_scale_range{0.9, 1.1};
  double affine_translation_mm = 4.0;

  void validate() const;
};

struct PipelineConfig {
  PipelineMode mode = PipelineMode::kComprehensive;
  Real3 target_spacing{1.0, 1.0, 1.0};
  Index3 target_shape{32, 32, 32};
  BiasCorrectionConfig bias_correction;
  AugmentationConfig augmentation;
  bool augment_enabled = false;
  std::uint64_t augment_seed = 0;

  void validate() const;
};

/// Regrids to `target_spacing`. Output shape is round(shape * spacing /
/// target_spacing) (half away from zero, at least 1). The field of view is
/// kept: voxel i of the output samples input coordinate
/// (i + 0.5) * target / spacing - 0.5, clamped to the input grid.
Volume resample(const Volume& v, const Real3& target_spacing, Interp interp);
Mask resample(const Mask& m, const Real3& target_spacing);

/// Regrids to `target_shape` over the same field of view; spacing is scaled
/// by shape / target_shape.
Volume resize(const Volume& v, const Index3& target_shape, Interp interp);
Mask resize(const Mask& m, const Index3& target_shape);

struct BiasCorrectionResult {
  Volume corrected;
  Volume field;  // strictly positive; corrected * field reproduces the input
  int iterations = 0;
  bool converged = false;
};

/// Multiplicative bias-field removal in the log domain: the low-frequency part
/// of log(v + eps) over the foreground is estimated by repeated
/// masked Gaussian smoothing at `smoothing_scale_mm`, accumulated into the log
/// field, exponentiated, scaled to mean 1 over the foreground, and divided out.
/// Each pass fits only voxels within `outlier_threshold` robust standard
/// deviations (median / MAD) of the current log intensity; the rest receive
/// the smoothed field of their neighbors. The foreground is v > eps, further
/// restricted to v above the Otsu threshold when `otsu_mask` is set, so that
/// low-level background noise does not take part in the fit.
/// Throws kDegenerateInput for an all-zero volume and kInvalidArgument for
/// negative intensities.
BiasCorrectionResult bias_field_correct(const Volume& v, const BiasCorrectionConfig& cfg);

/// Min-max scaling to [0, 1]; a constant image maps to all zeros.
Volume normalize_intensity(const Volume& v);

struct AugmentResult {
  Volume image;
  Mask mask;
};

/// Random flip / rotation / scale / translation applied identically to image
/// (linear) and mask (nearest). Voxels mapped from outside the grid are 0.
AugmentResult augment(const Volume& image, const Mask& mask, const AugmentationConfig& cfg, std::uint64_t seed);

/// Mirrors the volume along `axis` (0, 1, 2).
Volume flip(const Volume& v, int axis);

struct PipelineResult {
  Subject subject;
  std::vector<std::string> trace;  // executed stage names, in order
};

/// Stage order for a mode: "replace_nans_with_zero", "resample",
/// "bias_field_correct", "normalize_intensity", "resize", "augment".
std::vector<std::string> canonical_stages(const PipelineConfig& cfg);

PipelineResult run_pipeline(const Subject& s, const PipelineConfig& cfg);

/// One JSON object per line: {"subject": ..., "step": i, "stage": ...}.
std::string trace_to_json_lines(const std::string& subject_id, const std::vector<std::string>& trace);

/// Coefficient of variation (std / mean) of `v` over the voxels of `region`.
double coefficient_of_variation(const Volume& v, const Mask& region);

}  // namespace strokeseg::preprocess

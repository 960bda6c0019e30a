// Copyright (c) 2026, strokeseg contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "strokeseg/volume.hpp"

namespace strokeseg::synth {

/// Laterality relative to the mid-plane of the first (x) axis:
/// left is the low-x half, right the high-x half.
enum class Hemisphere { kLeft, kRight, kBoth, kNone };

const char* to_string(Hemisphere h);
Hemisphere parse_hemisphere(const std::string& s);

struct TissueIntensities {
  double background = 0.0;
  double brain = 1.0;
  double lesion = 0.35;
};

struct PhantomSpec {
  Index3 shape{32, 32, 32};
  Real3 spacing{1.5, 1.5, 1.5};
  int lesion_count = 1;
  std::pair<double, double> lesion_radius_range_mm{3.0, 6.0};
  Hemisphere hemisphere = Hemisphere::kLeft;
  double bias_field_amplitude = 0.3;  // peak-to-peak gain over the brain, around 1
  double noise_std = 0.02;
  TissueIntensities tissue;

  /// Throws kInvalidArgument when fields are out of range, including
  /// hemisphere none without lesion_count 0 (and vice versa), or "both"
  /// with fewer than two lesions.
  void validate() const;
};

struct LesionInfo {
  Real3 center_mm{};  // relative to the grid center
  double radius_mm = 0.0;
  Hemisphere side = Hemisphere::kLeft;
  std::size_t voxels = 0;
};

/// A generated subject together with its analytic ground truth.
struct Phantom {
  Subject subject;
  Mask brain;         // brain ellipsoid support
  Volume bias_field;  // multiplicative gain applied to the clean image
  std::vector<LesionInfo> lesions;
};

/// Brain ellipsoid with spherical lesions, multiplied by a smooth random gain
/// field and corrupted by Gaussian noise inside the brain. Lesions stay on
/// their hemisphere, strictly inside the brain, and never touch each other
/// (26-neighborhood), so the mask has exactly lesion_count components.
/// Placement uses rejection sampling, at most 1000 attempts per lesion.
Phantom generate_phantom_with_truth(const PhantomSpec& spec, std::uint64_t seed, const std::string& id = "phantom");
Subject generate_phantom(const PhantomSpec& spec, std::uint64_t seed, const std::string& id = "phantom");

/// Builds the template for a scenario name such as "single-left",
/// "multiple-both" or "none", starting from `base` geometry and tissue values.
PhantomSpec scenario_spec(const std::string& scenario, const PhantomSpec& base = {}, int multiple_count = 3);

struct ScenarioTemplate {
  std::string label;
  PhantomSpec spec;
  double weight = 1.0;
};

/// Parses "single-left:2,multiple-both:1,none:1" into templates derived from `base`.
std::vector<ScenarioTemplate> parse_mix(const std::string& mix, const PhantomSpec& base = {});

struct Dataset {
  std::vector<Subject> subjects;
  std::vector<std::string> scenarios;  // per subject; empty for ingested data
  std::vector<std::uint64_t> seeds;    // per subject; 0 for ingested data
  std::string provenance;

  std::size_t size() const { return subjects.size(); }
  /// Throws when ids repeat or per-subject metadata lengths disagree.
  void validate() const;
};

Dataset generate_dataset(int n, const std::vector<ScenarioTemplate>& mix, std::uint64_t seed);

/// Seeded shuffle, then the first floor(train_fraction * n) subjects train.
std::pair<Dataset, Dataset> split_dataset(const Dataset& d, double train_fraction, std::uint64_t seed);

enum class LesionMultiplicity { kNone, kSingle, kMultiple };
const char* to_string(LesionMultiplicity m);

struct LesionDistribution {
  std::map<std::pair<LesionMultiplicity, Hemisphere>, int> counts;  // lesioned subjects only
  int none = 0;
  int total = 0;
  std::map<Hemisphere, double> percent_by_side;  // over lesioned subjects; empty if none

  int count(LesionMultiplicity m, Hemisphere h) const;
};

struct Components {
  std::vector<int> labels;  // 0 = background, 1..count
  int count = 0;
  std::vector<Real3> centroids;  // voxel coordinates, one per component
  std::vector<std::size_t> sizes;
};

/// Connected components of the foreground under 26-connectivity.
Components label_components(const Mask& m);

/// Scenario label ("single-left", "multiple-both", "none", ...) for a mask,
/// from its component count and the side of each component centroid.
std::string classify_mask(const Mask& m);

LesionDistribution dataset_statistics(const Dataset& d);

/// Writes <dir>/<id>_image.nii.gz, <dir>/<id>_mask.nii.gz and manifest.json.
void save_dataset(const Dataset& d, const std::filesystem::path& dir);

/// Reads a manifest.json directory. Entries may name volumes in any
/// supported format; "mask" is optional.
Dataset load_dataset(const std::filesystem::path& dir);

}  // namespace strokeseg::synth

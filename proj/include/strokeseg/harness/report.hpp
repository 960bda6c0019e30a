// Copyright (c) 2026, strokeseg contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "strokeseg/harness/training.hpp"
#include "strokeseg/metrics.hpp"
#include "strokeseg/volume.hpp"

namespace strokeseg::harness {

/// Published reference scores (DSC on the same benchmark) used as the
/// comparison table; scoring is "2D", "3D" or "3D*".
struct ComparisonRow {
  std::string model;
  double dsc = 0.0;
  std::string scoring;
};

const std::vector<ComparisonRow>& comparison_fixture();

/// CSV with header model,dsc,scoring,source. Fixture rows come first; the
/// run's row is appended only when run_dsc is set.
std::string comparison_csv(const std::optional<double>& run_dsc, const std::string& run_label = "this run");

/// 8-bit RGB raster with a few drawing primitives.
class Canvas {
 public:
  struct Rgb {
    std::uint8_t r = 0, g = 0, b = 0;
  };

  Canvas(int width, int height, Rgb background = {255, 255, 255});

  int width() const { return w_; }
  int height() const { return h_; }
  void set(int x, int y, Rgb c);
  Rgb get(int x, int y) const;
  void fill_rect(int x0, int y0, int x1, int y1, Rgb c);
  void line(int x0, int y0, int x1, int y1, Rgb c);
  /// Draws ASCII text with its top-left corner at (x, y); returns the width.
  int text(int x, int y, const std::string& s, Rgb c);
  void save_png(const std::filesystem::path& path) const;

 private:
  int w_, h_;
  std::vector<std::uint8_t> px_;
};

/// Four panels: train loss, test loss, test DSC, test HD95 against epoch.
/// Epochs without an evaluation leave gaps in the test curves.
void plot_training_curves(const TrainingHistory& history, const std::filesystem::path& png);

struct OverlayCase {
  std::string id;
  Volume image;
  Mask truth;
  Mask prediction;
};

/// Mid-axial slice as four tiles: image, ground truth, prediction, and the
/// boundary comparison (truth red, prediction green, agreement yellow).
void render_overlay(const OverlayCase& c, const std::filesystem::path& png);

struct ReportFiles {
  std::filesystem::path figure;
  std::filesystem::path curves_csv;
  std::filesystem::path comparison_csv;
  std::vector<std::filesystem::path> overlays;
};

/// Writes curves.png, curves.csv, comparison.csv and overlays/<id>.png.
/// The comparison gets a run row only when metrics has at least one case.
ReportFiles write_report(const TrainingHistory& history, const metrics::MetricsReport* metrics,
                         const std::vector<OverlayCase>& cases, const std::filesystem::path& out_dir);

}  // namespace strokeseg::harness

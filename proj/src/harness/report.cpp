// Copyright (c) 2026, strokeseg contributors
// SPDX-License-Identifier: Apache-2.0

#include "strokeseg/harness/report.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <memory>

#include "font_data.hpp"
#include "strokeseg/error.hpp"

namespace strokeseg::harness {
namespace {

using Rgb = Canvas::Rgb;

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kUnwritablePath, "cannot write " + path.string());
  out << text;
  if (!out) throw Error(ErrorCode::kUnwritablePath, "failed writing " + path.string());
}

void ensure_dir(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir)) {
    throw Error(ErrorCode::kUnwritablePath, "cannot create output directory " + dir.string());
  }
}

struct Series {
  std::string title;
  std::vector<std::pair<double, double>> points;  // (epoch, value)
  std::optional<std::pair<double, double>> fixed_range;
};

void draw_panel(Canvas& cv, int x0, int y0, int w, int h, const Series& s, int epochs) {
  const Rgb axis{60, 60, 60}, curve{31, 119, 180}, grid{225, 225, 225};
  const int left = x0 + 64, right = x0 + w - 14, top = y0 + 28, bottom = y0 + h - 32;
  cv.text(x0 + (w - static_cast<int>(s.title.size()) * font::kWidth) / 2, y0 + 8, s.title, {0, 0, 0});

  double lo, hi;
  if (s.fixed_range) {
    std::tie(lo, hi) = *s.fixed_range;
  } else if (s.points.empty()) {
    lo = 0.0;
    hi = 1.0;
  } else {
    lo = hi = s.points.front().second;
    for (const auto& p : s.points) {
      lo = std::min(lo, p.second);
      hi = std::max(hi, p.second);
    }
    const double pad = hi > lo ? 0.05 * (hi - lo) : std::max(0.5, 0.1 * std::abs(hi));
    lo -= pad;
    hi += pad;
  }
  const double xlo = 1.0, xhi = std::max(2, epochs);
  auto px = [&](double e) { return left + static_cast<int>(std::lround((e - xlo) / (xhi - xlo) * (right - left))); };
  auto py = [&](double v) { return bottom - static_cast<int>(std::lround((v - lo) / (hi - lo) * (bottom - top))); };

  for (int k = 0; k <= 4; ++k) {
    const double v = lo + (hi - lo) * k / 4.0;
    cv.line(left, py(v), right, py(v), grid);
    const std::string label = fmt("%.3g", v);
    cv.text(left - 6 - static_cast<int>(label.size()) * font::kWidth, py(v) - font::kHeight / 2, label, axis);
  }
  cv.line(left, top, left, bottom, axis);
  cv.line(left, bottom, right, bottom, axis);
  const std::string first = "1", last = std::to_string(std::max(1, epochs));
  cv.text(px(1.0) - font::kWidth / 2, bottom + 4, first, axis);
  cv.text(px(std::max(1, epochs)) - static_cast<int>(last.size()) * font::kWidth / 2, bottom + 4, last, axis);
  cv.text((left + right) / 2 - 2 * font::kWidth, bottom + 16, "epoch", axis);

  if (s.points.empty()) {
    cv.text((left + right) / 2 - 3 * font::kWidth, (top + bottom) / 2, "no data", axis);
    return;
  }
  for (std::size_t i = 0; i < s.points.size(); ++i) {
    const int x = px(s.points[i].first), y = py(s.points[i].second);
    if (i > 0) cv.line(px(s.points[i - 1].first), py(s.points[i - 1].second), x, y, curve);
    cv.fill_rect(x - 1, y - 1, x + 1, y + 1, curve);
  }
}

std::vector<std::uint8_t> slice_mask(const Mask& m, int z) {
  const auto [nx, ny, nz] = m.shape();
  (void)nz;
  std::vector<std::uint8_t> out(static_cast<std::size_t>(nx) * ny);
  for (int y = 0; y < ny; ++y)
    for (int x = 0; x < nx; ++x) out[static_cast<std::size_t>(y) * nx + x] = m.at(x, y, z);
  return out;
}

std::vector<std::uint8_t> slice_boundary(const std::vector<std::uint8_t>& s, int nx, int ny) {
  std::vector<std::uint8_t> out(s.size(), 0);
  auto on = [&](int x, int y) { return x >= 0 && y >= 0 && x < nx && y < ny && s[static_cast<std::size_t>(y) * nx + x]; };
  for (int y = 0; y < ny; ++y)
    for (int x = 0; x < nx; ++x)
      if (on(x, y) && !(on(x - 1, y) && on(x + 1, y) && on(x, y - 1) && on(x, y + 1)))
        out[static_cast<std::size_t>(y) * nx + x] = 1;
  return out;
}

Rgb blend(Rgb a, Rgb b, double t) {
  auto mix = [t](std::uint8_t u, std::uint8_t v) {
    return static_cast<std::uint8_t>(std::lround((1.0 - t) * u + t * v));
  };
  return {mix(a.r, b.r), mix(a.g, b.g), mix(a.b, b.b)};
}

}  // namespace

// ---------------------------------------------------------------- comparison table

const std::vector<ComparisonRow>& comparison_fixture() {
  static const std::vector<ComparisonRow> rows = {
      {"X-Net", 0.313, "2D"},
      {"UNETR", 0.347, "3D"},
      {"SwinUnet", 0.448, "2D"},
      {"Residual U-Net", 0.504, "3D"},
      {"3D-ResU-Net", 0.512, "3D"},
      {"SegNet", 0.533, "2D"},
      {"PSPNet", 0.580, "2D"},
      {"Residual U-Net (ICI loss)", 0.581, "3D"},
      {"U-net Transformer", 0.583, "2D"},
      {"HarDNet", 0.591, "2D"},
      {"U-Net", 0.598, "2D"},
      {"Ensemble (PP)", 0.667, "3D*"},
      {"LKA-ED", 0.678, "3D*"},
      {"LKA-E", 0.682, "3D*"},
      {"HCSNet", 0.697, "3D*"},
      {"SQMLP-net", 0.709, "3D*"},
  };
  return rows;
}

std::string comparison_csv(const std::optional<double>& run_dsc, const std::string& run_label) {
  auto quote = [](const std::string& s) {
    return s.find_first_of(",\"") == std::string::npos ? s : "\"" + s + "\"";
  };
  std::string out = "model,dsc,scoring,source\n";
  for (const auto& r : comparison_fixture()) out += quote(r.model) + "," + fmt("%.3f", r.dsc) + "," + r.scoring + ",published\n";
  if (run_dsc) out += quote(run_label) + "," + fmt("%.4f", *run_dsc) + ",3D,measured\n";
  return out;
}

// ---------------------------------------------------------------- Canvas

Canvas::Canvas(int width, int height, Rgb bg) : w_(width), h_(height) {
  if (width < 1 || height < 1) throw Error(ErrorCode::kInvalidArgument, "canvas size must be positive");
  px_.resize(static_cast<std::size_t>(width) * height * 3);
  for (std::size_t i = 0; i < px_.size(); i += 3) {
    px_[i] = bg.r;
    px_[i + 1] = bg.g;
    px_[i + 2] = bg.b;
  }
}

void Canvas::set(int x, int y, Rgb c) {
  if (x < 0 || y < 0 || x >= w_ || y >= h_) return;
  const std::size_t i = (static_cast<std::size_t>(y) * w_ + x) * 3;
  px_[i] = c.r;
  px_[i + 1] = c.g;
  px_[i + 2] = c.b;
}

Canvas::Rgb Canvas::get(int x, int y) const {
  const std::size_t i = (static_cast<std::size_t>(y) * w_ + x) * 3;
  return {px_[i], px_[i + 1], px_[i + 2]};
}

void Canvas::fill_rect(int x0, int y0, int x1, int y1, Rgb c) {
  for (int y = std::min(y0, y1); y <= std::max(y0, y1); ++y)
    for (int x = std::min(x0, x1); x <= std::max(x0, x1); ++x) set(x, y, c);
}

void Canvas::line(int x0, int y0, int x1, int y1, Rgb c) {
  const int dx = std::abs(x1 - x0), dy = -std::abs(y1 - y0);
  const int sx = x0 < x1 ? 1 : -1, sy = y0 < y1 ? 1 : -1;
  int err = dx + dy;
  while (true) {
    set(x0, y0, c);
    if (x0 == x1 && y0 == y1) break;
    const int e2 = 2 * err;
    if (e2 >= dy) {
      err += dy;
      x0 += sx;
    }
    if (e2 <= dx) {
      err += dx;
      y0 += sy;
    }
  }
}

int Canvas::text(int x, int y, const std::string& s, Rgb c) {
  int cx = x;
  for (char ch : s) {
    const int code = static_cast<unsigned char>(ch);
    if (code >= 32 && code < 127) {
      const auto& glyph = font::kGlyphs[code - 32];
      for (int row = 0; row < font::kHeight; ++row)
        for (int col = 0; col < font::kWidth; ++col)
          if (glyph[row] >> col & 1) set(cx + col, y + row, c);
    }
    cx += font::kWidth;
  }
  return cx - x;
}

void Canvas::save_png(const std::filesystem::path& path) const {
  std::unique_ptr<FILE, int (*)(FILE*)> fp(std::fopen(path.string().c_str(), "wb"), &std::fclose);
  if (!fp) throw Error(ErrorCode::kUnwritablePath, "cannot write " + path.string());
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    throw Error(ErrorCode::kUnwritablePath, "png encoder unavailable for " + path.string());
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw Error(ErrorCode::kUnwritablePath, "failed encoding " + path.string());
  }
  png_init_io(png, fp.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(w_), static_cast<png_uint_32>(h_), 8, PNG_COLOR_TYPE_RGB,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int y = 0; y < h_; ++y) {
    png_write_row(png, const_cast<png_bytep>(px_.data() + static_cast<std::size_t>(y) * w_ * 3));
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

// ---------------------------------------------------------------- figures

void plot_training_curves(const TrainingHistory& history, const std::filesystem::path& png) {
  Series s[4] = {{"train loss", {}, {}}, {"test loss", {}, {}}, {"test DSC", {}, std::make_pair(0.0, 1.0)},
                 {"test HD95 (mm)", {}, {}}};
  int epochs = 0;
  for (const auto& r : history.records) {
    const double e = r.epoch;
    epochs = std::max(epochs, r.epoch);
    s[0].points.emplace_back(e, r.train_loss);
    if (r.test_loss) s[1].points.emplace_back(e, *r.test_loss);
    if (r.test_dsc) s[2].points.emplace_back(e, *r.test_dsc);
    if (r.test_hd95) s[3].points.emplace_back(e, *r.test_hd95);
  }
  constexpr int kPanelW = 420, kPanelH = 300;
  Canvas cv(2 * kPanelW, 2 * kPanelH);
  for (int i = 0; i < 4; ++i) draw_panel(cv, (i % 2) * kPanelW, (i / 2) * kPanelH, kPanelW, kPanelH, s[i], epochs);
  cv.save_png(png);
}

void render_overlay(const OverlayCase& c, const std::filesystem::path& png) {
  if (!same_geometry(c.image.geometry(), c.truth.geometry()) ||
      !same_geometry(c.image.geometry(), c.prediction.geometry())) {
    throw Error(ErrorCode::kGeometryMismatch, "overlay '" + c.id + "': image and masks differ in geometry");
  }
  const auto [nx, ny, nz] = c.image.shape();
  const int z = nz / 2;
  const int scale = std::max(1, 160 / std::max(nx, ny));
  const int tw = nx * scale, th = ny * scale, pad = 8, header = 22;
  Canvas cv(4 * tw + 5 * pad, th + header + pad, {0, 0, 0});

  double lo = c.image.at(0, 0, z), hi = lo;
  for (int y = 0; y < ny; ++y)
    for (int x = 0; x < nx; ++x) {
      lo = std::min(lo, c.image.at(x, y, z));
      hi = std::max(hi, c.image.at(x, y, z));
    }
  const auto gt = slice_mask(c.truth, z), pr = slice_mask(c.prediction, z);
  const auto gtb = slice_boundary(gt, nx, ny), prb = slice_boundary(pr, nx, ny);
  const Rgb red{230, 40, 40}, green{40, 210, 60}, yellow{250, 230, 40}, white{235, 235, 235};
  const char* titles[4] = {"image", "ground truth", "prediction", "boundaries"};

  for (int tile = 0; tile < 4; ++tile) {
    const int ox = pad + tile * (tw + pad), oy = header;
    cv.text(ox, 5, titles[tile], white);
    for (int y = 0; y < ny; ++y)
      for (int x = 0; x < nx; ++x) {
        const double v = hi > lo ? (c.image.at(x, y, z) - lo) / (hi - lo) : 0.0;
        const auto g = static_cast<std::uint8_t>(std::lround(255.0 * v));
        Rgb col{g, g, g};
        const std::size_t i = static_cast<std::size_t>(y) * nx + x;
        if (tile == 1 && gt[i]) col = blend(col, red, 0.55);
        if (tile == 2 && pr[i]) col = blend(col, green, 0.55);
        if (tile == 3) {
          if (gtb[i] && prb[i]) {
            col = yellow;
          } else if (gtb[i]) {
            col = red;
          } else if (prb[i]) {
            col = green;
          }
        }
        // Image rows are drawn with y increasing downwards.
        cv.fill_rect(ox + x * scale, oy + (ny - 1 - y) * scale, ox + (x + 1) * scale - 1,
                     oy + (ny - y) * scale - 1, col);
      }
  }
  cv.save_png(png);
}

ReportFiles write_report(const TrainingHistory& history, const metrics::MetricsReport* metrics,
                         const std::vector<OverlayCase>& cases, const std::filesystem::path& out_dir) {
  ensure_dir(out_dir);
  ReportFiles files;
  files.figure = out_dir / "curves.png";
  files.curves_csv = out_dir / "curves.csv";
  files.comparison_csv = out_dir / "comparison.csv";
  plot_training_curves(history, files.figure);
  write_text(files.curves_csv, history.to_csv());
  std::optional<double> run_dsc;
  if (metrics && !metrics->cases.empty()) run_dsc = metrics->dsc.mean;
  write_text(files.comparison_csv, comparison_csv(run_dsc));
  if (!cases.empty()) {
    ensure_dir(out_dir / "overlays");
    for (const auto& c : cases) {
      files.overlays.push_back(out_dir / "overlays" / (c.id + ".png"));
      render_overlay(c, files.overlays.back());
    }
  }
  return files;
}

}  // namespace strokeseg::harness

// Copyright (c) 2026, strokeseg contributors
// SPDX-License-Identifier: Apache-2.0

#include "strokeseg/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "json.hpp"
#include "strokeseg/error.hpp"

namespace strokeseg::metrics {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void require_same_geometry(const Mask& a, const Mask& b, const char* op) {
  if (!same_geometry(a.geometry(), b.geometry())) {
    throw Error(ErrorCode::kGeometryMismatch, std::string(op) + ": masks have different geometry");
  }
}

// Exact 1D squared distance transform (lower envelope of parabolas) along a
// line with physical sample spacing `h`. f holds squared distances so far.
void edt_line(const double* f, double* d, int n, double h, std::vector<int>& v, std::vector<double>& z) {
  v.resize(n);
  z.resize(n + 1);
  int k = -1;
  for (int q = 0; q < n; ++q) {
    if (f[q] == kInf) continue;
    const double pq = q * h;
    while (k >= 0) {
      const double pv = v[k] * h;
      const double s = ((f[q] + pq * pq) - (f[v[k]] + pv * pv)) / (2.0 * (pq - pv));
      if (s <= z[k]) {
        --k;
      } else {
        break;
      }
    }
    ++k;
    v[k] = q;
    if (k == 0) {
      z[k] = -kInf;
    } else {
      const double pv = v[k - 1] * h;
      z[k] = ((f[q] + pq * pq) - (f[v[k - 1]] + pv * pv)) / (2.0 * (pq - pv));
    }
    z[k + 1] = kInf;
  }
  if (k < 0) {
    std::fill(d, d + n, kInf);
    return;
  }
  int j = 0;
  for (int q = 0; q < n; ++q) {
    while (z[j + 1] < q * h) ++j;
    const double diff = (q - v[j]) * h;
    d[q] = diff * diff + f[v[j]];
  }
}

// Squared Euclidean distance (mm^2) from every voxel center to the nearest
// voxel in `sites`.
std::vector<double> squared_distance_map(const Geometry& g, const std::vector<std::size_t>& sites) {
  std::vector<double> dist(g.voxel_count(), kInf);
  for (std::size_t s : sites) dist[s] = 0.0;
  const int nx = g.shape[0], ny = g.shape[1], nz = g.shape[2];
  const int longest = std::max({nx, ny, nz});
  std::vector<double> in(longest), out(longest), z;
  std::vector<int> v;
  for (int z_ = 0; z_ < nz; ++z_)
    for (int y = 0; y < ny; ++y) {
      const std::size_t base = g.offset(0, y, z_);
      for (int x = 0; x < nx; ++x) in[x] = dist[base + x];
      edt_line(in.data(), out.data(), nx, g.spacing[0], v, z);
      for (int x = 0; x < nx; ++x) dist[base + x] = out[x];
    }
  for (int z_ = 0; z_ < nz; ++z_)
    for (int x = 0; x < nx; ++x) {
      for (int y = 0; y < ny; ++y) in[y] = dist[g.offset(x, y, z_)];
      edt_line(in.data(), out.data(), ny, g.spacing[1], v, z);
      for (int y = 0; y < ny; ++y) dist[g.offset(x, y, z_)] = out[y];
    }
  for (int y = 0; y < ny; ++y)
    for (int x = 0; x < nx; ++x) {
      for (int z_ = 0; z_ < nz; ++z_) in[z_] = dist[g.offset(x, y, z_)];
      edt_line(in.data(), out.data(), nz, g.spacing[2], v, z);
      for (int z_ = 0; z_ < nz; ++z_) dist[g.offset(x, y, z_)] = out[z_];
    }
  return dist;
}

Aggregate aggregate(std::vector<double> values, std::size_t undefined) {
  Aggregate a;
  a.defined = values.size();
  a.undefined = undefined;
  if (values.empty()) return a;
  a.mean = std::accumulate(values.begin(), values.end(), 0.0) / values.size();
  double ss = 0.0;
  for (double v : values) ss += (v - a.mean) * (v - a.mean);
  a.std = std::sqrt(ss / values.size());
  a.median = percentile(std::move(values), 0.5);
  return a;
}

nlohmann::json optional_json(const std::optional<double>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

nlohmann::json aggregate_json(const Aggregate& a) {
  return {{"mean", a.mean}, {"median", a.median}, {"std", a.std}, {"defined", a.defined}, {"undefined", a.undefined}};
}

}  // namespace

double dice_score(const Mask& pred, const Mask& gt) {
  require_same_geometry(pred, gt, "dice_score");
  std::size_t p = 0, g = 0, both = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    p += pred[i];
    g += gt[i];
    both += pred[i] & gt[i];
  }
  if (p + g == 0) return 1.0;
  return 2.0 * static_cast<double>(both) / static_cast<double>(p + g);
}

std::vector<std::size_t> boundary_voxels(const Mask& m) {
  const Geometry& g = m.geometry();
  std::vector<std::size_t> out;
  static constexpr int kNeighbors[6][3] = {{1, 0, 0}, {-1, 0, 0}, {0, 1, 0}, {0, -1, 0}, {0, 0, 1}, {0, 0, -1}};
  for (int z = 0; z < g.shape[2]; ++z)
    for (int y = 0; y < g.shape[1]; ++y)
      for (int x = 0; x < g.shape[0]; ++x) {
        if (!m.at(x, y, z)) continue;
        for (const auto& n : kNeighbors) {
          const int xx = x + n[0], yy = y + n[1], zz = z + n[2];
          if (!g.contains(xx, yy, zz) || !m.at(xx, yy, zz)) {
            out.push_back(g.offset(x, y, z));
            break;
          }
        }
      }
  return out;
}

std::vector<double> directed_boundary_distances(const Mask& pred, const Mask& gt) {
  require_same_geometry(pred, gt, "directed_boundary_distances");
  const auto bp = boundary_voxels(pred);
  const auto bg = boundary_voxels(gt);
  if (bp.empty() || bg.empty()) return {};
  const auto to_gt = squared_distance_map(gt.geometry(), bg);
  const auto to_pred = squared_distance_map(pred.geometry(), bp);
  std::vector<double> d;
  d.reserve(bp.size() + bg.size());
  for (std::size_t p : bp) d.push_back(std::sqrt(to_gt[p]));
  for (std::size_t q : bg) d.push_back(std::sqrt(to_pred[q]));
  return d;
}

double percentile(std::vector<double> values, double q) {
  if (values.empty()) throw Error(ErrorCode::kInvalidArgument, "percentile of an empty set");
  std::sort(values.begin(), values.end());
  const double rank = q * (values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(rank));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  const double t = rank - lo;
  return values[lo] + t * (values[hi] - values[lo]);
}

std::optional<double> hd95(const Mask& pred, const Mask& gt) {
  auto d = directed_boundary_distances(pred, gt);
  if (d.empty()) return std::nullopt;
  return percentile(std::move(d), 0.95);
}

// Sums in sorted order so the result does not depend on argument order.
static double mean_distance(std::vector<double> d) {
  std::sort(d.begin(), d.end());
  return std::accumulate(d.begin(), d.end(), 0.0) / static_cast<double>(d.size());
}

std::optional<double> assd(const Mask& pred, const Mask& gt) {
  auto d = directed_boundary_distances(pred, gt);
  if (d.empty()) return std::nullopt;
  return mean_distance(std::move(d));
}

CaseMetrics evaluate_case(const Mask& pred, const Mask& gt) {
  CaseMetrics m;
  m.dsc = dice_score(pred, gt);
  const auto d = directed_boundary_distances(pred, gt);
  if (!d.empty()) {
    m.assd_mm = mean_distance(d);
    m.hd95_mm = percentile(d, 0.95);
  }
  m.pred_voxels = pred.count();
  m.gt_voxels = gt.count();
  return m;
}

void MetricsReport::add(std::string id, const CaseMetrics& m) {
  ids.push_back(std::move(id));
  cases.push_back(m);
  finalize();
}

void MetricsReport::finalize() {
  std::vector<double> d, h, a;
  std::size_t h_undef = 0, a_undef = 0;
  for (const auto& c : cases) {
    d.push_back(c.dsc);
    if (c.hd95_mm) h.push_back(*c.hd95_mm); else ++h_undef;
    if (c.assd_mm) a.push_back(*c.assd_mm); else ++a_undef;
  }
  dsc = aggregate(std::move(d), 0);
  hd95 = aggregate(std::move(h), h_undef);
  assd = aggregate(std::move(a), a_undef);
}

std::string MetricsReport::to_csv() const {
  std::ostringstream os;
  os.precision(17);
  os << "id,dsc,hd95_mm,assd_mm,pred_voxels,gt_voxels\n";
  for (std::size_t i = 0; i < cases.size(); ++i) {
    const auto& c = cases[i];
    os << ids[i] << "," << c.dsc << ",";
    if (c.hd95_mm) os << *c.hd95_mm; else os << "nan";
    os << ",";
    if (c.assd_mm) os << *c.assd_mm; else os << "nan";
    os << "," << c.pred_voxels << "," << c.gt_voxels << "\n";
  }
  return os.str();
}

std::string MetricsReport::to_json() const {
  nlohmann::json j;
  j["cases"] = nlohmann::json::array();
  for (std::size_t i = 0; i < cases.size(); ++i) {
    const auto& c = cases[i];
    j["cases"].push_back({{"id", ids[i]},
                          {"dsc", c.dsc},
                          {"hd95_mm", optional_json(c.hd95_mm)},
                          {"assd_mm", optional_json(c.assd_mm)},
                          {"pred_voxels", c.pred_voxels},
                          {"gt_voxels", c.gt_voxels}});
  }
  j["aggregates"] = {{"dsc", aggregate_json(dsc)}, {"hd95_mm", aggregate_json(hd95)}, {"assd_mm", aggregate_json(assd)}};
  return j.dump(2);
}

MetricsReport MetricsReport::from_json(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  MetricsReport r;
  for (const auto& c : j.at("cases")) {
    CaseMetrics m;
    m.dsc = c.at("dsc").get<double>();
    if (!c.at("hd95_mm").is_null()) m.hd95_mm = c.at("hd95_mm").get<double>();
    if (!c.at("assd_mm").is_null()) m.assd_mm = c.at("assd_mm").get<double>();
    m.pred_voxels = c.at("pred_voxels").get<std::size_t>();
    m.gt_voxels = c.at("gt_voxels").get<std::size_t>();
    r.ids.push_back(c.at("id").get<std::string>());
    r.cases.push_back(m);
  }
  r.finalize();
  return r;
}

}  // namespace strokeseg::metrics

// Copyright (c) 2026, strokeseg contributors
// SPDX-License-Identifier: Apache-2.0

#include "strokeseg/synthdata.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <deque>
#include <fstream>
#include <limits>
#include <numbers>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "json.hpp"
#include "strokeseg/error.hpp"
#include "strokeseg/volume_io.hpp"

namespace strokeseg::synth {
namespace fs = std::filesystem;

namespace {

constexpr int kMaxPlacementAttempts = 1000;
constexpr double kBrainSemiAxisFraction = 0.42;  // of the field of view

struct Frame {
  Index3 shape;
  Real3 spacing;
  Real3 center;     // voxel coordinates of the grid center
  Real3 semi_axes;  // brain ellipsoid, mm

  Real3 position(int x, int y, int z) const {
    return {(x - center[0]) * spacing[0], (y - center[1]) * spacing[1], (z - center[2]) * spacing[2]};
  }
  bool in_brain(int x, int y, int z) const {
    const Real3 p = position(x, y, z);
    double r = 0.0;
    for (int a = 0; a < 3; ++a) r += (p[a] / semi_axes[a]) * (p[a] / semi_axes[a]);
    return r <= 1.0;
  }
  // Brain voxel whose whole 26-neighborhood is brain as well.
  bool in_brain_interior(int x, int y, int z) const {
    for (int dz = -1; dz <= 1; ++dz)
      for (int dy = -1; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx) {
          const int xx = x + dx, yy = y + dy, zz = z + dz;
          if (xx < 0 || yy < 0 || zz < 0 || xx >= shape[0] || yy >= shape[1] || zz >= shape[2]) return false;
          if (!in_brain(xx, yy, zz)) return false;
        }
    return true;
  }
  Hemisphere side_of(int x) const {
    if (x < center[0]) return Hemisphere::kLeft;
    if (x > center[0]) return Hemisphere::kRight;
    return Hemisphere::kNone;  // voxel on the mid-plane (odd grids)
  }
};

std::vector<std::size_t> rasterize_sphere(const Frame& f, const Geometry& g, const Real3& c, double r) {
  std::vector<std::size_t> voxels;
  int lo[3], hi[3];
  for (int a = 0; a < 3; ++a) {
    lo[a] = std::max(0, static_cast<int>(std::floor((c[a] - r) / f.spacing[a] + f.center[a])));
    hi[a] = std::min(f.shape[a] - 1, static_cast<int>(std::ceil((c[a] + r) / f.spacing[a] + f.center[a])));
  }
  for (int z = lo[2]; z <= hi[2]; ++z)
    for (int y = lo[1]; y <= hi[1]; ++y)
      for (int x = lo[0]; x <= hi[0]; ++x) {
        const Real3 p = f.position(x, y, z);
        const double d2 = (p[0] - c[0]) * (p[0] - c[0]) + (p[1] - c[1]) * (p[1] - c[1]) + (p[2] - c[2]) * (p[2] - c[2]);
        if (d2 <= r * r) voxels.push_back(g.offset(x, y, z));
      }
  return voxels;
}

// Peak-to-peak `amplitude` is measured over `support` (the brain), where it
// affects the image; outside it the same smooth function just continues.
Volume make_bias_field(const Geometry& g, double amplitude, const Mask& support, std::mt19937_64& rng) {
  Volume field(g, 1.0);
  if (amplitude == 0.0) return field;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  auto random_direction = [&] {
    Real3 d{gauss(rng), gauss(rng), gauss(rng)};
    const double norm = std::sqrt(d[0] * d[0] + d[1] * d[1] + d[2] * d[2]) + 1e-12;
    for (double& v : d) v /= norm;
    return d;
  };
  struct Wave {
    Real3 dir;
    double freq, phase, weight;
  };
  std::vector<Wave> waves;
  for (int k = 0; k < 3; ++k) {
    waves.push_back({random_direction(), 0.3 + 0.5 * unit(rng), 2.0 * std::numbers::pi * unit(rng), 0.5 + unit(rng)});
  }
  const Real3 ramp = random_direction();
  Real3 fov{}, center{};
  for (int a = 0; a < 3; ++a) {
    fov[a] = g.shape[a] * g.spacing[a];
    center[a] = 0.5 * (g.shape[a] - 1);
  }
  std::vector<double> raw(g.voxel_count());
  for (int z = 0; z < g.shape[2]; ++z)
    for (int y = 0; y < g.shape[1]; ++y)
      for (int x = 0; x < g.shape[0]; ++x) {
        const Real3 u{(x - center[0]) * g.spacing[0] / fov[0], (y - center[1]) * g.spacing[1] / fov[1],
                      (z - center[2]) * g.spacing[2] / fov[2]};
        double h = ramp[0] * u[0] + ramp[1] * u[1] + ramp[2] * u[2];
        for (const Wave& w : waves) {
          const double t = w.dir[0] * u[0] + w.dir[1] * u[1] + w.dir[2] * u[2];
          h += w.weight * std::cos(2.0 * std::numbers::pi * w.freq * t + w.phase);
        }
        raw[g.offset(x, y, z)] = h;
      }
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    if (!support[i]) continue;
    lo = std::min(lo, raw[i]);
    hi = std::max(hi, raw[i]);
  }
  const double span = hi - lo;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    const double t = span > 0 ? (raw[i] - lo) / span : 0.5;
    // Outside the support t may leave [0, 1]; keep the gain positive.
    field[i] = std::max(1.0 - 0.5 * amplitude + amplitude * t, 0.05);
  }
  return field;
}

std::string multiplicity_side_label(LesionMultiplicity m, Hemisphere h) {
  if (m == LesionMultiplicity::kNone) return "none";
  return std::string(to_string(m)) + "-" + to_string(h);
}

}  // namespace

const char* to_string(Hemisphere h) {
  switch (h) {
    case Hemisphere::kLeft: return "left";
    case Hemisphere::kRight: return "right";
    case Hemisphere::kBoth: return "both";
    case Hemisphere::kNone: return "none";
  }
  return "none";
}

Hemisphere parse_hemisphere(const std::string& s) {
  if (s == "left") return Hemisphere::kLeft;
  if (s == "right") return Hemisphere::kRight;
  if (s == "both") return Hemisphere::kBoth;
  if (s == "none") return Hemisphere::kNone;
  throw Error(ErrorCode::kInvalidArgument, "unknown hemisphere '" + s + "'");
}

const char* to_string(LesionMultiplicity m) {
  switch (m) {
    case LesionMultiplicity::kNone: return "none";
    case LesionMultiplicity::kSingle: return "single";
    case LesionMultiplicity::kMultiple: return "multiple";
  }
  return "none";
}

void PhantomSpec::validate() const {
  Geometry g{shape, spacing, {0, 0, 0}};
  g.validate();
  if (lesion_count < 0) throw Error(ErrorCode::kInvalidArgument, "lesion_count must be >= 0");
  if ((hemisphere == Hemisphere::kNone) != (lesion_count == 0)) {
    throw Error(ErrorCode::kInvalidArgument, "hemisphere 'none' is required exactly when lesion_count is 0");
  }
  if (hemisphere == Hemisphere::kBoth && lesion_count < 2) {
    throw Error(ErrorCode::kInvalidArgument, "hemisphere 'both' needs at least two lesions");
  }
  const auto [lo, hi] = lesion_radius_range_mm;
  if (!(lo > 0 && lo <= hi)) throw Error(ErrorCode::kInvalidArgument, "lesion radius range must satisfy 0 < lo <= hi");
  if (!(bias_field_amplitude >= 0 && bias_field_amplitude < 2)) {
    throw Error(ErrorCode::kInvalidArgument, "bias_field_amplitude must lie in [0, 2)");
  }
  if (!(noise_std >= 0)) throw Error(ErrorCode::kInvalidArgument, "noise_std must be >= 0");
}

Phantom generate_phantom_with_truth(const PhantomSpec& spec, std::uint64_t seed, const std::string& id) {
  spec.validate();
  Geometry g{spec.shape, spec.spacing, {0, 0, 0}};
  Frame f;
  f.shape = spec.shape;
  f.spacing = spec.spacing;
  for (int a = 0; a < 3; ++a) {
    f.center[a] = 0.5 * (spec.shape[a] - 1);
    f.semi_axes[a] = kBrainSemiAxisFraction * spec.shape[a] * spec.spacing[a];
  }
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  Mask brain(g);
  for (int z = 0; z < g.shape[2]; ++z)
    for (int y = 0; y < g.shape[1]; ++y)
      for (int x = 0; x < g.shape[0]; ++x) brain.set(x, y, z, f.in_brain(x, y, z));

  Mask lesions(g);
  // Voxels touching an existing lesion under 26-connectivity.
  std::vector<std::uint8_t> blocked(g.voxel_count(), 0);
  std::vector<LesionInfo> infos;
  for (int k = 0; k < spec.lesion_count; ++k) {
    Hemisphere side = spec.hemisphere;
    if (side == Hemisphere::kBoth) side = (k % 2 == 0) ? Hemisphere::kLeft : Hemisphere::kRight;
    const auto [r_lo, r_hi] = spec.lesion_radius_range_mm;
    bool placed = false;
    for (int attempt = 0; attempt < kMaxPlacementAttempts && !placed; ++attempt) {
      const double r = r_lo + unit(rng) * (r_hi - r_lo);
      Real3 c{};
      for (int a = 0; a < 3; ++a) c[a] = (2.0 * unit(rng) - 1.0) * f.semi_axes[a];
      c[0] = std::abs(c[0]) * (side == Hemisphere::kLeft ? -1.0 : 1.0);
      const auto voxels = rasterize_sphere(f, g, c, r);
      if (voxels.empty()) continue;
      bool ok = true;
      for (std::size_t v : voxels) {
        const Index3 p = g.coords(v);
        if (blocked[v] || f.side_of(p[0]) != side || !f.in_brain_interior(p[0], p[1], p[2])) {
          ok = false;
          break;
        }
      }
      if (!ok) continue;
      for (std::size_t v : voxels) {
        lesions.set(v, true);
        const Index3 p = g.coords(v);
        for (int dz = -1; dz <= 1; ++dz)
          for (int dy = -1; dy <= 1; ++dy)
            for (int dx = -1; dx <= 1; ++dx)
              if (g.contains(p[0] + dx, p[1] + dy, p[2] + dz)) blocked[g.offset(p[0] + dx, p[1] + dy, p[2] + dz)] = 1;
      }
      infos.push_back({c, r, side, voxels.size()});
      placed = true;
    }
    if (!placed) {
      std::ostringstream os;
      os << "unplaceable lesion " << k << " (radius range " << r_lo << "-" << r_hi << " mm) in hemisphere "
         << to_string(side) << " after " << kMaxPlacementAttempts << " attempts";
      throw Error(ErrorCode::kUnplaceableLesion, os.str());
    }
  }

  Volume field = make_bias_field(g, spec.bias_field_amplitude, brain, rng);
  std::normal_distribution<double> noise(0.0, 1.0);
  Volume image(g, spec.tissue.background);
  for (std::size_t i = 0; i < image.size(); ++i) {
    double value = spec.tissue.background;
    if (brain[i]) value = lesions[i] ? spec.tissue.lesion : spec.tissue.brain;
    value *= field[i];
    // Noise is drawn for every voxel so the stream does not depend on the mask.
    const double n = noise(rng) * spec.noise_std;
    if (brain[i]) value = std::max(0.0, value + n);
    image[i] = value;
  }

  Phantom out;
  out.subject.id = id;
  out.subject.image = std::move(image);
  out.subject.mask = std::move(lesions);
  out.brain = std::move(brain);
  out.bias_field = std::move(field);
  out.lesions = std::move(infos);
  return out;
}

Subject generate_phantom(const PhantomSpec& spec, std::uint64_t seed, const std::string& id) {
  return generate_phantom_with_truth(spec, seed, id).subject;
}

PhantomSpec scenario_spec(const std::string& scenario, const PhantomSpec& base, int multiple_count) {
  PhantomSpec s = base;
  if (scenario == "none") {
    s.lesion_count = 0;
    s.hemisphere = Hemisphere::kNone;
    return s;
  }
  const auto dash = scenario.find('-');
  if (dash == std::string::npos) throw Error(ErrorCode::kInvalidArgument, "unknown scenario '" + scenario + "'");
  const std::string count = scenario.substr(0, dash);
  s.hemisphere = parse_hemisphere(scenario.substr(dash + 1));
  if (s.hemisphere == Hemisphere::kNone) throw Error(ErrorCode::kInvalidArgument, "unknown scenario '" + scenario + "'");
  if (count == "single") {
    if (s.hemisphere == Hemisphere::kBoth) {
      throw Error(ErrorCode::kInvalidArgument, "scenario 'single-both' is impossible");
    }
    s.lesion_count = 1;
  } else if (count == "multiple") {
    s.lesion_count = std::max(2, multiple_count);
  } else {
    throw Error(ErrorCode::kInvalidArgument, "unknown scenario '" + scenario + "'");
  }
  return s;
}

std::vector<ScenarioTemplate> parse_mix(const std::string& mix, const PhantomSpec& base) {
  std::vector<ScenarioTemplate> out;
  std::stringstream ss(mix);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    double weight = 1.0;
    std::string name = item;
    if (const auto colon = item.find(':'); colon != std::string::npos) {
      name = item.substr(0, colon);
      try {
        weight = std::stod(item.substr(colon + 1));
      } catch (const std::exception&) {
        throw Error(ErrorCode::kInvalidArgument, "bad weight in mix entry '" + item + "'");
      }
    }
    out.push_back({name, scenario_spec(name, base), weight});
  }
  return out;
}

void Dataset::validate() const {
  std::set<std::string> ids;
  for (const auto& s : subjects) {
    if (!ids.insert(s.id).second) throw Error(ErrorCode::kInvalidArgument, "duplicate subject id '" + s.id + "'");
  }
  if (!scenarios.empty() && scenarios.size() != subjects.size()) {
    throw Error(ErrorCode::kInvalidArgument, "scenario labels do not match subject count");
  }
  if (!seeds.empty() && seeds.size() != subjects.size()) {
    throw Error(ErrorCode::kInvalidArgument, "seeds do not match subject count");
  }
}

Dataset generate_dataset(int n, const std::vector<ScenarioTemplate>& mix, std::uint64_t seed) {
  if (n < 1) throw Error(ErrorCode::kInvalidArgument, "generate_dataset: n must be >= 1");
  if (mix.empty()) throw Error(ErrorCode::kInvalidArgument, "generate_dataset: empty scenario mix");
  std::vector<double> weights;
  for (const auto& t : mix) {
    if (!(t.weight >= 0)) throw Error(ErrorCode::kInvalidArgument, "generate_dataset: negative mix weight");
    weights.push_back(t.weight);
  }
  if (!(std::accumulate(weights.begin(), weights.end(), 0.0) > 0)) {
    throw Error(ErrorCode::kInvalidArgument, "generate_dataset: empty scenario mix (weights sum to zero)");
  }
  std::mt19937_64 rng(seed);
  std::discrete_distribution<std::size_t> pick(weights.begin(), weights.end());
  Dataset d;
  std::ostringstream prov;
  prov << "synthetic: n=" << n << " seed=" << seed << " mix=";
  for (std::size_t i = 0; i < mix.size(); ++i) prov << (i ? "," : "") << mix[i].label << ":" << mix[i].weight;
  d.provenance = prov.str();
  for (int i = 0; i < n; ++i) {
    const std::size_t k = pick(rng);
    const std::uint64_t subject_seed = rng();
    char id[32];
    std::snprintf(id, sizeof(id), "sub-%04d", i + 1);
    d.subjects.push_back(generate_phantom(mix[k].spec, subject_seed, id));
    d.scenarios.push_back(mix[k].label);
    d.seeds.push_back(subject_seed);
  }
  return d;
}

std::pair<Dataset, Dataset> split_dataset(const Dataset& d, double train_fraction, std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "split_dataset: train_fraction must lie in (0, 1)");
  }
  if (d.subjects.empty()) throw Error(ErrorCode::kEmptyDataset, "split_dataset: empty dataset");
  std::vector<std::size_t> order(d.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  // Guard against products like 0.8 * 655 landing just below an integer.
  const auto n_train = static_cast<std::size_t>(std::floor(train_fraction * d.size() + 1e-9));
  Dataset train, test;
  train.provenance = test.provenance = d.provenance;
  for (std::size_t i = 0; i < order.size(); ++i) {
    Dataset& dst = i < n_train ? train : test;
    const std::size_t k = order[i];
    dst.subjects.push_back(d.subjects[k]);
    if (!d.scenarios.empty()) dst.scenarios.push_back(d.scenarios[k]);
    if (!d.seeds.empty()) dst.seeds.push_back(d.seeds[k]);
  }
  return {std::move(train), std::move(test)};
}

int LesionDistribution::count(LesionMultiplicity m, Hemisphere h) const {
  if (m == LesionMultiplicity::kNone) return none;
  const auto it = counts.find({m, h});
  return it == counts.end() ? 0 : it->second;
}

Components label_components(const Mask& m) {
  const Geometry& g = m.geometry();
  Components c;
  c.labels.assign(m.size(), 0);
  std::deque<std::size_t> queue;
  for (std::size_t start = 0; start < m.size(); ++start) {
    if (!m[start] || c.labels[start]) continue;
    const int label = ++c.count;
    Real3 sum{0, 0, 0};
    std::size_t size = 0;
    c.labels[start] = label;
    queue.push_back(start);
    while (!queue.empty()) {
      const std::size_t v = queue.front();
      queue.pop_front();
      const Index3 p = g.coords(v);
      for (int a = 0; a < 3; ++a) sum[a] += p[a];
      ++size;
      for (int dz = -1; dz <= 1; ++dz)
        for (int dy = -1; dy <= 1; ++dy)
          for (int dx = -1; dx <= 1; ++dx) {
            const int x = p[0] + dx, y = p[1] + dy, z = p[2] + dz;
            if (!g.contains(x, y, z)) continue;
            const std::size_t w = g.offset(x, y, z);
            if (m[w] && !c.labels[w]) {
              c.labels[w] = label;
              queue.push_back(w);
            }
          }
    }
    c.centroids.push_back({sum[0] / size, sum[1] / size, sum[2] / size});
    c.sizes.push_back(size);
  }
  return c;
}

std::string classify_mask(const Mask& m) {
  const Components c = label_components(m);
  if (c.count == 0) return "none";
  const double mid = 0.5 * (m.shape()[0] - 1);
  bool left = false, right = false;
  for (const auto& centroid : c.centroids) {
    if (centroid[0] < mid) left = true;
    else right = true;
  }
  const Hemisphere side = left && right ? Hemisphere::kBoth : (left ? Hemisphere::kLeft : Hemisphere::kRight);
  return multiplicity_side_label(c.count == 1 ? LesionMultiplicity::kSingle : LesionMultiplicity::kMultiple, side);
}

LesionDistribution dataset_statistics(const Dataset& d) {
  LesionDistribution dist;
  std::map<Hemisphere, int> by_side;
  for (const auto& s : d.subjects) {
    if (!s.mask) throw Error(ErrorCode::kMissingMask, "dataset_statistics: subject '" + s.id + "' has no mask");
    const std::string label = classify_mask(*s.mask);
    ++dist.total;
    if (label == "none") {
      ++dist.none;
      continue;
    }
    const auto dash = label.find('-');
    const auto mult = label.substr(0, dash) == "single" ? LesionMultiplicity::kSingle : LesionMultiplicity::kMultiple;
    const Hemisphere side = parse_hemisphere(label.substr(dash + 1));
    ++dist.counts[{mult, side}];
    ++by_side[side];
  }
  const int lesioned = dist.total - dist.none;
  if (lesioned > 0) {
    for (const auto& [side, n] : by_side) dist.percent_by_side[side] = 100.0 * n / lesioned;
  }
  return dist;
}

void save_dataset(const Dataset& d, const fs::path& dir) {
  d.validate();
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) {
    throw Error(ErrorCode::kUnwritablePath, dir.string() + ": cannot create dataset directory");
  }
  nlohmann::json manifest;
  manifest["provenance"] = d.provenance;
  manifest["subjects"] = nlohmann::json::array();
  for (std::size_t i = 0; i < d.size(); ++i) {
    const Subject& s = d.subjects[i];
    nlohmann::json entry;
    entry["id"] = s.id;
    entry["image"] = s.id + "_image.nii.gz";
    save_volume(s.image, dir / entry["image"].get<std::string>());
    if (s.mask) {
      entry["mask"] = s.id + "_mask.nii.gz";
      save_mask(*s.mask, dir / entry["mask"].get<std::string>());
    }
    if (!d.scenarios.empty()) entry["scenario"] = d.scenarios[i];
    if (!d.seeds.empty()) entry["seed"] = d.seeds[i];
    manifest["subjects"].push_back(entry);
  }
  std::ofstream os(dir / "manifest.json");
  if (!os) throw Error(ErrorCode::kUnwritablePath, (dir / "manifest.json").string() + ": cannot write");
  os << manifest.dump(2) << "\n";
}

Dataset load_dataset(const fs::path& dir) {
  const fs::path manifest_path = dir / "manifest.json";
  std::ifstream is(manifest_path);
  if (!is) throw Error(ErrorCode::kMissingFile, manifest_path.string() + ": no such file");
  nlohmann::json manifest;
  try {
    is >> manifest;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kMalformedHeader, manifest_path.string() + ": " + e.what());
  }
  Dataset d;
  d.provenance = manifest.value("provenance", std::string("ingested: ") + dir.string());
  const auto& subjects = manifest.at("subjects");
  bool all_labeled = true, all_seeded = true;
  for (const auto& e : subjects) {
    all_labeled = all_labeled && e.contains("scenario");
    all_seeded = all_seeded && e.contains("seed");
  }
  for (const auto& e : subjects) {
    Subject s;
    s.id = e.at("id").get<std::string>();
    s.image = load_volume(dir / e.at("image").get<std::string>());
    if (e.contains("mask")) s.mask = load_mask(dir / e.at("mask").get<std::string>());
    check_subject(s);
    d.subjects.push_back(std::move(s));
    if (all_labeled) d.scenarios.push_back(e.at("scenario").get<std::string>());
    if (all_seeded) d.seeds.push_back(e.at("seed").get<std::uint64_t>());
  }
  d.validate();
  return d;
}

}  // namespace strokeseg::synth

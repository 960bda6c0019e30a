// Copyright (c) 2026, strokeseg contributors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <algorithm>
#include <cstring>
#include <functional>
#include <numeric>
#include <random>
#include <set>

#include "support/temp_dir.hpp"
#include "strokeseg/error.hpp"
#include "strokeseg/synthdata.hpp"

namespace strokeseg::synth {
namespace {

// Union-find over foreground voxels with 26-connectivity.
int count_components_oracle(const Mask& m) {
  std::vector<std::size_t> parent(m.size());
  std::iota(parent.begin(), parent.end(), 0);
  std::function<std::size_t(std::size_t)> find = [&](std::size_t i) {
    while (parent[i] != i) i = parent[i] = parent[parent[i]];
    return i;
  };
  const auto& s = m.shape();
  for (int z = 0; z < s[2]; ++z)
    for (int y = 0; y < s[1]; ++y)
      for (int x = 0; x < s[0]; ++x) {
        if (!m.at(x, y, z)) continue;
        for (int dz = -1; dz <= 1; ++dz)
          for (int dy = -1; dy <= 1; ++dy)
            for (int dx = -1; dx <= 1; ++dx) {
              const int nx = x + dx, ny = y + dy, nz = z + dz;
              if (!m.geometry().contains(nx, ny, nz) || !m.at(nx, ny, nz)) continue;
              parent[find(m.geometry().offset(x, y, z))] = find(m.geometry().offset(nx, ny, nz));
            }
      }
  std::set<std::size_t> roots;
  for (std::size_t i = 0; i < m.size(); ++i) {
    if (m[i]) roots.insert(find(i));
  }
  return static_cast<int>(roots.size());
}

void expect_code(ErrorCode code, const std::function<void()>& f) {
  try {
    f();
    ADD_FAILURE() << "expected " << to_string(code);
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), code) << e.what();
  }
}

TEST(Phantom, NoLesionsGivesEmptyMask) {
  const Subject s = generate_phantom(scenario_spec("none"), 3);
  ASSERT_TRUE(s.mask.has_value());
  EXPECT_EQ(s.mask->count(), 0u);
}

TEST(Phantom, Deterministic) {
  const PhantomSpec spec = scenario_spec("multiple-both");
  const Subject a = generate_phantom(spec, 17);
  const Subject b = generate_phantom(spec, 17);
  EXPECT_EQ(std::memcmp(a.image.values().data(), b.image.values().data(), sizeof(double) * a.image.size()), 0);
  EXPECT_EQ(*a.mask, *b.mask);
  const Subject c = generate_phantom(spec, 18);
  EXPECT_NE(*a.mask, *c.mask);
}

TEST(Phantom, ComponentCountMatchesSpecAcrossScenarios) {
  const std::vector<std::string> scenarios{"none",          "single-left",  "single-right",
                                           "multiple-left", "multiple-right", "multiple-both"};
  for (const auto& name : scenarios) {
    const PhantomSpec spec = scenario_spec(name);
    for (std::uint64_t seed = 0; seed < 6; ++seed) {
      const Phantom p = generate_phantom_with_truth(spec, seed);
      const Mask& m = *p.subject.mask;
      EXPECT_EQ(count_components_oracle(m), spec.lesion_count) << name << " seed " << seed;
      EXPECT_EQ(label_components(m).count, spec.lesion_count);
      EXPECT_EQ(classify_mask(m), name) << "seed " << seed;
      // Lesions sit strictly inside the brain.
      for (std::size_t i = 0; i < m.size(); ++i) {
        if (m[i]) {
          EXPECT_TRUE(p.brain[i]);
        }
      }
    }
  }
}

TEST(Phantom, LesionsStayOffTheBrainBoundary) {
  const Phantom p = generate_phantom_with_truth(scenario_spec("multiple-both"), 4);
  const auto& s = p.brain.shape();
  for (int z = 0; z < s[2]; ++z)
    for (int y = 0; y < s[1]; ++y)
      for (int x = 0; x < s[0]; ++x) {
        if (!p.subject.mask->at(x, y, z)) continue;
        for (const Index3& d : {Index3{1, 0, 0}, Index3{-1, 0, 0}, Index3{0, 1, 0}, Index3{0, -1, 0},
                                Index3{0, 0, 1}, Index3{0, 0, -1}}) {
          EXPECT_TRUE(p.brain.at(x + d[0], y + d[1], z + d[2]));
        }
      }
}

TEST(Phantom, BiasFieldHasRequestedAmplitude) {
  PhantomSpec spec = scenario_spec("single-left");
  spec.noise_std = 0;
  const Phantom p = generate_phantom_with_truth(spec, 2);
  double lo = 1e9, hi = -1e9;
  for (std::size_t i = 0; i < p.bias_field.size(); ++i) {
    EXPECT_GT(p.bias_field[i], 0.0);
    if (!p.brain[i]) continue;
    lo = std::min(lo, p.bias_field[i]);
    hi = std::max(hi, p.bias_field[i]);
  }
  // Peak-to-peak over the brain, centered on unit gain.
  EXPECT_NEAR(lo, 1.0 - 0.5 * spec.bias_field_amplitude, 1e-12);
  EXPECT_NEAR(hi, 1.0 + 0.5 * spec.bias_field_amplitude, 1e-12);
}

TEST(Phantom, OversizedLesionIsUnplaceable) {
  PhantomSpec spec = scenario_spec("multiple-left");
  spec.lesion_radius_range_mm = {30, 30};
  expect_code(ErrorCode::kUnplaceableLesion, [&] { generate_phantom(spec, 0); });
}

TEST(PhantomSpec, HemisphereCountConsistency) {
  PhantomSpec spec;
  spec.hemisphere = Hemisphere::kNone;
  expect_code(ErrorCode::kInvalidArgument, [&] { spec.validate(); });
  spec.hemisphere = Hemisphere::kLeft;
  spec.lesion_count = 0;
  expect_code(ErrorCode::kInvalidArgument, [&] { spec.validate(); });
  expect_code(ErrorCode::kInvalidArgument, [] { scenario_spec("single-both"); });
  expect_code(ErrorCode::kInvalidArgument, [] { scenario_spec("several-left"); });
}

TEST(Dataset, GenerationBasics) {
  const auto mix = parse_mix("single-right");
  const Dataset d = generate_dataset(10, mix, 5);
  ASSERT_EQ(d.size(), 10u);
  std::set<std::string> ids;
  for (std::size_t i = 0; i < d.size(); ++i) {
    ids.insert(d.subjects[i].id);
    EXPECT_EQ(d.scenarios[i], "single-right");
  }
  EXPECT_EQ(ids.size(), 10u);
  expect_code(ErrorCode::kInvalidArgument, [&] { generate_dataset(0, mix, 5); });
  expect_code(ErrorCode::kInvalidArgument, [] { generate_dataset(3, {}, 5); });
  expect_code(ErrorCode::kInvalidArgument, [] { generate_dataset(3, parse_mix("none:0"), 5); });
}

TEST(Dataset, FixedSeedReproduces) {
  const auto mix = parse_mix("single-left:2,multiple-both:1,none:1");
  const Dataset a = generate_dataset(6, mix, 9);
  const Dataset b = generate_dataset(6, mix, 9);
  EXPECT_EQ(a.scenarios, b.scenarios);
  EXPECT_EQ(a.seeds, b.seeds);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(*a.subjects[i].mask, *b.subjects[i].mask);
}

TEST(Split, SixHundredFiftyFiveSplitsEightyTwenty) {
  Dataset d;
  for (int i = 0; i < 655; ++i) d.subjects.push_back({"s" + std::to_string(i), Volume(Geometry{}), std::nullopt});
  const auto [train, test] = split_dataset(d, 0.8, 1);
  EXPECT_EQ(train.size(), 524u);
  EXPECT_EQ(test.size(), 131u);
}

TEST(Split, PartitionPropertyOnRandomSizes) {
  std::mt19937_64 rng(13);
  std::uniform_int_distribution<int> size(1, 60);
  std::uniform_real_distribution<double> frac(0.05, 0.95);
  for (int trial = 0; trial < 50; ++trial) {
    Dataset d;
    const int n = size(rng);
    for (int i = 0; i < n; ++i) d.subjects.push_back({"s" + std::to_string(i), Volume(Geometry{}), std::nullopt});
    const double f = frac(rng);
    const auto [train, test] = split_dataset(d, f, trial);
    EXPECT_EQ(train.size(), static_cast<std::size_t>(std::floor(f * n)));
    EXPECT_EQ(train.size() + test.size(), static_cast<std::size_t>(n));
    std::set<std::string> all;
    for (const auto& s : train.subjects) all.insert(s.id);
    for (const auto& s : test.subjects) EXPECT_TRUE(all.insert(s.id).second);
    EXPECT_EQ(all.size(), static_cast<std::size_t>(n));
    const auto again = split_dataset(d, f, trial);
    for (std::size_t i = 0; i < train.size(); ++i) EXPECT_EQ(again.first.subjects[i].id, train.subjects[i].id);
  }
  Dataset d;
  d.subjects.push_back({"a", Volume(Geometry{}), std::nullopt});
  expect_code(ErrorCode::kInvalidArgument, [&] { split_dataset(d, 1.0, 0); });
  expect_code(ErrorCode::kInvalidArgument, [&] { split_dataset(d, 0.0, 0); });
  expect_code(ErrorCode::kEmptyDataset, [] { split_dataset(Dataset{}, 0.5, 0); });
}

Mask boxes(std::initializer_list<std::pair<Index3, Index3>> list) {
  Geometry g;
  g.shape = {16, 8, 8};
  Mask m(g);
  for (const auto& [lo, hi] : list)
    for (int z = lo[2]; z <= hi[2]; ++z)
      for (int y = lo[1]; y <= hi[1]; ++y)
        for (int x = lo[0]; x <= hi[0]; ++x) m.set(x, y, z, true);
  return m;
}

TEST(Statistics, ConstructedFixture) {
  Dataset d;
  const Mask left = boxes({{{1, 1, 1}, {3, 3, 3}}});
  const Mask both = boxes({{{1, 1, 1}, {2, 2, 2}}, {{12, 4, 4}, {13, 5, 5}}});
  d.subjects.push_back({"a", Volume(left.geometry()), left});
  d.subjects.push_back({"b", Volume(left.geometry()), left});
  d.subjects.push_back({"c", Volume(both.geometry()), both});
  d.subjects.push_back({"d", Volume(left.geometry()), Mask(left.geometry())});
  const LesionDistribution s = dataset_statistics(d);
  EXPECT_EQ(s.count(LesionMultiplicity::kSingle, Hemisphere::kLeft), 2);
  EXPECT_EQ(s.count(LesionMultiplicity::kMultiple, Hemisphere::kBoth), 1);
  EXPECT_EQ(s.none, 1);
  EXPECT_EQ(s.total, 4);
  double pct = 0;
  for (const auto& [side, p] : s.percent_by_side) pct += p;
  EXPECT_NEAR(pct, 100.0, 0.01);
}

TEST(Statistics, DiagonalNeighboursAreOneComponent) {
  const Mask m = boxes({{{1, 1, 1}, {1, 1, 1}}, {{2, 2, 2}, {2, 2, 2}}});
  EXPECT_EQ(label_components(m).count, 1);
  EXPECT_EQ(count_components_oracle(m), 1);
}

TEST(Statistics, AllNoneAndMissingMask) {
  Dataset d;
  Geometry g;
  g.shape = {4, 4, 4};
  for (int i = 0; i < 3; ++i) d.subjects.push_back({"n" + std::to_string(i), Volume(g), Mask(g)});
  const LesionDistribution s = dataset_statistics(d);
  EXPECT_EQ(s.none, 3);
  EXPECT_TRUE(s.percent_by_side.empty());
  d.subjects.push_back({"x", Volume(g), std::nullopt});
  expect_code(ErrorCode::kMissingMask, [&] { dataset_statistics(d); });
}

TEST(Statistics, MatchesGeneratorLabelsAndIgnoresOrder) {
  const auto mix = parse_mix("single-left,single-right,multiple-left,multiple-right,multiple-both,none");
  Dataset d = generate_dataset(24, mix, 31);
  std::map<std::string, int> expected;
  for (const auto& s : d.scenarios) ++expected[s];
  const LesionDistribution stats = dataset_statistics(d);
  EXPECT_EQ(stats.none, expected["none"]);
  EXPECT_EQ(stats.count(LesionMultiplicity::kSingle, Hemisphere::kLeft), expected["single-left"]);
  EXPECT_EQ(stats.count(LesionMultiplicity::kSingle, Hemisphere::kRight), expected["single-right"]);
  EXPECT_EQ(stats.count(LesionMultiplicity::kMultiple, Hemisphere::kLeft), expected["multiple-left"]);
  EXPECT_EQ(stats.count(LesionMultiplicity::kMultiple, Hemisphere::kRight), expected["multiple-right"]);
  EXPECT_EQ(stats.count(LesionMultiplicity::kMultiple, Hemisphere::kBoth), expected["multiple-both"]);

  std::reverse(d.subjects.begin(), d.subjects.end());
  const LesionDistribution shuffled = dataset_statistics(d);
  EXPECT_EQ(shuffled.counts, stats.counts);
  EXPECT_EQ(shuffled.percent_by_side, stats.percent_by_side);
}

TEST(DatasetIo, RoundTrip) {
  testing::TempDir dir;
  const Dataset d = generate_dataset(3, parse_mix("single-left,none"), 8);
  save_dataset(d, dir.path());
  const Dataset back = load_dataset(dir.path());
  ASSERT_EQ(back.size(), d.size());
  EXPECT_EQ(back.scenarios, d.scenarios);
  EXPECT_EQ(back.seeds, d.seeds);
  EXPECT_EQ(back.provenance, d.provenance);
  for (std::size_t i = 0; i < d.size(); ++i) {
    EXPECT_EQ(back.subjects[i].id, d.subjects[i].id);
    EXPECT_EQ(*back.subjects[i].mask, *d.subjects[i].mask);
  }
  expect_code(ErrorCode::kMissingFile, [&] { load_dataset(dir / "nope"); });
}

}  // namespace
}  // namespace strokeseg::synth

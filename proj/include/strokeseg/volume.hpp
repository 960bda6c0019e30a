// Copyright (c) 2026, strokeseg contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace strokeseg {

using Index3 = std::array<int, 3>;
using Real3 = std::array<double, 3>;

/// Axis-aligned voxel grid: shape in voxels, spacing and origin in mm.
/// Voxels are stored x-fastest: offset = x + nx * (y + ny * z).
struct Geometry {
  Index3 shape{1, 1, 1};
  Real3 spacing{1.0, 1.0, 1.0};
  Real3 origin{0.0, 0.0, 0.0};

  std::size_t voxel_count() const {
    return static_cast<std::size_t>(shape[0]) * shape[1] * shape[2];
  }
  std::size_t offset(int x, int y, int z) const {
    return static_cast<std::size_t>(x) +
           static_cast<std::size_t>(shape[0]) *
               (static_cast<std::size_t>(y) + static_cast<std::size_t>(shape[1]) * z);
  }
  Index3 coords(std::size_t offset) const;
  bool contains(int x, int y, int z) const {
    return x >= 0 && y >= 0 && z >= 0 && x < shape[0] && y < shape[1] && z < shape[2];
  }

  /// Throws kInvalidArgument unless shape >= 1 and spacing > 0 per axis.
  void validate() const;

  bool operator==(const Geometry&) const = default;
};

/// True when shapes match exactly and spacing/origin agree within `tol` mm.
bool same_geometry(const Geometry& a, const Geometry& b, double tol = 1e-6);

/// 3D scalar image. Intensities are held as doubles regardless of on-disk type.
class Volume {
 public:
  Volume() = default;
  explicit Volume(Geometry geometry, double fill = 0.0);
  Volume(Geometry geometry, std::vector<double> data);

  const Geometry& geometry() const { return geometry_; }
  const Index3& shape() const { return geometry_.shape; }
  const Real3& spacing() const { return geometry_.spacing; }
  const Real3& origin() const { return geometry_.origin; }
  std::size_t size() const { return data_.size(); }

  double& at(int x, int y, int z) { return data_[geometry_.offset(x, y, z)]; }
  double at(int x, int y, int z) const { return data_[geometry_.offset(x, y, z)]; }
  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }

 private:
  Geometry geometry_;
  std::vector<double> data_;
};

/// Binary label volume with values restricted to {0, 1}.
class Mask {
 public:
  Mask() = default;
  explicit Mask(Geometry geometry);
  Mask(Geometry geometry, std::vector<std::uint8_t> data);

  /// Converts a volume holding only 0.0 / 1.0 values; throws otherwise.
  static Mask from_volume(const Volume& v);
  /// Foreground where value > threshold.
  static Mask threshold(const Volume& v, double threshold);

  Volume to_volume() const;

  const Geometry& geometry() const { return geometry_; }
  const Index3& shape() const { return geometry_.shape; }
  const Real3& spacing() const { return geometry_.spacing; }
  std::size_t size() const { return data_.size(); }

  std::uint8_t at(int x, int y, int z) const { return data_[geometry_.offset(x, y, z)]; }
  void set(int x, int y, int z, bool on) { data_[geometry_.offset(x, y, z)] = on ? 1 : 0; }
  std::uint8_t operator[](std::size_t i) const { return data_[i]; }
  void set(std::size_t i, bool on) { data_[i] = on ? 1 : 0; }

  std::span<const std::uint8_t> values() const { return data_; }
  std::size_t count() const;

  bool operator==(const Mask&) const = default;

 private:
  Geometry geometry_;
  std::vector<std::uint8_t> data_;
};

struct Subject {
  std::string id;
  Volume image;
  std::optional<Mask> mask;
};

/// Throws kGeometryMismatch when a subject's mask does not share its image grid.
void check_subject(const Subject& s);

/// NaN voxels become 0.0; every other voxel and the geometry are untouched.
Volume replace_nans_with_zero(Volume v);

struct VolumeStats {
  double min = 0.0;
  double max = 0.0;
  double mean = 0.0;
  double std = 0.0;  // population standard deviation
  std::size_t nan_count = 0;
  Real3 extent_mm{0.0, 0.0, 0.0};  // (shape - 1) * spacing
};

/// Summary over the non-NaN voxels. An all-NaN volume reports zeros.
VolumeStats volume_stats(const Volume& v);

}  // namespace strokeseg

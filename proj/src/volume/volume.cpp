// Copyright (c) 2026, strokeseg contributors
// SPDX-License-Identifier: Apache-2.0

#include "strokeseg/volume.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "strokeseg/error.hpp"

namespace strokeseg {

Index3 Geometry::coords(std::size_t offset) const {
  const auto nx = static_cast<std::size_t>(shape[0]);
  const auto ny = static_cast<std::size_t>(shape[1]);
  return {static_cast<int>(offset % nx), static_cast<int>((offset / nx) % ny),
          static_cast<int>(offset / (nx * ny))};
}

void Geometry::validate() const {
  for (int a = 0; a < 3; ++a) {
    if (shape[a] < 1) {
      throw Error(ErrorCode::kInvalidArgument, "shape components must be >= 1");
    }
    if (!(spacing[a] > 0.0) || !std::isfinite(spacing[a])) {
      throw Error(ErrorCode::kInvalidArgument, "spacing components must be > 0");
    }
  }
}

bool same_geometry(const Geometry& a, const Geometry& b, double tol) {
  if (a.shape != b.shape) return false;
  for (int i = 0; i < 3; ++i) {
    if (std::abs(a.spacing[i] - b.spacing[i]) > tol) return false;
    if (std::abs(a.origin[i] - b.origin[i]) > tol) return false;
  }
  return true;
}

Volume::Volume(Geometry geometry, double fill) : geometry_(geometry) {
  geometry_.validate();
  data_.assign(geometry_.voxel_count(), fill);
}

Volume::Volume(Geometry geometry, std::vector<double> data)
    : geometry_(geometry), data_(std::move(data)) {
  geometry_.validate();
  if (data_.size() != geometry_.voxel_count()) {
    throw Error(ErrorCode::kShapeMismatch, "volume data size does not match shape");
  }
}

Mask::Mask(Geometry geometry) : geometry_(geometry) {
  geometry_.validate();
  data_.assign(geometry_.voxel_count(), 0);
}

Mask::Mask(Geometry geometry, std::vector<std::uint8_t> data)
    : geometry_(geometry), data_(std::move(data)) {
  geometry_.validate();
  if (data_.size() != geometry_.voxel_count()) {
    throw Error(ErrorCode::kShapeMismatch, "mask data size does not match shape");
  }
  for (auto& v : data_) {
    if (v > 1) throw Error(ErrorCode::kInvalidArgument, "mask values must be 0 or 1");
  }
}

Mask Mask::from_volume(const Volume& v) {
  std::vector<std::uint8_t> data(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double x = v[i];
    if (x == 0.0) {
      data[i] = 0;
    } else if (x == 1.0) {
      data[i] = 1;
    } else {
      std::ostringstream os;
      os << "mask voxel " << i << " has non-binary value " << x;
      throw Error(ErrorCode::kInvalidArgument, os.str());
    }
  }
  return Mask(v.geometry(), std::move(data));
}

Mask Mask::threshold(const Volume& v, double threshold) {
  std::vector<std::uint8_t> data(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) data[i] = v[i] > threshold ? 1 : 0;
  return Mask(v.geometry(), std::move(data));
}

Volume Mask::to_volume() const {
  std::vector<double> data(data_.begin(), data_.end());
  return Volume(geometry_, std::move(data));
}

std::size_t Mask::count() const {
  return static_cast<std::size_t>(std::count(data_.begin(), data_.end(), std::uint8_t{1}));
}

void check_subject(const Subject& s) {
  if (s.mask && !same_geometry(s.image.geometry(), s.mask->geometry())) {
    throw Error(ErrorCode::kGeometryMismatch,
                "subject '" + s.id + "': mask geometry differs from image geometry");
  }
}

Volume replace_nans_with_zero(Volume v) {
  for (double& x : v.values()) {
    if (std::isnan(x)) x = 0.0;
  }
  return v;
}

VolumeStats volume_stats(const Volume& v) {
  VolumeStats s;
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  double sum = 0.0;
  std::size_t n = 0;
  for (double x : v.values()) {
    if (std::isnan(x)) {
      ++s.nan_count;
      continue;
    }
    lo = std::min(lo, x);
    hi = std::max(hi, x);
    sum += x;
    ++n;
  }
  if (n > 0) {
    s.min = lo;
    s.max = hi;
    s.mean = sum / static_cast<double>(n);
    double ss = 0.0;
    for (double x : v.values()) {
      if (!std::isnan(x)) ss += (x - s.mean) * (x - s.mean);
    }
    s.std = std::sqrt(ss / static_cast<double>(n));
  }
  for (int a = 0; a < 3; ++a) {
    s.extent_mm[a] = (v.shape()[a] - 1) * v.spacing()[a];
  }
  return s;
}

}  // namespace strokeseg

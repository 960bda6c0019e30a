// Copyright (c) 2026, strokeseg contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <new>
#include <span>
#include <string>
#include <vector>

namespace strokeseg::nn {

/// Cache-line aligned storage. Vectorized kernels pick their loop split from
/// the data address, so a fixed alignment keeps results bitwise repeatable.
template <class T>
struct AlignedAllocator {
  using value_type = T;
  static constexpr std::align_val_t kAlign{64};

  AlignedAllocator() = default;
  template <class U>
  AlignedAllocator(const AlignedAllocator<U>&) {}

  T* allocate(std::size_t n) { return static_cast<T*>(::operator new(n * sizeof(T), kAlign)); }
  void deallocate(T* p, std::size_t) { ::operator delete(p, kAlign); }

  template <class U>
  bool operator==(const AlignedAllocator<U>&) const { return true; }
};

using AlignedBuffer = std::vector<double, AlignedAllocator<double>>;

/// Dense float64 array with a small dimension list.
///
/// Two layouts are used throughout the network:
///   feature map (N, C, X, Y, Z): offset = ((n*C + c)*Z + z)*Y*X + y*X + x
///   token grid  (N, X, Y, Z, C): offset = (((n*Z + z)*Y + y)*X + x)*C + c
/// Both keep x fastest among the spatial axes, matching Volume storage.
/// Parameter tensors are plain row-major in their listed dims.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<std::int64_t> dims, double fill = 0.0);

  static Tensor zeros_like(const Tensor& t) { return Tensor(t.dims_); }

  const std::vector<std::int64_t>& dims() const { return dims_; }
  std::int64_t dim(std::size_t i) const { return dims_.at(i); }
  std::size_t rank() const { return dims_.size(); }
  std::int64_t size() const { return static_cast<std::int64_t>(data_.size()); }
  bool empty() const { return data_.empty(); }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  double& operator[](std::int64_t i) { return data_[static_cast<std::size_t>(i)]; }
  double operator[](std::int64_t i) const { return data_[static_cast<std::size_t>(i)]; }
  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }

  void fill(double v);
  bool same_shape(const Tensor& o) const { return dims_ == o.dims_; }
  std::string shape_string() const;

  /// Feature-map element access (rank 5, N C X Y Z).
  double& at(std::int64_t n, std::int64_t c, std::int64_t x, std::int64_t y, std::int64_t z);
  double at(std::int64_t n, std::int64_t c, std::int64_t x, std::int64_t y, std::int64_t z) const;

  bool operator==(const Tensor&) const = default;

 private:
  std::vector<std::int64_t> dims_;
  AlignedBuffer data_;
};

struct FeatureShape {
  std::int64_t n = 0, c = 0, x = 0, y = 0, z = 0;
  std::int64_t spatial() const { return x * y * z; }
  bool operator==(const FeatureShape&) const = default;
};

/// Shape of a rank-5 feature map; throws kShapeMismatch for other ranks.
FeatureShape feature_shape(const Tensor& t);
Tensor make_feature_map(const FeatureShape& s, double fill = 0.0);

/// Throws kNonFinite naming `where` if any element is NaN or infinite.
void check_finite(const Tensor& t, const char* where);

/// Elementwise helpers used by residual wiring.
void add_inplace(Tensor& dst, const Tensor& src);
Tensor add(const Tensor& a, const Tensor& b);

/// Channel concatenation of two feature maps with equal N and spatial dims,
/// and its adjoint split.
Tensor concat_channels(const Tensor& a, const Tensor& b);
void split_channels(const Tensor& g, std::int64_t c_first, Tensor& ga, Tensor& gb);

/// Feature map (N,C,X,Y,Z) <-> token grid (N,X,Y,Z,C).
Tensor to_tokens(const Tensor& feature_map);
Tensor to_feature_map(const Tensor& tokens);

}  // namespace strokeseg::nn

// Copyright (c) 2026, strokeseg contributors
// SPDX-License-Identifier: Apache-2.0

#include "strokeseg/nn/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <sstream>

#include "strokeseg/error.hpp"

namespace strokeseg::nn {

Tensor::Tensor(std::vector<std::int64_t> dims, double fill) : dims_(std::move(dims)) {
  std::int64_t n = 1;
  for (auto d : dims_) {
    if (d < 0) throw Error(ErrorCode::kInvalidArgument, "tensor dimensions must be non-negative");
    n *= d;
  }
  data_.assign(static_cast<std::size_t>(n), fill);
}

void Tensor::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

std::string Tensor::shape_string() const {
  std::ostringstream os;
  os << "(";
  for (std::size_t i = 0; i < dims_.size(); ++i) os << (i ? ", " : "") << dims_[i];
  os << ")";
  return os.str();
}

double& Tensor::at(std::int64_t n, std::int64_t c, std::int64_t x, std::int64_t y, std::int64_t z) {
  return data_[static_cast<std::size_t>((((n * dims_[1] + c) * dims_[4] + z) * dims_[3] + y) * dims_[2] + x)];
}

double Tensor::at(std::int64_t n, std::int64_t c, std::int64_t x, std::int64_t y, std::int64_t z) const {
  return data_[static_cast<std::size_t>((((n * dims_[1] + c) * dims_[4] + z) * dims_[3] + y) * dims_[2] + x)];
}

FeatureShape feature_shape(const Tensor& t) {
  if (t.rank() != 5) {
    throw Error(ErrorCode::kShapeMismatch, "expected a rank-5 feature map, got " + t.shape_string());
  }
  return {t.dim(0), t.dim(1), t.dim(2), t.dim(3), t.dim(4)};
}

Tensor make_feature_map(const FeatureShape& s, double fill) { return Tensor({s.n, s.c, s.x, s.y, s.z}, fill); }

void check_finite(const Tensor& t, const char* where) {
  for (double v : t.values()) {
    if (!std::isfinite(v)) throw Error(ErrorCode::kNonFinite, std::string(where) + ": non-finite value");
  }
}

void add_inplace(Tensor& dst, const Tensor& src) {
  if (!dst.same_shape(src)) {
    throw Error(ErrorCode::kShapeMismatch, "add: " + dst.shape_string() + " vs " + src.shape_string());
  }
  double* d = dst.data();
  const double* s = src.data();
  for (std::int64_t i = 0; i < dst.size(); ++i) d[i] += s[i];
}

Tensor add(const Tensor& a, const Tensor& b) {
  Tensor out = a;
  add_inplace(out, b);
  return out;
}

Tensor concat_channels(const Tensor& a, const Tensor& b) {
  const FeatureShape sa = feature_shape(a), sb = feature_shape(b);
  if (sa.n != sb.n || sa.x != sb.x || sa.y != sb.y || sa.z != sb.z) {
    throw Error(ErrorCode::kShapeMismatch,
                "concat: spatial/batch mismatch " + a.shape_string() + " vs " + b.shape_string());
  }
  FeatureShape so = sa;
  so.c = sa.c + sb.c;
  Tensor out = make_feature_map(so);
  const std::int64_t s = sa.spatial();
  for (std::int64_t n = 0; n < sa.n; ++n) {
    std::memcpy(out.data() + n * so.c * s, a.data() + n * sa.c * s, sizeof(double) * sa.c * s);
    std::memcpy(out.data() + (n * so.c + sa.c) * s, b.data() + n * sb.c * s, sizeof(double) * sb.c * s);
  }
  return out;
}

void split_channels(const Tensor& g, std::int64_t c_first, Tensor& ga, Tensor& gb) {
  const FeatureShape sg = feature_shape(g);
  FeatureShape sa = sg, sb = sg;
  sa.c = c_first;
  sb.c = sg.c - c_first;
  ga = make_feature_map(sa);
  gb = make_feature_map(sb);
  const std::int64_t s = sg.spatial();
  for (std::int64_t n = 0; n < sg.n; ++n) {
    std::memcpy(ga.data() + n * sa.c * s, g.data() + n * sg.c * s, sizeof(double) * sa.c * s);
    std::memcpy(gb.data() + n * sb.c * s, g.data() + (n * sg.c + sa.c) * s, sizeof(double) * sb.c * s);
  }
}

Tensor to_tokens(const Tensor& fm) {
  const FeatureShape s = feature_shape(fm);
  Tensor out({s.n, s.x, s.y, s.z, s.c});
  const std::int64_t sp = s.spatial();
  for (std::int64_t n = 0; n < s.n; ++n) {
    const double* src = fm.data() + n * s.c * sp;
    double* dst = out.data() + n * sp * s.c;
    for (std::int64_t c = 0; c < s.c; ++c)
      for (std::int64_t i = 0; i < sp; ++i) dst[i * s.c + c] = src[c * sp + i];
  }
  return out;
}

Tensor to_feature_map(const Tensor& tokens) {
  if (tokens.rank() != 5) throw Error(ErrorCode::kShapeMismatch, "expected a rank-5 token grid");
  const std::int64_t n_ = tokens.dim(0), x = tokens.dim(1), y = tokens.dim(2), z = tokens.dim(3), c_ = tokens.dim(4);
  Tensor out({n_, c_, x, y, z});
  const std::int64_t sp = x * y * z;
  for (std::int64_t n = 0; n < n_; ++n) {
    const double* src = tokens.data() + n * sp * c_;
    double* dst = out.data() + n * c_ * sp;
    for (std::int64_t i = 0; i < sp; ++i)
      for (std::int64_t c = 0; c < c_; ++c) dst[c * sp + i] = src[i * c_ + c];
  }
  return out;
}

}  // namespace strokeseg::nn

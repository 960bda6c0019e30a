// Copyright (c) 2026, strokeseg contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "strokeseg/nn/params.hpp"
#include "strokeseg/nn/tensor.hpp"

namespace strokeseg::nn {

enum class Mode { kTrain, kEval };

// Layers register their weights in a ModelParams store at construction and
// keep Parameter pointers. forward() caches what backward() needs; backward()
// accumulates into Parameter::gradient() and returns the input gradient.
// A layer instance supports one forward/backward pair in flight.

/// 3D convolution, odd cubic kernel, stride 1, zero "same" padding.
/// weight: (Cout, Cin, k, k, k) with the kernel offset stored z-major,
/// i.e. index ((dz*k + dy)*k + dx).
class Conv3d {
 public:
  Conv3d() = default;
  Conv3d(ModelParams& store, const std::string& name, std::int64_t cin, std::int64_t cout, int k,
         bool bias, std::mt19937_64& init);

  Tensor forward(const Tensor& x);
  Tensor backward(const Tensor& dy);

  std::int64_t in_channels() const { return cin_; }
  std::int64_t out_channels() const { return cout_; }
  int kernel() const { return k_; }
  Parameter* weight() const { return w_; }
  Parameter* bias() const { return b_; }

 private:
  std::int64_t cin_ = 0, cout_ = 0;
  int k_ = 1;
  Parameter* w_ = nullptr;
  Parameter* b_ = nullptr;
  Tensor x_;
};

/// Non-overlapping 2x2x2 patch merge with stride 2 (channels cin -> cout).
/// weight: (Cout, Cin, 2, 2, 2), bias: (Cout).
class PatchDown {
 public:
  PatchDown() = default;
  PatchDown(ModelParams& store, const std::string& name, std::int64_t cin, std::int64_t cout,
            std::mt19937_64& init);

  Tensor forward(const Tensor& x);
  Tensor backward(const Tensor& dy);

 private:
  std::int64_t cin_ = 0, cout_ = 0;
  Parameter* w_ = nullptr;
  Parameter* b_ = nullptr;
  Tensor gathered_;  // (S_out x Cin*8), column-major
  FeatureShape in_shape_;
};

/// 2x2x2 transposed convolution with stride 2 (channels cin -> cout).
/// weight: (Cin, Cout, 2, 2, 2), bias: (Cout).
class PatchUp {
 public:
  PatchUp() = default;
  PatchUp(ModelParams& store, const std::string& name, std::int64_t cin, std::int64_t cout,
          std::mt19937_64& init);

  Tensor forward(const Tensor& x);
  Tensor backward(const Tensor& dy);

 private:
  std::int64_t cin_ = 0, cout_ = 0;
  Parameter* w_ = nullptr;
  Parameter* b_ = nullptr;
  Tensor x_;
};

/// Per-channel batch normalization over (N, X, Y, Z). Train mode normalizes
/// with batch statistics and updates the running buffers (momentum 0.1,
/// unbiased variance); eval mode uses the running buffers.
class BatchNorm3d {
 public:
  static constexpr double kEps = 1e-5;
  static constexpr double kMomentum = 0.1;

  BatchNorm3d() = default;
  BatchNorm3d(ModelParams& store, const std::string& name, std::int64_t channels);

  Tensor forward(const Tensor& x, Mode mode);
  Tensor backward(const Tensor& dy);

  Parameter* gamma() const { return gamma_; }
  Parameter* beta() const { return beta_; }
  Parameter* running_mean() const { return mean_; }
  Parameter* running_var() const { return var_; }

 private:
  std::int64_t c_ = 0;
  Parameter* gamma_ = nullptr;
  Parameter* beta_ = nullptr;
  Parameter* mean_ = nullptr;
  Parameter* var_ = nullptr;
  Mode mode_ = Mode::kEval;
  Tensor xhat_;
  std::vector<double> inv_std_;
};

/// Parametric ReLU with one slope per channel, initialized to 0.25.
class PReLU {
 public:
  PReLU() = default;
  PReLU(ModelParams& store, const std::string& name, std::int64_t channels);

  Tensor forward(const Tensor& x);
  Tensor backward(const Tensor& dy);

  Parameter* slope() const { return a_; }

 private:
  Parameter* a_ = nullptr;
  Tensor x_;
};

class ReLU {
 public:
  Tensor forward(const Tensor& x);
  Tensor backward(const Tensor& dy);

 private:
  Tensor x_;
};

/// Inverted dropout; identity in eval mode or when rate is 0.
class Dropout {
 public:
  Dropout() = default;
  Dropout(double rate, std::mt19937_64* rng) : rate_(rate), rng_(rng) {}

  Tensor forward(const Tensor& x, Mode mode);
  Tensor backward(const Tensor& dy);

 private:
  double rate_ = 0.0;
  std::mt19937_64* rng_ = nullptr;
  std::vector<double> keep_;  // empty when the last forward was the identity
};

/// Layer normalization over the trailing channel axis of a token tensor
/// (any rank, last dim = C).
class LayerNorm {
 public:
  static constexpr double kEps = 1e-5;

  LayerNorm() = default;
  LayerNorm(ModelParams& store, const std::string& name, std::int64_t channels);

  Tensor forward(const Tensor& x);
  Tensor backward(const Tensor& dy);

  Parameter* gamma() const { return gamma_; }
  Parameter* beta() const { return beta_; }

 private:
  std::int64_t c_ = 0;
  Parameter* gamma_ = nullptr;
  Parameter* beta_ = nullptr;
  Tensor xhat_;
  std::vector<double> inv_std_;
};

/// Affine map over the trailing axis. weight: (out, in), bias: (out).
class Linear {
 public:
  Linear() = default;
  Linear(ModelParams& store, const std::string& name, std::int64_t in, std::int64_t out,
         std::mt19937_64& init);

  Tensor forward(const Tensor& x);
  Tensor backward(const Tensor& dy);

  Parameter* weight() const { return w_; }
  Parameter* bias() const { return b_; }

 private:
  std::int64_t in_ = 0, out_ = 0;
  Parameter* w_ = nullptr;
  Parameter* b_ = nullptr;
  Tensor x_;
};

/// Exact GELU, 0.5 x (1 + erf(x / sqrt 2)).
class Gelu {
 public:
  Tensor forward(const Tensor& x);
  Tensor backward(const Tensor& dy);

 private:
  Tensor x_;
};

}  // namespace strokeseg::nn

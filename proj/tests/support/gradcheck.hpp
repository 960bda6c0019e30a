// Copyright (c) 2026, strokeseg contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Central finite-difference checks for modules with hand-written backward
// passes. The scalar probed is L = sum(R * y) for a fixed random R, so the
// upstream gradient handed to backward is R itself.
//
// ReLU and PReLU are not differentiable at zero. When a perturbation moves
// some pre-activation across zero, the central difference no longer
// estimates a derivative. Such samples are detected from the finite
// differences alone (the one-sided quotients disagree) and redrawn at a
// different index; the analytic value plays no part in that decision.

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "strokeseg/nn/params.hpp"
#include "strokeseg/nn/tensor.hpp"

namespace strokeseg::testing {

inline constexpr double kFdStep = 1e-5;
inline constexpr double kGradTolerance = 1e-3;

struct GradSample {
  std::string label;
  double analytic = 0.0;
  double numeric = 0.0;
  bool smooth = true;  // one-sided quotients agree
  int redraws = 0;     // non-smooth indices skipped before this one

  double relative_error() const {
    const double scale = std::max({std::abs(analytic), std::abs(numeric), 1e-12});
    return std::abs(analytic - numeric) / scale;
  }
};

struct Probe {
  std::function<nn::Tensor()> forward;
  std::function<void(const nn::Tensor& dy)> backward;  // must follow a forward
};

inline nn::Tensor random_tensor(const std::vector<std::int64_t>& dims, std::uint64_t seed, double scale = 1.0) {
  nn::Tensor t(dims);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, scale);
  for (double& v : t.values()) v = n(rng);
  return t;
}

inline double weighted_sum(const nn::Tensor& y, const nn::Tensor& r) {
  double s = 0.0;
  for (std::int64_t i = 0; i < y.size(); ++i) s += y[i] * r[i];
  return s;
}

class GradChecker {
 public:
  GradChecker(Probe probe, std::uint64_t seed, double step = kFdStep)
      : probe_(std::move(probe)), rng_(seed), step_(step) {
    const nn::Tensor y = probe_.forward();
    weights_ = random_tensor(y.dims(), seed ^ 0x9e3779b97f4a7c15ull);
    base_ = weighted_sum(y, weights_);
  }

  /// Runs forward + backward once so parameter grads are populated.
  void run_backward(nn::ModelParams& params) {
    params.zero_grad();
    probe_.forward();
    probe_.backward(weights_);
  }

  std::vector<GradSample> check_parameter(nn::Parameter& p, int count) {
    const nn::Tensor analytic = p.gradient();
    return check_tensor(p.name, p.value, analytic, count);
  }

  /// Samples `count` entries of `value`, preferring entries whose analytic
  /// gradient is not vanishingly small.
  std::vector<GradSample> check_tensor(const std::string& label, nn::Tensor& value, const nn::Tensor& analytic,
                                       int count, int max_redraws = 8) {
    std::vector<GradSample> out;
    std::uniform_int_distribution<std::int64_t> pick(0, value.size() - 1);
    for (int k = 0; k < count; ++k) {
      GradSample s;
      for (int attempt = 0; attempt <= max_redraws; ++attempt) {
        std::int64_t idx = pick(rng_);
        for (int tries = 0; tries < 64 && std::abs(analytic[idx]) < 1e-6; ++tries) idx = pick(rng_);
        s = measure(value[idx]);
        s.label = label + "[" + std::to_string(idx) + "]";
        s.analytic = analytic[idx];
        s.redraws = attempt;
        if (s.smooth) break;
      }
      out.push_back(s);
    }
    return out;
  }

  const nn::Tensor& upstream() const { return weights_; }

 private:
  GradSample measure(double& slot) {
    const double saved = slot;
    slot = saved + step_;
    const double plus = weighted_sum(probe_.forward(), weights_);
    slot = saved - step_;
    const double minus = weighted_sum(probe_.forward(), weights_);
    slot = saved;
    GradSample s;
    s.numeric = (plus - minus) / (2 * step_);
    const double forward_q = (plus - base_) / step_;
    const double backward_q = (base_ - minus) / step_;
    const double scale = std::max({std::abs(forward_q), std::abs(backward_q), 1e-6});
    s.smooth = std::abs(forward_q - backward_q) <= kGradTolerance * scale;
    return s;
  }

  Probe probe_;
  std::mt19937_64 rng_;
  double step_;
  nn::Tensor weights_;
  double base_ = 0.0;
};

inline double max_relative_error(const std::vector<GradSample>& samples) {
  double m = 0.0;
  for (const auto& s : samples) m = std::max(m, s.relative_error());
  return m;
}

}  // namespace strokeseg::testing

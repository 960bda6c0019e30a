// Copyright (c) 2026, strokeseg contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "strokeseg/nn/params.hpp"

namespace strokeseg::nn {

enum class OptimizerKind { kAdam, kSgd };

const char* to_string(OptimizerKind k);
OptimizerKind parse_optimizer(const std::string& s);

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::kAdam;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  void validate() const;
};

/// First-order update over the trainable entries of a ModelParams store.
/// The store must keep its layout for the optimizer's lifetime.
class Optimizer {
 public:
  explicit Optimizer(const OptimizerConfig& cfg);

  /// Applies one update using the accumulated gradients. Entries whose
  /// gradient was never allocated are skipped.
  void step(ModelParams& params);
  std::int64_t steps() const { return t_; }

 private:
  OptimizerConfig cfg_;
  std::int64_t t_ = 0;
  std::vector<std::vector<double>> m_, v_;
};

}  // namespace strokeseg::nn

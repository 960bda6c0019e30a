// Copyright (c) 2026, strokeseg contributors
// SPDX-License-Identifier: Apache-2.0

#include "strokeseg/nn/optimizer.hpp"

#include <cmath>

#include "strokeseg/error.hpp"

namespace strokeseg::nn {

const char* to_string(OptimizerKind k) { return k == OptimizerKind::kAdam ? "adam" : "sgd"; }

OptimizerKind parse_optimizer(const std::string& s) {
  if (s == "adam" || s == "adaptive-moment") return OptimizerKind::kAdam;
  if (s == "sgd" || s == "plain-sgd") return OptimizerKind::kSgd;
  throw Error(ErrorCode::kInvalidArgument, "unknown optimizer '" + s + "'");
}

void OptimizerConfig::validate() const {
  if (!(learning_rate > 0.0)) throw Error(ErrorCode::kInvalidArgument, "learning_rate must be positive");
  if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "adam betas must lie in [0, 1)");
  }
  if (!(eps > 0.0)) throw Error(ErrorCode::kInvalidArgument, "adam eps must be positive");
}

Optimizer::Optimizer(const OptimizerConfig& cfg) : cfg_(cfg) { cfg_.validate(); }

void Optimizer::step(ModelParams& params) {
  ++t_;
  if (cfg_.kind == OptimizerKind::kAdam && m_.size() != params.size()) {
    m_.assign(params.size(), {});
    v_.assign(params.size(), {});
  }
  const double lr = cfg_.learning_rate;
  const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Parameter& p = params[i];
    if (!p.trainable || p.grad.empty()) continue;
    double* w = p.value.data();
    const double* g = p.grad.data();
    const auto n = static_cast<std::size_t>(p.value.size());
    if (cfg_.kind == OptimizerKind::kSgd) {
      for (std::size_t k = 0; k < n; ++k) w[k] -= lr * g[k];
      continue;
    }
    auto& m = m_[i];
    auto& v = v_[i];
    if (m.size() != n) {
      m.assign(n, 0.0);
      v.assign(n, 0.0);
    }
    for (std::size_t k = 0; k < n; ++k) {
      m[k] = cfg_.beta1 * m[k] + (1.0 - cfg_.beta1) * g[k];
      v[k] = cfg_.beta2 * v[k] + (1.0 - cfg_.beta2) * g[k] * g[k];
      w[k] -= lr * (m[k] / c1) / (std::sqrt(v[k] / c2) + cfg_.eps);
    }
  }
}

}  // namespace strokeseg::nn

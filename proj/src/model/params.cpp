// Copyright (c) 2026, strokeseg contributors
// SPDX-License-Identifier: Apache-2.0

#include "strokeseg/nn/params.hpp"

#include <cstring>

#include "strokeseg/error.hpp"

namespace strokeseg::nn {

Tensor& Parameter::gradient() {
  if (!grad.same_shape(value)) grad = Tensor::zeros_like(value);
  return grad;
}

Parameter* ModelParams::add(std::string name, Tensor value, bool trainable) {
  if (index_.count(name)) throw Error(ErrorCode::kInvalidArgument, "duplicate parameter name '" + name + "'");
  index_.emplace(name, entries_.size());
  auto p = std::make_unique<Parameter>();
  p->name = std::move(name);
  p->value = std::move(value);
  p->trainable = trainable;
  entries_.push_back(std::move(p));
  return entries_.back().get();
}

Parameter* ModelParams::find(const std::string& name) {
  const auto it = index_.find(name);
  return it == index_.end() ? nullptr : entries_[it->second].get();
}

const Parameter* ModelParams::find(const std::string& name) const {
  const auto it = index_.find(name);
  return it == index_.end() ? nullptr : entries_[it->second].get();
}

Parameter& ModelParams::at(const std::string& name) {
  Parameter* p = find(name);
  if (!p) throw Error(ErrorCode::kInvalidArgument, "no parameter named '" + name + "'");
  return *p;
}

void ModelParams::zero_grad() {
  for (auto& p : entries_) {
    if (!p->grad.empty()) p->grad.fill(0.0);
  }
}

void ModelParams::copy_values_from(const ModelParams& other) {
  if (other.size() != size()) throw Error(ErrorCode::kCheckpointMismatch, "parameter count differs");
  for (std::size_t i = 0; i < size(); ++i) {
    if (entries_[i]->name != other[i].name || !entries_[i]->value.same_shape(other[i].value)) {
      throw Error(ErrorCode::kCheckpointMismatch, "parameter mismatch at '" + entries_[i]->name + "'");
    }
    entries_[i]->value = other[i].value;
  }
}

std::vector<Tensor> ModelParams::snapshot() const {
  std::vector<Tensor> out;
  out.reserve(size());
  for (const auto& p : entries_) out.push_back(p->value);
  return out;
}

void ModelParams::restore(const std::vector<Tensor>& values) {
  if (values.size() != size()) throw Error(ErrorCode::kCheckpointMismatch, "snapshot size differs");
  for (std::size_t i = 0; i < size(); ++i) {
    if (!values[i].same_shape(entries_[i]->value)) {
      throw Error(ErrorCode::kCheckpointMismatch, "snapshot shape differs at '" + entries_[i]->name + "'");
    }
    entries_[i]->value = values[i];
  }
}

std::uint64_t ModelParams::checksum() const {
  std::uint64_t h = 1469598103934665603ull;
  auto mix = [&h](const void* data, std::size_t n) {
    const auto* b = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= b[i];
      h *= 1099511628211ull;
    }
  };
  for (const auto& p : entries_) {
    mix(p->name.data(), p->name.size());
    mix(p->value.data(), sizeof(double) * static_cast<std::size_t>(p->value.size()));
  }
  return h;
}

std::int64_t count_parameters(const ModelParams& params) {
  std::int64_t n = 0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i].trainable) n += params[i].value.size();
  }
  return n;
}

}  // namespace strokeseg::nn

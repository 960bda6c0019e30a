// Copyright (c) 2026, strokeseg contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "strokeseg/nn/tensor.hpp"

namespace strokeseg::nn {

/// One named array. Buffers (BatchNorm running statistics) are stored
/// alongside weights but are not trainable and receive no gradient.
struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;  // allocated on first use
  bool trainable = true;

  Tensor& gradient();
};

/// All learnable weights and buffers of a network, keyed by stable
/// hierarchical names ("unet.enc0.conv0.weight", ...). Entries live at fixed
/// addresses, so layers may keep Parameter pointers across moves of the store.
class ModelParams {
 public:
  ModelParams() = default;
  ModelParams(const ModelParams&) = delete;
  ModelParams& operator=(const ModelParams&) = delete;
  ModelParams(ModelParams&&) = default;
  ModelParams& operator=(ModelParams&&) = default;

  /// Registers a new entry; throws kInvalidArgument on a duplicate name.
  Parameter* add(std::string name, Tensor value, bool trainable = true);

  Parameter* find(const std::string& name);
  const Parameter* find(const std::string& name) const;
  Parameter& at(const std::string& name);

  std::size_t size() const { return entries_.size(); }
  Parameter& operator[](std::size_t i) { return *entries_[i]; }
  const Parameter& operator[](std::size_t i) const { return *entries_[i]; }

  void zero_grad();
  /// Copies values (not gradients) from a store with identical names/shapes.
  void copy_values_from(const ModelParams& other);
  /// Value snapshot in registration order.
  std::vector<Tensor> snapshot() const;
  void restore(const std::vector<Tensor>& values);

  /// FNV-1a over names and raw value bytes; equal iff bitwise-identical.
  std::uint64_t checksum() const;

 private:
  std::vector<std::unique_ptr<Parameter>> entries_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// Sum of element counts over trainable entries.
std::int64_t count_parameters(const ModelParams& params);

}  // namespace strokeseg::nn

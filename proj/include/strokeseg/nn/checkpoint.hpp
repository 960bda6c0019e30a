// Copyright (c) 2026, strokeseg contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <memory>

#include "json.hpp"
#include "strokeseg/nn/network.hpp"

namespace strokeseg::nn {

// File layout: 8-byte magic "SSEGCKPT", uint32 version, uint64 header
// length, JSON header {config, params: [{name, shape, trainable}], extra},
// then every parameter's values as little-endian float64 in header order.

void save_checkpoint(const SegmentationNetwork& net, const std::filesystem::path& path,
                     const nlohmann::json& extra = nlohmann::json::object());

struct CheckpointHeader {
  ModelConfig config;
  nlohmann::json params;
  nlohmann::json extra;
};

CheckpointHeader read_checkpoint_header(const std::filesystem::path& path);

/// Loads values into an existing network. Throws kCheckpointMismatch naming
/// the first parameter whose name or shape differs.
void load_checkpoint_into(SegmentationNetwork& net, const std::filesystem::path& path);

/// Builds a network from the stored config and loads its values.
std::unique_ptr<SegmentationNetwork> load_checkpoint(const std::filesystem::path& path);

}  // namespace strokeseg::nn

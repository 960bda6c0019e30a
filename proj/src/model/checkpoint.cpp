// Copyright (c) 2026, strokeseg contributors
// SPDX-License-Identifier: Apache-2.0

#include "strokeseg/nn/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "strokeseg/error.hpp"

namespace strokeseg::nn {
namespace {

constexpr char kMagic[8] = {'S', 'S', 'E', 'G', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kVersion = 1;

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

struct Opened {
  std::ifstream in;
  CheckpointHeader header;
};

Opened open_checkpoint(const std::filesystem::path& path) {
  Opened o;
  o.in.open(path, std::ios::binary);
  if (!o.in) throw Error(ErrorCode::kMissingFile, "cannot open checkpoint " + path.string());
  char magic[8];
  std::uint32_t version = 0;
  std::uint64_t len = 0;
  o.in.read(magic, 8);
  o.in.read(reinterpret_cast<char*>(&version), sizeof version);
  o.in.read(reinterpret_cast<char*>(&len), sizeof len);
  if (!o.in || std::memcmp(magic, kMagic, 8) != 0 || version != kVersion || len > (std::uint64_t{1} << 30)) {
    throw Error(ErrorCode::kMalformedHeader, path.string() + ": not a strokeseg checkpoint");
  }
  std::string text(len, '\0');
  o.in.read(text.data(), static_cast<std::streamsize>(len));
  if (!o.in) throw Error(ErrorCode::kMalformedHeader, path.string() + ": truncated header");
  try {
    const auto j = nlohmann::json::parse(text);
    o.header.config = model_config_from_json(j.at("config"));
    o.header.params = j.at("params");
    o.header.extra = j.value("extra", nlohmann::json::object());
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kMalformedHeader, path.string() + ": " + e.what());
  }
  return o;
}

}  // namespace

void save_checkpoint(const SegmentationNetwork& net, const std::filesystem::path& path, const nlohmann::json& extra) {
  const ModelParams& params = net.params();
  nlohmann::json list = nlohmann::json::array();
  for (std::size_t i = 0; i < params.size(); ++i) {
    list.push_back({{"name", params[i].name}, {"shape", params[i].value.dims()}, {"trainable", params[i].trainable}});
  }
  const std::string header = nlohmann::json{{"config", to_json(net.config())}, {"params", list}, {"extra", extra}}.dump();
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kUnwritablePath, "cannot write checkpoint " + path.string());
  const std::uint64_t len = header.size();
  out.write(kMagic, 8);
  out.write(reinterpret_cast<const char*>(&kVersion), sizeof kVersion);
  out.write(reinterpret_cast<const char*>(&len), sizeof len);
  out.write(header.data(), static_cast<std::streamsize>(len));
  for (std::size_t i = 0; i < params.size(); ++i) {
    out.write(reinterpret_cast<const char*>(params[i].value.data()),
              static_cast<std::streamsize>(sizeof(double) * params[i].value.size()));
  }
  if (!out) throw Error(ErrorCode::kUnwritablePath, "failed writing checkpoint " + path.string());
}

CheckpointHeader read_checkpoint_header(const std::filesystem::path& path) { return open_checkpoint(path).header; }

void load_checkpoint_into(SegmentationNetwork& net, const std::filesystem::path& path) {
  Opened o = open_checkpoint(path);
  ModelParams& params = net.params();
  const auto& list = o.header.params;
  for (std::size_t i = 0; i < std::max(params.size(), list.size()); ++i) {
    if (i >= list.size()) {
      throw Error(ErrorCode::kCheckpointMismatch, "checkpoint lacks parameter '" + params[i].name + "'");
    }
    const std::string name = list[i].at("name").get<std::string>();
    if (i >= params.size() || params[i].name != name) {
      throw Error(ErrorCode::kCheckpointMismatch, "unexpected parameter '" + name + "' in checkpoint");
    }
    if (list[i].at("shape").get<std::vector<std::int64_t>>() != params[i].value.dims()) {
      throw Error(ErrorCode::kCheckpointMismatch, "shape mismatch for parameter '" + name + "'");
    }
  }
  std::vector<Tensor> values;
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor t(params[i].value.dims());
    o.in.read(reinterpret_cast<char*>(t.data()), static_cast<std::streamsize>(sizeof(double) * t.size()));
    if (!o.in) throw Error(ErrorCode::kMalformedHeader, path.string() + ": truncated data at '" + params[i].name + "'");
    values.push_back(std::move(t));
  }
  params.restore(values);
}

std::unique_ptr<SegmentationNetwork> load_checkpoint(const std::filesystem::path& path) {
  auto net = std::make_unique<SegmentationNetwork>(read_checkpoint_header(path).config, 0);
  load_checkpoint_into(*net, path);
  return net;
}

}  // namespace strokeseg::nn

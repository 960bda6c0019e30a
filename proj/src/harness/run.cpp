// Copyright (c) 2026, strokeseg contributors
// SPDX-License-Identifier: Apache-2.0

#include "strokeseg/harness/run.hpp"

#include <fstream>
#include <sstream>

#include "strokeseg/build_info.hpp"
#include "strokeseg/error.hpp"
#include "strokeseg/volume_io.hpp"

namespace strokeseg::harness {
namespace {

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kUnwritablePath, "cannot write " + path.string());
  out << text;
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kMissingFile, "cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

nlohmann::json read_json(const std::filesystem::path& path) {
  try {
    return nlohmann::json::parse(read_text(path));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kMalformedHeader, path.string() + ": " + e.what());
  }
}

}  // namespace

nlohmann::json run_info(const TrainConfig& cfg) {
  return {{"seed", cfg.seed}, {"source_hash", kSourceHash}, {"config", to_json(cfg)}};
}

void save_run(const RunRecord& run, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir)) {
    throw Error(ErrorCode::kUnwritablePath, "cannot create run directory " + dir.string());
  }
  nlohmann::json info = run_info(run.config);
  for (const auto& [k, v] : run.info.items()) info[k] = v;
  write_text(dir / "config.txt", to_config_text(run.config));
  write_text(dir / "run.json", info.dump(2) + "\n");
  write_text(dir / "history.json", run.history.to_json().dump(2) + "\n");
  if (run.metrics) {
    write_text(dir / "metrics.json", run.metrics->to_json());
    write_text(dir / "metrics.csv", run.metrics->to_csv());
  }
  if (!run.cases.empty()) {
    std::filesystem::create_directories(dir / "cases");
    nlohmann::json ids = nlohmann::json::array();
    for (const auto& c : run.cases) {
      save_volume(c.image, dir / "cases" / (c.id + "_image.nii.gz"));
      save_mask(c.truth, dir / "cases" / (c.id + "_truth.nii.gz"));
      save_mask(c.prediction, dir / "cases" / (c.id + "_pred.nii.gz"));
      ids.push_back(c.id);
    }
    write_text(dir / "cases" / "cases.json", ids.dump() + "\n");
  }
}

RunRecord load_run(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw Error(ErrorCode::kMissingFile, "no run directory at " + dir.string());
  RunRecord run;
  run.config = load_config(dir / "config.txt");
  run.info = read_json(dir / "run.json");
  run.history = TrainingHistory::from_json(read_json(dir / "history.json"));
  if (std::filesystem::exists(dir / "metrics.json")) {
    run.metrics = metrics::MetricsReport::from_json(read_text(dir / "metrics.json"));
  }
  if (std::filesystem::exists(dir / "cases" / "cases.json")) {
    for (const auto& id : read_json(dir / "cases" / "cases.json")) {
      const std::string s = id.get<std::string>();
      run.cases.push_back({s, load_volume(dir / "cases" / (s + "_image.nii.gz")),
                           load_mask(dir / "cases" / (s + "_truth.nii.gz")),
                           load_mask(dir / "cases" / (s + "_pred.nii.gz"))});
    }
  }
  return run;
}

}  // namespace strokeseg::harness

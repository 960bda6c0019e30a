// Copyright (c) 2026, strokeseg contributors
// SPDX-License-Identifier: Apache-2.0

#include "strokeseg/harness/ablation.hpp"

#include <map>
#include <sstream>

#include "strokeseg/error.hpp"

namespace strokeseg::harness {
namespace {

std::optional<double> mean_of(const std::vector<std::optional<double>>& v) {
  double s = 0.0;
  for (const auto& x : v) {
    if (!x) return std::nullopt;
    s += *x;
  }
  return v.empty() ? std::nullopt : std::optional<double>(s / static_cast<double>(v.size()));
}

nlohmann::json opt_json(const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); }

std::optional<double> hd95_mean(const metrics::MetricsReport& r) {
  return r.hd95.defined > 0 ? std::optional<double>(r.hd95.mean) : std::nullopt;
}

}  // namespace

const char* to_string(AblationAxis a) { return a == AblationAxis::kSwinGce ? "swin_gce" : "preprocessing"; }

AblationAxis parse_ablation_axis(const std::string& s) {
  if (s == "swin_gce") return AblationAxis::kSwinGce;
  if (s == "preprocessing") return AblationAxis::kPreprocessing;
  throw Error(ErrorCode::kInvalidArgument, "unknown ablation axis '" + s + "' (swin_gce|preprocessing)");
}

std::pair<TrainConfig, TrainConfig> ablation_configs(const TrainConfig& base, AblationAxis axis, std::uint64_t seed) {
  TrainConfig on = base, off = base;
  on.seed = off.seed = seed;
  if (axis == AblationAxis::kSwinGce) {
    on.model.use_swin_gce = true;
    off.model.use_swin_gce = false;
  } else {
    on.pipeline.mode = preprocess::PipelineMode::kComprehensive;
    off.pipeline.mode = preprocess::PipelineMode::kBasic;
  }
  on.validate();
  off.validate();
  return {on, off};
}

AblationResult run_ablation(const TrainConfig& base, AblationAxis axis, const std::vector<std::uint64_t>& seeds,
                            const synth::Dataset& raw, const AblationProgressFn& progress) {
  if (seeds.empty()) throw Error(ErrorCode::kInvalidArgument, "ablation needs at least one seed");
  raw.validate();
  const auto [train_raw, test_raw] = synth::split_dataset(raw, base.train_fraction, base.split_seed);
  if (test_raw.subjects.empty()) throw Error(ErrorCode::kEmptyDataset, "ablation split leaves no test subjects");

  std::map<preprocess::PipelineMode, std::pair<synth::Dataset, synth::Dataset>> prepared;
  auto data_for = [&](const TrainConfig& c) -> const std::pair<synth::Dataset, synth::Dataset>& {
    auto it = prepared.find(c.pipeline.mode);
    if (it == prepared.end()) {
      it = prepared.emplace(c.pipeline.mode, std::make_pair(prepare_dataset(train_raw, c.pipeline),
                                                             prepare_dataset(test_raw, c.pipeline))).first;
    }
    return it->second;
  };

  AblationResult result;
  result.axis = axis;
  for (std::uint64_t seed : seeds) {
    AblationPair pair;
    pair.seed = seed;
    auto [cfg_on, cfg_off] = ablation_configs(base, axis, seed);
    pair.differing_keys = config_diff(cfg_on, cfg_off);
    if (pair.differing_keys.size() != 1) {
      throw Error(ErrorCode::kInvalidArgument, "ablation arms must differ in exactly one config field");
    }
    for (auto* arm : {&pair.on, &pair.off}) {
      arm->config = arm == &pair.on ? cfg_on : cfg_off;
      const auto& [tr, te] = data_for(arm->config);
      const std::string label = arm == &pair.on ? "on" : "off";
      ProgressFn fn;
      if (progress) fn = [&](const EpochRecord& r) { progress(label, seed, r); };
      TrainResult run = train(arm->config, tr, te, fn);
      arm->history = std::move(run.history);
      arm->report = evaluate(*run.model, te, arm->config.loss_weights).report;
      ++result.training_runs;
    }
    pair.delta_dsc = pair.on.report.dsc.mean - pair.off.report.dsc.mean;
    const auto h_on = hd95_mean(pair.on.report), h_off = hd95_mean(pair.off.report);
    if (h_on && h_off) pair.delta_hd95 = *h_on - *h_off;
    result.pairs.push_back(std::move(pair));
  }

  std::vector<std::optional<double>> hon, hoff, hd;
  for (const auto& p : result.pairs) {
    result.mean_dsc_on += p.on.report.dsc.mean;
    result.mean_dsc_off += p.off.report.dsc.mean;
    hon.push_back(hd95_mean(p.on.report));
    hoff.push_back(hd95_mean(p.off.report));
    hd.push_back(p.delta_hd95);
  }
  const double k = static_cast<double>(result.pairs.size());
  result.mean_dsc_on /= k;
  result.mean_dsc_off /= k;
  result.mean_delta_dsc = result.mean_dsc_on - result.mean_dsc_off;
  result.mean_hd95_on = mean_of(hon);
  result.mean_hd95_off = mean_of(hoff);
  result.mean_delta_hd95 = mean_of(hd);
  return result;
}

nlohmann::json AblationResult::to_json() const {
  nlohmann::json pairs_json = nlohmann::json::array();
  for (const auto& p : pairs) {
    pairs_json.push_back({{"seed", p.seed},
                          {"differing_keys", p.differing_keys},
                          {"dsc_on", p.on.report.dsc.mean},
                          {"dsc_off", p.off.report.dsc.mean},
                          {"hd95_on", opt_json(hd95_mean(p.on.report))},
                          {"hd95_off", opt_json(hd95_mean(p.off.report))},
                          {"delta_dsc", p.delta_dsc},
                          {"delta_hd95", opt_json(p.delta_hd95)}});
  }
  return {{"axis", harness::to_string(axis)},
          {"training_runs", training_runs},
          {"pairs", pairs_json},
          {"mean_dsc_on", mean_dsc_on},
          {"mean_dsc_off", mean_dsc_off},
          {"mean_delta_dsc", mean_delta_dsc},
          {"mean_hd95_on", opt_json(mean_hd95_on)},
          {"mean_hd95_off", opt_json(mean_hd95_off)},
          {"mean_delta_hd95", opt_json(mean_delta_hd95)}};
}

std::string AblationResult::summary() const {
  std::ostringstream os;
  os.precision(4);
  os << std::fixed;
  const char* on = axis == AblationAxis::kSwinGce ? "with context branch" : "comprehensive";
  const char* off = axis == AblationAxis::kSwinGce ? "without context branch" : "basic";
  for (const auto& p : pairs) {
    os << "seed " << p.seed << ": DSC " << on << " " << p.on.report.dsc.mean << ", " << off << " "
       << p.off.report.dsc.mean << ", delta " << p.delta_dsc << "\n";
  }
  os << "mean DSC " << on << " " << mean_dsc_on << ", " << off << " " << mean_dsc_off << ", delta " << mean_delta_dsc
     << "\n";
  return os.str();
}

}  // namespace strokeseg::harness

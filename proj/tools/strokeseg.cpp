// Copyright (c) 2026, strokeseg contributors
// SPDX-License-Identifier: Apache-2.0

// Command-line front end. Exit codes: 0 success, 1 usage error, 2 runtime failure.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "strokeseg/error.hpp"
#include "strokeseg/harness/ablation.hpp"
#include "strokeseg/harness/config.hpp"
#include "strokeseg/harness/report.hpp"
#include "strokeseg/harness/run.hpp"
#include "strokeseg/harness/training.hpp"
#include "strokeseg/metrics.hpp"
#include "strokeseg/nn/checkpoint.hpp"
#include "strokeseg/preprocess.hpp"
#include "strokeseg/synthdata.hpp"
#include "strokeseg/volume_io.hpp"

namespace fs = std::filesystem;
using namespace strokeseg;

namespace {

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw Error(ErrorCode::kUnwritablePath, "cannot write " + path.string());
}

harness::TrainConfig config_or_default(const std::string& path) {
  return path.empty() ? harness::TrainConfig{} : harness::load_config(path);
}

void log_epoch(const harness::EpochRecord& e) {
  std::fprintf(stderr, "epoch %d  train loss %.4f", e.epoch, e.train_loss);
  if (e.test_loss) std::fprintf(stderr, "  test loss %.4f", *e.test_loss);
  if (e.test_dsc) std::fprintf(stderr, "  dsc %.4f", *e.test_dsc);
  if (e.test_hd95) std::fprintf(stderr, "  hd95 %.2f mm", *e.test_hd95);
  std::fprintf(stderr, "  (%.1f s)\n", e.wall_seconds);
}

void write_metrics(const metrics::MetricsReport& r, const fs::path& dir) {
  write_text(dir / "metrics.json", r.to_json());
  write_text(dir / "metrics.csv", r.to_csv());
}

void print_aggregate(const metrics::MetricsReport& r) {
  std::printf("cases %zu  dsc %.4f", r.cases.size(), r.dsc.mean);
  if (r.hd95.defined) std::printf("  hd95 %.2f mm", r.hd95.mean);
  if (r.assd.defined) std::printf("  assd %.3f mm", r.assd.mean);
  std::printf("\n");
}

struct GenerateArgs {
  int n = 10;
  std::string mix = "single-left:1,single-right:1,multiple-both:1";
  std::uint64_t seed = 0;
  std::string out;
  double bias = 0.3;
  double noise = 0.02;
  double spacing = 1.5;
};

void cmd_generate(const GenerateArgs& a) {
  synth::PhantomSpec base;
  base.bias_field_amplitude = a.bias;
  base.noise_std = a.noise;
  base.spacing = {a.spacing, a.spacing, a.spacing};
  const synth::Dataset d = synth::generate_dataset(a.n, synth::parse_mix(a.mix, base), a.seed);
  synth::save_dataset(d, a.out);
  std::printf("wrote %zu subjects to %s\n", d.size(), a.out.c_str());
}

struct PreprocessArgs {
  std::string in, out, mode, config;
};

void cmd_preprocess(const PreprocessArgs& a) {
  preprocess::PipelineConfig p = config_or_default(a.config).pipeline;
  if (!a.mode.empty()) p.mode = preprocess::parse_pipeline_mode(a.mode);
  const synth::Dataset raw = synth::load_dataset(a.in);
  synth::Dataset out;
  out.provenance = raw.provenance + "; preprocessed (" + preprocess::to_string(p.mode) + ")";
  std::string trace;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    auto r = preprocess::run_pipeline(raw.subjects[i], p);
    trace += preprocess::trace_to_json_lines(raw.subjects[i].id, r.trace);
    out.subjects.push_back(std::move(r.subject));
    if (!raw.scenarios.empty()) out.scenarios.push_back(raw.scenarios[i]);
    if (!raw.seeds.empty()) out.seeds.push_back(raw.seeds[i]);
  }
  synth::save_dataset(out, a.out);
  write_text(fs::path(a.out) / "trace.jsonl", trace);
  std::printf("preprocessed %zu subjects into %s\n", out.size(), a.out.c_str());
}

struct TrainArgs {
  std::string config, data, out;
};

void cmd_train(const TrainArgs& a) {
  const harness::TrainConfig cfg = config_or_default(a.config);
  cfg.validate();
  const synth::Dataset raw = synth::load_dataset(a.data);
  auto [train_raw, test_raw] = synth::split_dataset(raw, cfg.train_fraction, cfg.split_seed);
  const synth::Dataset train_set = harness::prepare_dataset(train_raw, cfg.pipeline);
  const synth::Dataset test_set = harness::prepare_dataset(test_raw, cfg.pipeline);
  std::fprintf(stderr, "training on %zu subjects, testing on %zu\n", train_set.size(), test_set.size());

  harness::TrainResult result = harness::train(cfg, train_set, test_set, log_epoch);

  const fs::path out(a.out);
  fs::create_directories(out);
  nn::save_checkpoint(*result.model, out / "model.ckpt",
                      {{"best_epoch", result.best_epoch}, {"best_dsc", result.best_dsc}});

  harness::RunRecord run;
  run.config = cfg;
  run.history = result.history;
  run.info = {{"best_epoch", result.best_epoch},
              {"best_dsc", result.best_dsc},
              {"steps", result.steps},
              {"train_subjects", train_set.size()},
              {"test_subjects", test_set.size()}};
  if (test_set.size() > 0) {
    harness::Evaluation eval = harness::evaluate(*result.model, test_set, cfg.loss_weights);
    for (std::size_t i = 0; i < test_set.size(); ++i) {
      const Subject& s = test_set.subjects[i];
      run.cases.push_back({s.id, s.image, *s.mask, eval.predictions[i]});
    }
    run.metrics = eval.report;
    print_aggregate(eval.report);
  }
  harness::save_run(run, out);
  std::printf("best epoch %d, dsc %.4f; run written to %s\n", result.best_epoch, result.best_dsc, a.out.c_str());
}

struct EvalArgs {
  std::string checkpoint, data, out, config;
};

void cmd_eval(const EvalArgs& a) {
  auto net = nn::load_checkpoint(a.checkpoint);
  synth::Dataset data = synth::load_dataset(a.data);
  std::optional<harness::TrainConfig> cfg;
  if (!a.config.empty()) {
    cfg = harness::load_config(a.config);
    data = harness::prepare_dataset(data, cfg->pipeline);
  }
  const harness::Evaluation eval = harness::evaluate(*net, data, cfg ? cfg->loss_weights : harness::LossWeights{});
  write_metrics(eval.report, a.out);
  print_aggregate(eval.report);
}

struct PredictArgs {
  std::string checkpoint, in, out, config;
};

void cmd_predict(const PredictArgs& a) {
  auto net = nn::load_checkpoint(a.checkpoint);
  Subject s{"input", load_volume(a.in), std::nullopt};
  if (!a.config.empty()) s = preprocess::run_pipeline(s, harness::load_config(a.config).pipeline).subject;
  const Mask m = harness::predict(*net, s.image);
  save_mask(m, a.out);
  std::printf("%zu foreground voxels written to %s\n", m.count(), a.out.c_str());
}

struct AblateArgs {
  std::string config, axis, data, out;
  std::vector<std::uint64_t> seeds{1, 2, 3};
};

void cmd_ablate(const AblateArgs& a) {
  const harness::TrainConfig cfg = config_or_default(a.config);
  const harness::AblationAxis axis = harness::parse_ablation_axis(a.axis);
  synth::Dataset raw;
  if (a.data.empty()) {
    synth::PhantomSpec base;
    base.spacing = {1.0, 1.0, 1.0};
    base.lesion_radius_range_mm = {2.0, 4.0};
    raw = synth::generate_dataset(40, synth::parse_mix("multiple-both:1", base), 2024);
  } else {
    raw = synth::load_dataset(a.data);
  }
  const auto result = harness::run_ablation(
      cfg, axis, a.seeds, raw, [](const std::string& arm, std::uint64_t seed, const harness::EpochRecord& e) {
        std::fprintf(stderr, "[%s seed %llu] ", arm.c_str(), static_cast<unsigned long long>(seed));
        log_epoch(e);
      });
  std::printf("%s", result.summary().c_str());
  if (!a.out.empty()) write_text(fs::path(a.out) / "ablation.json", result.to_json().dump(2) + "\n");
}

struct ReportArgs {
  std::string run_dir, out;
};

void cmd_report(const ReportArgs& a) {
  const harness::RunRecord run = harness::load_run(a.run_dir);
  const auto files =
      harness::write_report(run.history, run.metrics ? &*run.metrics : nullptr, run.cases, a.out);
  std::printf("%s\n%s\n%s\n", files.figure.string().c_str(), files.curves_csv.string().c_str(),
              files.comparison_csv.string().c_str());
  for (const auto& p : files.overlays) std::printf("%s\n", p.string().c_str());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"strokeseg: stroke lesion segmentation on 3D volumes"};
  app.require_subcommand(1);

  GenerateArgs gen;
  auto* g = app.add_subcommand("generate", "Generate a synthetic phantom dataset");
  g->add_option("--n", gen.n, "Number of subjects")->check(CLI::PositiveNumber);
  g->add_option("--mix", gen.mix, "Scenario mix, e.g. single-left:2,multiple-both:1");
  g->add_option("--seed", gen.seed, "Dataset seed");
  g->add_option("--out", gen.out, "Output directory")->required();
  g->add_option("--bias-amplitude", gen.bias, "Peak-to-peak bias field gain over the brain");
  g->add_option("--noise", gen.noise, "Gaussian noise standard deviation");
  g->add_option("--spacing", gen.spacing, "Isotropic voxel spacing in mm")->check(CLI::PositiveNumber);

  PreprocessArgs pre;
  auto* p = app.add_subcommand("preprocess", "Run the preprocessing pipeline over a dataset");
  p->add_option("--in", pre.in, "Input dataset directory")->required();
  p->add_option("--out", pre.out, "Output dataset directory")->required();
  p->add_option("--mode", pre.mode, "Pipeline mode")->check(CLI::IsMember({"comprehensive", "basic"}));
  p->add_option("--config", pre.config, "Config file");

  TrainArgs tr;
  auto* t = app.add_subcommand("train", "Train a model and write a run directory");
  t->add_option("--config", tr.config, "Config file");
  t->add_option("--data", tr.data, "Raw dataset directory")->required();
  t->add_option("--out", tr.out, "Run directory")->required();

  EvalArgs ev;
  auto* e = app.add_subcommand("eval", "Score a checkpoint on a dataset");
  e->add_option("--checkpoint", ev.checkpoint, "Checkpoint file")->required();
  e->add_option("--data", ev.data, "Dataset directory")->required();
  e->add_option("--out", ev.out, "Output directory for metrics.json/csv")->required();
  e->add_option("--config", ev.config, "Preprocess the dataset with this config's pipeline first");

  PredictArgs pr;
  auto* d = app.add_subcommand("predict", "Segment one volume");
  d->add_option("--checkpoint", pr.checkpoint, "Checkpoint file")->required();
  d->add_option("--in", pr.in, "Input volume (.nii, .nii.gz, .mha)")->required();
  d->add_option("--out", pr.out, "Output mask path")->required();
  d->add_option("--config", pr.config, "Preprocess the volume with this config's pipeline first");

  AblateArgs ab;
  auto* a = app.add_subcommand("ablate", "Paired on/off training runs over several seeds");
  a->add_option("--config", ab.config, "Base config file");
  a->add_option("--axis", ab.axis, "Ablated field")->required()->check(CLI::IsMember({"swin_gce", "preprocessing"}));
  a->add_option("--seeds", ab.seeds, "Seeds")->delimiter(',');
  a->add_option("--data", ab.data, "Raw dataset directory (default: 40 generated multi-lesion phantoms at 1 mm)");
  a->add_option("--out", ab.out, "Directory for ablation.json");

  ReportArgs re;
  auto* r = app.add_subcommand("report", "Figures and comparison table for a run directory");
  r->add_option("--run-dir", re.run_dir, "Run directory written by train")->required();
  r->add_option("--out", re.out, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& s) {
    return app.exit(s);
  } catch (const CLI::ParseError& err) {
    app.exit(err);
    return 1;
  }

  try {
    if (*g) cmd_generate(gen);
    if (*p) cmd_preprocess(pre);
    if (*t) cmd_train(tr);
    if (*e) cmd_eval(ev);
    if (*d) cmd_predict(pr);
    if (*a) cmd_ablate(ab);
    if (*r) cmd_report(re);
  } catch (const std::exception& ex) {
    std::cerr << "error: " << ex.what() << "\n";
    return 2;
  }
  return 0;
}

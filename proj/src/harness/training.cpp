// Copyright (c) 2026, strokeseg contributors
// SPDX-License-Identifier: Apache-2.0

#include "strokeseg/harness/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <sstream>

#include "strokeseg/error.hpp"
#include "strokeseg/nn/optimizer.hpp"

namespace strokeseg::harness {
namespace {

constexpr double kDiceSmooth = 1e-5;

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b, std::uint64_t c) {
  std::uint64_t z = a + 0x9e3779b97f4a7c15ULL * (b + 1) + 0xbf58476d1ce4e5b9ULL * (c + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

void require_masks(const synth::Dataset& d, const char* which) {
  for (const auto& s : d.subjects) {
    if (!s.mask) throw Error(ErrorCode::kMissingMask, std::string(which) + " subject '" + s.id + "' has no mask");
  }
}

void require_shape(const synth::Dataset& d, const Index3& shape, const char* which) {
  for (const auto& s : d.subjects) {
    if (s.image.shape() != shape) {
      throw Error(ErrorCode::kShapeMismatch, std::string(which) + " subject '" + s.id +
                                                 "' is not at the configured target shape; preprocess it first");
    }
  }
}

nlohmann::json opt_json(const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); }

std::optional<double> opt_from(const nlohmann::json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<double>();
}

}  // namespace

// ---------------------------------------------------------------- loss

LossValue compound_loss(const nn::Tensor& logits, const nn::Tensor& target, const LossWeights& w) {
  if (!logits.same_shape(target) || logits.rank() != 5 || logits.dim(1) != 1) {
    throw Error(ErrorCode::kShapeMismatch,
                "loss: logits " + logits.shape_string() + " and target " + target.shape_string() + " differ");
  }
  const std::int64_t N = logits.dim(0), S = logits.size() / N;
  const double total = static_cast<double>(logits.size());
  LossValue out;
  out.grad = nn::Tensor::zeros_like(logits);
  std::vector<double> p(static_cast<std::size_t>(logits.size()));
  double ce = 0.0;
  for (std::int64_t i = 0; i < logits.size(); ++i) {
    const double x = logits[i], g = target[i];
    p[static_cast<std::size_t>(i)] = sigmoid(x);
    ce += std::max(x, 0.0) - x * g + std::log1p(std::exp(-std::abs(x)));
  }
  out.ce = ce / total;
  double dice_sum = 0.0;
  for (std::int64_t n = 0; n < N; ++n) {
    double inter = 0.0, sum_p = 0.0, sum_g = 0.0;
    for (std::int64_t i = n * S; i < (n + 1) * S; ++i) {
      inter += p[static_cast<std::size_t>(i)] * target[i];
      sum_p += p[static_cast<std::size_t>(i)];
      sum_g += target[i];
    }
    const double num = 2.0 * inter + kDiceSmooth, den = sum_p + sum_g + kDiceSmooth;
    dice_sum += num / den;
    for (std::int64_t i = n * S; i < (n + 1) * S; ++i) {
      const double pi = p[static_cast<std::size_t>(i)];
      const double dd_dp = (2.0 * target[i] * den - num) / (den * den);
      out.grad[i] = -w.dice * dd_dp * pi * (1.0 - pi) / static_cast<double>(N);
    }
  }
  out.dice_loss = 1.0 - dice_sum / static_cast<double>(N);
  for (std::int64_t i = 0; i < logits.size(); ++i) {
    out.grad[i] += w.ce * (p[static_cast<std::size_t>(i)] - target[i]) / total;
  }
  out.total = w.dice * out.dice_loss + w.ce * out.ce;
  return out;
}

LossValue compound_loss(const nn::Tensor& logits, const Mask& gt, const LossWeights& w) {
  return compound_loss(logits, masks_to_tensor({&gt}), w);
}

nn::Tensor masks_to_tensor(const std::vector<const Mask*>& masks) {
  if (masks.empty()) throw Error(ErrorCode::kEmptyDataset, "no masks to stack");
  const Index3 s = masks.front()->shape();
  nn::Tensor t({static_cast<std::int64_t>(masks.size()), 1, s[0], s[1], s[2]});
  const auto S = static_cast<std::int64_t>(masks.front()->size());
  for (std::size_t n = 0; n < masks.size(); ++n) {
    if (masks[n]->shape() != s) throw Error(ErrorCode::kShapeMismatch, "masks in a batch must share a shape");
    for (std::int64_t i = 0; i < S; ++i) t[static_cast<std::int64_t>(n) * S + i] = (*masks[n])[static_cast<std::size_t>(i)];
  }
  return t;
}

nn::Tensor volumes_to_tensor(const std::vector<const Volume*>& volumes) {
  if (volumes.empty()) throw Error(ErrorCode::kEmptyDataset, "no volumes to stack");
  const Index3 s = volumes.front()->shape();
  nn::Tensor t({static_cast<std::int64_t>(volumes.size()), 1, s[0], s[1], s[2]});
  const auto S = static_cast<std::int64_t>(volumes.front()->size());
  for (std::size_t n = 0; n < volumes.size(); ++n) {
    if (volumes[n]->shape() != s) throw Error(ErrorCode::kShapeMismatch, "volumes in a batch must share a shape");
    std::copy(volumes[n]->values().begin(), volumes[n]->values().end(), t.data() + static_cast<std::int64_t>(n) * S);
  }
  return t;
}

// ---------------------------------------------------------------- history

nlohmann::json TrainingHistory::to_json() const {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& r : records) {
    arr.push_back({{"epoch", r.epoch},
                   {"train_loss", r.train_loss},
                   {"test_loss", opt_json(r.test_loss)},
                   {"test_dsc", opt_json(r.test_dsc)},
                   {"test_hd95", opt_json(r.test_hd95)},
                   {"wall_seconds", r.wall_seconds},
                   {"steps", r.steps}});
  }
  return {{"records", arr}};
}

TrainingHistory TrainingHistory::from_json(const nlohmann::json& j) {
  TrainingHistory h;
  try {
    for (const auto& r : j.at("records")) {
      EpochRecord e;
      e.epoch = r.at("epoch").get<int>();
      e.train_loss = r.at("train_loss").get<double>();
      e.test_loss = opt_from(r, "test_loss");
      e.test_dsc = opt_from(r, "test_dsc");
      e.test_hd95 = opt_from(r, "test_hd95");
      e.wall_seconds = r.value("wall_seconds", 0.0);
      e.steps = r.value("steps", std::int64_t{0});
      h.records.push_back(e);
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kMalformedHeader, std::string("training history: ") + e.what());
  }
  return h;
}

std::string TrainingHistory::to_csv() const {
  std::ostringstream os;
  os.precision(10);
  auto opt = [&os](const std::optional<double>& v) {
    if (v) {
      os << *v;
    } else {
      os << "nan";
    }
  };
  os << "epoch,train_loss,test_loss,test_dsc,test_hd95,wall_seconds\n";
  for (const auto& r : records) {
    os << r.epoch << ',' << r.train_loss << ',';
    opt(r.test_loss);
    os << ',';
    opt(r.test_dsc);
    os << ',';
    opt(r.test_hd95);
    os << ',' << r.wall_seconds << '\n';
  }
  return os.str();
}

// ---------------------------------------------------------------- data

synth::Dataset prepare_dataset(const synth::Dataset& raw, const preprocess::PipelineConfig& cfg) {
  preprocess::PipelineConfig c = cfg;
  c.augment_enabled = false;
  synth::Dataset out = raw;
  for (auto& s : out.subjects) {
    try {
      s = preprocess::run_pipeline(s, c).subject;
    } catch (const Error& e) {
      rethrow_with_stage(e, "subject " + s.id);
    }
  }
  out.provenance = raw.provenance + " | preprocessed (" + preprocess::to_string(cfg.mode) + ")";
  return out;
}

// ---------------------------------------------------------------- evaluate / predict

Evaluation evaluate(nn::SegmentationNetwork& net, const synth::Dataset& data, const LossWeights& w) {
  require_masks(data, "evaluation");
  Evaluation ev;
  double loss_sum = 0.0;
  for (const auto& s : data.subjects) {
    const nn::Tensor logits = net.forward(volumes_to_tensor({&s.image}), nn::Mode::kEval);
    loss_sum += compound_loss(logits, *s.mask, w).total;
    Mask pred(s.image.geometry());
    for (std::int64_t i = 0; i < logits.size(); ++i) pred.set(static_cast<std::size_t>(i), logits[i] > 0.0);
    ev.report.add(s.id, metrics::evaluate_case(pred, *s.mask));
    ev.predictions.push_back(std::move(pred));
  }
  ev.report.finalize();
  ev.mean_loss = data.subjects.empty() ? 0.0 : loss_sum / static_cast<double>(data.subjects.size());
  return ev;
}

Mask predict(nn::SegmentationNetwork& net, const Volume& image, const std::optional<Index3>& expected_shape) {
  if (expected_shape && image.shape() != *expected_shape) {
    throw Error(ErrorCode::kShapeMismatch, "predict: image shape does not match the configured target shape");
  }
  const nn::Tensor logits = net.forward(volumes_to_tensor({&image}), nn::Mode::kEval);
  Mask pred(image.geometry());
  for (std::int64_t i = 0; i < logits.size(); ++i) pred.set(static_cast<std::size_t>(i), logits[i] > 0.0);
  return pred;
}

// ---------------------------------------------------------------- train

TrainResult train(const TrainConfig& cfg, const synth::Dataset& train_set, const synth::Dataset& test_set,
                  const ProgressFn& progress) {
  cfg.validate();
  if (train_set.subjects.empty()) throw Error(ErrorCode::kEmptyDataset, "training set is empty");
  require_masks(train_set, "training");
  require_masks(test_set, "test");
  require_shape(train_set, cfg.pipeline.target_shape, "training");
  require_shape(test_set, cfg.pipeline.target_shape, "test");

  TrainResult result;
  result.model = std::make_unique<nn::SegmentationNetwork>(cfg.model, cfg.seed);
  nn::SegmentationNetwork& net = *result.model;
  net.set_dropout_seed(mix_seed(cfg.seed, 1, 0));
  nn::Optimizer opt(cfg.optimizer);
  std::mt19937_64 shuffle_rng(mix_seed(cfg.seed, 2, 0));

  const std::size_t n = train_set.subjects.size();
  std::vector<std::size_t> order(n);
  std::optional<std::vector<nn::Tensor>> best;
  double best_dsc = -1.0;
  const auto t0 = std::chrono::steady_clock::now();
  bool stop = false;

  for (int epoch = 1; epoch <= cfg.epochs && !stop; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double loss_sum = 0.0;
    std::size_t seen = 0;
    for (std::size_t start = 0; start < n; start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t end = std::min(n, start + static_cast<std::size_t>(cfg.batch_size));
      std::vector<Volume> images;
      std::vector<Mask> masks;
      for (std::size_t k = start; k < end; ++k) {
        const Subject& s = train_set.subjects[order[k]];
        if (cfg.pipeline.augment_enabled) {
          auto a = preprocess::augment(s.image, *s.mask, cfg.pipeline.augmentation,
                                       mix_seed(cfg.pipeline.augment_seed, static_cast<std::uint64_t>(epoch), order[k]));
          images.push_back(std::move(a.image));
          masks.push_back(std::move(a.mask));
        } else {
          images.push_back(s.image);
          masks.push_back(*s.mask);
        }
      }
      std::vector<const Volume*> vp;
      std::vector<const Mask*> mp;
      for (std::size_t k = 0; k < images.size(); ++k) {
        vp.push_back(&images[k]);
        mp.push_back(&masks[k]);
      }
      const std::string where = "epoch " + std::to_string(epoch) + ", batch " +
                                std::to_string(start / static_cast<std::size_t>(cfg.batch_size));
      net.params().zero_grad();
      LossValue loss;
      try {
        const nn::Tensor logits = net.forward(volumes_to_tensor(vp), nn::Mode::kTrain);
        loss = compound_loss(logits, masks_to_tensor(mp), cfg.loss_weights);
      } catch (const Error& e) {
        rethrow_with_stage(e, where);
      }
      if (!std::isfinite(loss.total)) throw Error(ErrorCode::kNonFinite, where + ": non-finite loss");
      net.backward(loss.grad);
      opt.step(net.params());
      loss_sum += loss.total * static_cast<double>(end - start);
      seen += end - start;
      if (cfg.max_steps > 0 && opt.steps() >= cfg.max_steps) {
        stop = true;
        break;
      }
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss_sum / static_cast<double>(seen);
    rec.steps = opt.steps();
    const bool last = stop || epoch == cfg.epochs;
    if (!test_set.subjects.empty() && (epoch % cfg.eval_every == 0 || last)) {
      const Evaluation ev = evaluate(net, test_set, cfg.loss_weights);
      rec.test_loss = ev.mean_loss;
      rec.test_dsc = ev.report.dsc.mean;
      if (ev.report.hd95.defined > 0) rec.test_hd95 = ev.report.hd95.mean;
      if (*rec.test_dsc > best_dsc) {
        best_dsc = *rec.test_dsc;
        result.best_epoch = epoch;
        best = net.params().snapshot();
      }
    }
    rec.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    result.history.records.push_back(rec);
    if (progress) progress(rec);
  }

  result.steps = opt.steps();
  result.final_checksum = net.params().checksum();
  if (best) {
    net.params().restore(*best);
    result.best_dsc = best_dsc;
  }
  result.best_checksum = net.params().checksum();
  return result;
}

}  // namespace strokeseg::harness

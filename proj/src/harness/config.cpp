// Copyright (c) 2026, strokeseg contributors
// SPDX-License-Identifier: Apache-2.0

#include "strokeseg/harness/config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>

#include "strokeseg/error.hpp"

namespace strokeseg::harness {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value, const char* expected) {
  throw Error(ErrorCode::kInvalidArgument, "config key '" + key + "': expected " + expected + ", got '" + value + "'");
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(trim(item));
  return out;
}

template <typename T>
T parse_number(const std::string& key, const std::string& v) {
  T out{};
  const auto* end = v.data() + v.size();
  const auto [p, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || p != end || v.empty()) bad_value(key, v, "a number");
  return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  bad_value(key, v, "a boolean");
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}
std::string fmt(int v) { return std::to_string(v); }
std::string fmt(std::uint64_t v) { return std::to_string(v); }
std::string fmt(bool v) { return v ? "true" : "false"; }

template <typename T, std::size_t N>
std::string fmt(const std::array<T, N>& a) {
  std::string s;
  for (std::size_t i = 0; i < N; ++i) s += (i ? "," : "") + fmt(a[i]);
  return s;
}

template <typename T, std::size_t N>
std::array<T, N> parse_array(const std::string& key, const std::string& v) {
  const auto items = split_list(v);
  if (items.size() != N) bad_value(key, v, "a comma-separated triple");
  std::array<T, N> out{};
  for (std::size_t i = 0; i < N; ++i) out[i] = parse_number<T>(key, items[i]);
  return out;
}

struct Key {
  const char* name;
  std::function<std::string(const TrainConfig&)> get;
  std::function<void(TrainConfig&, const std::string&, const std::string&)> set;
};

#define NUM_KEY(NAME, FIELD, TYPE)                                                                      \
  Key {                                                                                                 \
    NAME, [](const TrainConfig& c) { return fmt(static_cast<TYPE>(c.FIELD)); },                         \
        [](TrainConfig& c, const std::string& k, const std::string& v) { c.FIELD = parse_number<TYPE>(k, v); } \
  }
#define BOOL_KEY(NAME, FIELD)                                                                         \
  Key {                                                                                               \
    NAME, [](const TrainConfig& c) { return fmt(c.FIELD); },                                          \
        [](TrainConfig& c, const std::string& k, const std::string& v) { c.FIELD = parse_bool(k, v); } \
  }

const std::vector<Key>& keys() {
  static const std::vector<Key> table = {
      NUM_KEY("epochs", epochs, int),
      NUM_KEY("batch_size", batch_size, int),
      NUM_KEY("learning_rate", optimizer.learning_rate, double),
      Key{"optimizer", [](const TrainConfig& c) { return std::string(nn::to_string(c.optimizer.kind)); },
          [](TrainConfig& c, const std::string&, const std::string& v) { c.optimizer.kind = nn::parse_optimizer(v); }},
      NUM_KEY("adam_beta1", optimizer.beta1, double),
      NUM_KEY("adam_beta2", optimizer.beta2, double),
      NUM_KEY("adam_eps", optimizer.eps, double),
      NUM_KEY("loss_weight_dice", loss_weights.dice, double),
      NUM_KEY("loss_weight_ce", loss_weights.ce, double),
      NUM_KEY("seed", seed, std::uint64_t),
      NUM_KEY("eval_every", eval_every, int),
      NUM_KEY("max_steps", max_steps, int),
      NUM_KEY("train_fraction", train_fraction, double),
      NUM_KEY("split_seed", split_seed, std::uint64_t),
      NUM_KEY("model.in_channels", model.in_channels, int),
      NUM_KEY("model.base_channels", model.base_channels, int),
      NUM_KEY("model.encoder_depth", model.encoder_depth, int),
      Key{"model.kernel_sizes",
          [](const TrainConfig& c) {
            std::string s;
            for (std::size_t i = 0; i < c.model.kernel_sizes.size(); ++i)
              s += (i ? "," : "") + std::to_string(c.model.kernel_sizes[i]);
            return s;
          },
          [](TrainConfig& c, const std::string& k, const std::string& v) {
            c.model.kernel_sizes.clear();
            if (trim(v).empty()) return;
            for (const auto& item : split_list(v)) c.model.kernel_sizes.push_back(parse_number<int>(k, item));
          }},
      NUM_KEY("model.convs_per_block", model.convs_per_block, int),
      NUM_KEY("model.dropout_rate", model.dropout_rate, double),
      NUM_KEY("model.swin.window_size", model.swin.window_size, int),
      NUM_KEY("model.swin.num_heads", model.swin.num_heads, int),
      NUM_KEY("model.swin.embed_dim", model.swin.embed_dim, int),
      NUM_KEY("model.swin.num_blocks", model.swin.num_blocks, int),
      NUM_KEY("model.swin.mlp_ratio", model.swin.mlp_ratio, double),
      BOOL_KEY("model.swin.reduce", model.swin.reduce),
      NUM_KEY("model.swin.out_channels", model.swin.out_channels, int),
      Key{"model.swin.residual", [](const TrainConfig& c) { return std::string(nn::to_string(c.model.swin.residual)); },
          [](TrainConfig& c, const std::string&, const std::string& v) {
            c.model.swin.residual = nn::parse_swin_residual(v);
          }},
      NUM_KEY("model.fusion_channels", model.fusion_channels, int),
      BOOL_KEY("model.use_swin_gce", model.use_swin_gce),
      NUM_KEY("model.out_channels", model.out_channels, int),
      Key{"pipeline.mode", [](const TrainConfig& c) { return std::string(preprocess::to_string(c.pipeline.mode)); },
          [](TrainConfig& c, const std::string&, const std::string& v) {
            c.pipeline.mode = preprocess::parse_pipeline_mode(v);
          }},
      Key{"pipeline.target_spacing", [](const TrainConfig& c) { return fmt(c.pipeline.target_spacing); },
          [](TrainConfig& c, const std::string& k, const std::string& v) {
            c.pipeline.target_spacing = parse_array<double, 3>(k, v);
          }},
      Key{"pipeline.target_shape", [](const TrainConfig& c) { return fmt(c.pipeline.target_shape); },
          [](TrainConfig& c, const std::string& k, const std::string& v) {
            c.pipeline.target_shape = parse_array<int, 3>(k, v);
          }},
      NUM_KEY("pipeline.bias.max_iterations", pipeline.bias_correction.max_iterations, int),
      NUM_KEY("pipeline.bias.smoothing_scale_mm", pipeline.bias_correction.smoothing_scale_mm, double),
      NUM_KEY("pipeline.bias.convergence_tol", pipeline.bias_correction.convergence_tol, double),
      NUM_KEY("pipeline.bias.epsilon", pipeline.bias_correction.epsilon, double),
      NUM_KEY("pipeline.bias.outlier_threshold", pipeline.bias_correction.outlier_threshold, double),
      BOOL_KEY("pipeline.bias.otsu_mask", pipeline.bias_correction.otsu_mask),
      BOOL_KEY("pipeline.augment_enabled", pipeline.augment_enabled),
      NUM_KEY("pipeline.augment_seed", pipeline.augment_seed, std::uint64_t),
      NUM_KEY("pipeline.augment.flip_probability", pipeline.augmentation.flip_probability_per_axis, double),
      NUM_KEY("pipeline.augment.max_rotation_degrees", pipeline.augmentation.max_rotation_degrees, double),
      Key{"pipeline.augment.scale_range",
          [](const TrainConfig& c) {
            return fmt(c.pipeline.augmentation.affine_scale_range.first) + "," +
                   fmt(c.pipeline.augmentation.affine_scale_range.second);
          },
          [](TrainConfig& c, const std::string& k, const std::string& v) {
            const auto a = parse_array<double, 2>(k, v);
            c.pipeline.augmentation.affine_scale_range = {a[0], a[1]};
          }},
      NUM_KEY("pipeline.augment.translation_mm", pipeline.augmentation.affine_translation_mm, double),
  };
  return table;
}

#undef NUM_KEY
#undef BOOL_KEY

}  // namespace

void TrainConfig::validate() const {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw Error(ErrorCode::kInvalidArgument, std::string("train config: ") + what);
  };
  require(epochs >= 1, "epochs must be >= 1");
  require(batch_size >= 1, "batch_size must be >= 1");
  require(eval_every >= 1, "eval_every must be >= 1");
  require(max_steps >= 0, "max_steps must be >= 0");
  require(loss_weights.dice >= 0.0 && loss_weights.ce >= 0.0, "loss weights must be non-negative");
  require(loss_weights.dice + loss_weights.ce > 0.0, "at least one loss weight must be positive");
  require(train_fraction > 0.0 && train_fraction <= 1.0, "train_fraction must lie in (0, 1]");
  optimizer.validate();
  model.validate();
  pipeline.validate();
  for (int d : pipeline.target_shape) {
    require(d % model.spatial_divisor() == 0, "pipeline target_shape must be divisible by the model's spatial divisor");
  }
}

TrainConfig parse_config(const std::string& text) {
  TrainConfig cfg;
  std::stringstream ss(text);
  std::string line;
  int lineno = 0;
  while (std::getline(ss, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw Error(ErrorCode::kInvalidArgument, "config line " + std::to_string(lineno) + ": expected key = value");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    bool found = false;
    for (const auto& k : keys()) {
      if (key == k.name) {
        k.set(cfg, key, value);
        found = true;
        break;
      }
    }
    if (!found) throw Error(ErrorCode::kInvalidArgument, "config line " + std::to_string(lineno) + ": unknown key '" + key + "'");
  }
  cfg.validate();
  return cfg;
}

TrainConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kMissingFile, "cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return parse_config(ss.str());
  } catch (const Error& e) {
    rethrow_with_stage(e, path.string());
  }
}

std::vector<std::pair<std::string, std::string>> config_entries(const TrainConfig& cfg) {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& k : keys()) out.emplace_back(k.name, k.get(cfg));
  return out;
}

std::vector<std::string> config_keys() {
  std::vector<std::string> out;
  for (const auto& k : keys()) out.emplace_back(k.name);
  return out;
}

std::string to_config_text(const TrainConfig& cfg) {
  std::string out;
  for (const auto& [k, v] : config_entries(cfg)) out += k + " = " + v + "\n";
  return out;
}

nlohmann::json to_json(const TrainConfig& cfg) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [k, v] : config_entries(cfg)) j[k] = v;
  return j;
}

std::vector<std::string> config_diff(const TrainConfig& a, const TrainConfig& b) {
  const auto ea = config_entries(a), eb = config_entries(b);
  std::vector<std::string> out;
  for (std::size_t i = 0; i < ea.size(); ++i)
    if (ea[i].second != eb[i].second) out.push_back(ea[i].first);
  return out;
}

}  // namespace strokeseg::harness

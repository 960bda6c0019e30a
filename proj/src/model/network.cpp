// Copyright (c) 2026, strokeseg contributors
// SPDX-License-Identifier: Apache-2.0

#include "strokeseg/nn/network.hpp"

#include <numeric>

#include "strokeseg/error.hpp"

namespace strokeseg::nn {
namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw Error(ErrorCode::kInvalidArgument, "model config: " + what);
}

template <typename F>
auto staged(const char* stage, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const Error& e) {
    rethrow_with_stage(e, stage);
  }
}

}  // namespace

// ---------------------------------------------------------------- ModelConfig

ModelConfig ModelConfig::toy() { return ModelConfig{}; }

ModelConfig ModelConfig::large() {
  ModelConfig c;
  c.base_channels = 32;
  c.encoder_depth = 5;
  c.swin.window_size = 7;
  c.swin.num_heads = 24;
  c.swin.embed_dim = 768;
  c.swin.num_blocks = 10;
  c.swin.out_channels = 32;
  c.fusion_channels = 64;
  return c;
}

void ModelConfig::validate() const {
  require(in_channels >= 1, "in_channels must be >= 1");
  require(base_channels >= 1, "base_channels must be >= 1");
  require(encoder_depth >= 1, "encoder_depth must be >= 1");
  require(kernel_sizes.empty() || static_cast<int>(kernel_sizes.size()) == encoder_depth,
          "kernel_sizes needs one entry per level");
  for (int k : kernel_sizes) require(k >= 1 && k % 2 == 1, "kernel sizes must be odd and positive");
  require(convs_per_block >= 1, "convs_per_block must be >= 1");
  require(dropout_rate >= 0.0 && dropout_rate < 1.0, "dropout_rate must lie in [0, 1)");
  require(fusion_channels >= 1, "fusion_channels must be >= 1");
  require(out_channels == 1, "out_channels must be 1 (single foreground logit)");
  require(swin.window_size >= 1, "swin window_size must be >= 1");
  require(swin.num_heads >= 1 && swin.embed_dim % swin.num_heads == 0,
          "swin embed_dim must be divisible by num_heads");
  require(swin.num_blocks >= 2 && swin.num_blocks % 2 == 0, "swin num_blocks must be even and >= 2");
  require(swin.mlp_ratio > 0.0, "swin mlp_ratio must be positive");
  require(swin.out_channels >= 1, "swin out_channels must be >= 1");
}

int ModelConfig::kernel_size(int level) const {
  return kernel_sizes.empty() ? 3 : kernel_sizes.at(static_cast<std::size_t>(level));
}

std::int64_t ModelConfig::level_channels(int level) const {
  return static_cast<std::int64_t>(base_channels) << level;
}

std::int64_t ModelConfig::spatial_divisor() const {
  const std::int64_t unet = std::int64_t{1} << (encoder_depth - 1);
  const std::int64_t swin_div = use_swin_gce && swin.reduce ? 2 : 1;
  return std::lcm(unet, swin_div);
}

nlohmann::json to_json(const ModelConfig& c) {
  return {
      {"in_channels", c.in_channels},
      {"base_channels", c.base_channels},
      {"encoder_depth", c.encoder_depth},
      {"kernel_sizes", c.kernel_sizes},
      {"convs_per_block", c.convs_per_block},
      {"dropout_rate", c.dropout_rate},
      {"swin",
       {{"window_size", c.swin.window_size},
        {"num_heads", c.swin.num_heads},
        {"embed_dim", c.swin.embed_dim},
        {"num_blocks", c.swin.num_blocks},
        {"mlp_ratio", c.swin.mlp_ratio},
        {"reduce", c.swin.reduce},
        {"out_channels", c.swin.out_channels},
        {"residual", to_string(c.swin.residual)}}},
      {"fusion_channels", c.fusion_channels},
      {"use_swin_gce", c.use_swin_gce},
      {"out_channels", c.out_channels},
  };
}

ModelConfig model_config_from_json(const nlohmann::json& j) {
  try {
    ModelConfig c;
    c.in_channels = j.at("in_channels").get<int>();
    c.base_channels = j.at("base_channels").get<int>();
    c.encoder_depth = j.at("encoder_depth").get<int>();
    c.kernel_sizes = j.at("kernel_sizes").get<std::vector<int>>();
    c.convs_per_block = j.at("convs_per_block").get<int>();
    c.dropout_rate = j.at("dropout_rate").get<double>();
    const auto& s = j.at("swin");
    c.swin.window_size = s.at("window_size").get<int>();
    c.swin.num_heads = s.at("num_heads").get<int>();
    c.swin.embed_dim = s.at("embed_dim").get<int>();
    c.swin.num_blocks = s.at("num_blocks").get<int>();
    c.swin.mlp_ratio = s.at("mlp_ratio").get<double>();
    c.swin.reduce = s.at("reduce").get<bool>();
    c.swin.out_channels = s.at("out_channels").get<int>();
    c.swin.residual = parse_swin_residual(s.at("residual").get<std::string>());
    c.fusion_channels = j.at("fusion_channels").get<int>();
    c.use_swin_gce = j.at("use_swin_gce").get<bool>();
    c.out_channels = j.at("out_channels").get<int>();
    c.validate();
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kMalformedHeader, std::string("model config: ") + e.what());
  }
}

// ---------------------------------------------------------------- ResidualBlock

ResidualBlock::ResidualBlock(ModelParams& store, const std::string& name, std::int64_t cin, std::int64_t cout,
                             int kernel, int num_convs, double dropout_rate, std::mt19937_64* dropout_rng,
                             std::mt19937_64& init)
    : drop_(dropout_rate, dropout_rng) {
  for (int i = 0; i < num_convs; ++i) {
    const std::string idx = std::to_string(i);
    convs_.emplace_back(store, name + ".conv" + idx, i == 0 ? cin : cout, cout, kernel, false, init);
    norms_.emplace_back(store, name + ".bn" + idx, cout);
    acts_.emplace_back(store, name + ".prelu" + idx, cout);
  }
  if (cin != cout) proj_.emplace(store, name + ".proj", cin, cout, 1, true, init);
}

Tensor ResidualBlock::forward(const Tensor& x, Mode mode) {
  check_finite(x, "residual block input");
  const std::size_t n = convs_.size();
  Tensor h = x;
  for (std::size_t i = 0; i + 1 < n; ++i) h = acts_[i].forward(norms_[i].forward(convs_[i].forward(h), mode));
  Tensor s = norms_[n - 1].forward(convs_[n - 1].forward(h), mode);
  add_inplace(s, proj_ ? proj_->forward(x) : x);
  return drop_.forward(acts_[n - 1].forward(s), mode);
}

Tensor ResidualBlock::backward(const Tensor& dy) {
  const std::size_t n = convs_.size();
  const Tensor ds = acts_[n - 1].backward(drop_.backward(dy));
  Tensor d = convs_[n - 1].backward(norms_[n - 1].backward(ds));
  for (std::size_t i = n - 1; i-- > 0;) d = convs_[i].backward(norms_[i].backward(acts_[i].backward(d)));
  add_inplace(d, proj_ ? proj_->backward(ds) : ds);
  return d;
}

// ---------------------------------------------------------------- UNetEncoderDecoder

UNetEncoderDecoder::UNetEncoderDecoder(ModelParams& store, const std::string& name, const ModelConfig& cfg,
                                       std::mt19937_64* dropout_rng, std::mt19937_64& init) {
  const int L = cfg.encoder_depth;
  divisor_ = std::int64_t{1} << (L - 1);
  for (int l = 0; l < L; ++l) {
    const std::int64_t c = cfg.level_channels(l);
    enc_.emplace_back(store, name + ".enc" + std::to_string(l), l == 0 ? cfg.in_channels : c, c,
                      cfg.kernel_size(l), cfg.convs_per_block, cfg.dropout_rate, dropout_rng, init);
    if (l + 1 < L) down_.emplace_back(store, name + ".down" + std::to_string(l), c, cfg.level_channels(l + 1), init);
  }
  for (int l = 0; l + 1 < L; ++l) {
    const std::int64_t c = cfg.level_channels(l);
    up_.emplace_back(store, name + ".up" + std::to_string(l), cfg.level_channels(l + 1), c, init);
    dec_.emplace_back(store, name + ".dec" + std::to_string(l), 2 * c, c, cfg.kernel_size(l), cfg.convs_per_block,
                      cfg.dropout_rate, dropout_rng, init);
    skip_channels_.push_back(c);
  }
}

Tensor UNetEncoderDecoder::forward(const Tensor& x, Mode mode) {
  const FeatureShape s = feature_shape(x);
  if (s.x % divisor_ || s.y % divisor_ || s.z % divisor_) {
    throw Error(ErrorCode::kShapeMismatch, "encoder-decoder: spatial dims of " + x.shape_string() +
                                               " must be divisible by " + std::to_string(divisor_));
  }
  const int L = depth();
  std::vector<Tensor> skips(static_cast<std::size_t>(L));
  Tensor h = x;
  for (int l = 0; l < L; ++l) {
    h = enc_[static_cast<std::size_t>(l)].forward(h, mode);
    if (l + 1 < L) {
      skips[static_cast<std::size_t>(l)] = h;
      h = down_[static_cast<std::size_t>(l)].forward(h);
    }
  }
  for (int l = L - 2; l >= 0; --l) {
    const auto i = static_cast<std::size_t>(l);
    h = dec_[i].forward(concat_channels(up_[i].forward(h), skips[i]), mode);
  }
  return h;
}

Tensor UNetEncoderDecoder::backward(const Tensor& dy) {
  const int L = depth();
  std::vector<Tensor> dskips(static_cast<std::size_t>(L));
  Tensor d = dy;
  for (int l = 0; l + 1 < L; ++l) {
    const auto i = static_cast<std::size_t>(l);
    Tensor dup;
    split_channels(dec_[i].backward(d), skip_channels_[i], dup, dskips[i]);
    d = up_[i].backward(dup);
  }
  for (int l = L - 1; l >= 0; --l) {
    const auto i = static_cast<std::size_t>(l);
    if (l + 1 < L) {
      d = down_[i].backward(d);
      add_inplace(d, dskips[i]);
    }
    d = enc_[i].backward(d);
  }
  return d;
}

// ---------------------------------------------------------------- SwinContextEncoder

SwinContextEncoder::SwinContextEncoder(ModelParams& store, const std::string& name, std::int64_t in_channels,
                                       const SwinConfig& cfg, std::mt19937_64& init)
    : reduce_(cfg.reduce) {
  if (reduce_) {
    embed_down_ = PatchDown(store, name + ".embed", in_channels, cfg.embed_dim, init);
  } else {
    embed_conv_ = Conv3d(store, name + ".embed", in_channels, cfg.embed_dim, 1, true, init);
  }
  for (int b = 0; b < cfg.num_blocks; ++b) {
    const int shift = b % 2 == 0 ? 0 : cfg.window_size / 2;
    blocks_.emplace_back(store, name + ".block" + std::to_string(b), cfg.embed_dim, cfg.num_heads, cfg.window_size,
                         shift, cfg.mlp_ratio, cfg.residual, init);
  }
  if (reduce_) {
    unembed_up_ = PatchUp(store, name + ".unembed", cfg.embed_dim, cfg.out_channels, init);
  } else {
    unembed_conv_ = Conv3d(store, name + ".unembed", cfg.embed_dim, cfg.out_channels, 1, true, init);
  }
}

Tensor SwinContextEncoder::forward(const Tensor& x) {
  Tensor t = to_tokens(reduce_ ? embed_down_.forward(x) : embed_conv_.forward(x));
  for (auto& b : blocks_) t = b.forward(t);
  const Tensor fm = to_feature_map(t);
  return reduce_ ? unembed_up_.forward(fm) : unembed_conv_.forward(fm);
}

Tensor SwinContextEncoder::backward(const Tensor& dy) {
  Tensor d = to_tokens(reduce_ ? unembed_up_.backward(dy) : unembed_conv_.backward(dy));
  for (auto it = blocks_.rbegin(); it != blocks_.rend(); ++it) d = it->backward(d);
  const Tensor fm = to_feature_map(d);
  return reduce_ ? embed_down_.backward(fm) : embed_conv_.backward(fm);
}

Tensor SwinContextEncoder::linear_path(const Tensor& x) {
  const Tensor e = reduce_ ? embed_down_.forward(x) : embed_conv_.forward(x);
  return reduce_ ? unembed_up_.forward(e) : unembed_conv_.forward(e);
}

std::vector<int> SwinContextEncoder::shifts() const {
  std::vector<int> out;
  for (const auto& b : blocks_) out.push_back(b.shift());
  return out;
}

// ---------------------------------------------------------------- FusionBlock

FusionBlock::FusionBlock(ModelParams& store, const std::string& name, std::int64_t c_local, std::int64_t c_global,
                         std::int64_t out_channels, double dropout_rate, std::mt19937_64* dropout_rng,
                         std::mt19937_64& init)
    : c_local_(c_local),
      c_global_(c_global),
      conv_(store, name + ".conv", c_local + c_global, out_channels, 1, false, init),
      bn_(store, name + ".bn", out_channels),
      drop_(dropout_rate, dropout_rng) {}

Tensor FusionBlock::forward(const Tensor& local, const Tensor& global, Mode mode) {
  const FeatureShape a = feature_shape(local), b = feature_shape(global);
  if (a.x != b.x || a.y != b.y || a.z != b.z || a.n != b.n) {
    throw Error(ErrorCode::kShapeMismatch,
                "fusion: inputs " + local.shape_string() + " and " + global.shape_string() + " differ spatially");
  }
  return drop_.forward(relu_.forward(bn_.forward(conv_.forward(nn::concat_channels(local, global)), mode)), mode);
}

std::pair<Tensor, Tensor> FusionBlock::backward(const Tensor& dy) {
  const Tensor d = conv_.backward(bn_.backward(relu_.backward(drop_.backward(dy))));
  std::pair<Tensor, Tensor> out;
  split_channels(d, c_local_, out.first, out.second);
  return out;
}

// ---------------------------------------------------------------- SegmentationHead

SegmentationHead::SegmentationHead(ModelParams& store, const std::string& name, std::int64_t channels,
                                   std::int64_t out_channels, std::mt19937_64& init)
    : conv3_(store, name + ".conv3", channels, channels, 3, true, init),
      conv1_(store, name + ".conv1", channels, out_channels, 1, true, init) {}

Tensor SegmentationHead::forward(const Tensor& x) { return conv1_.forward(conv3_.forward(x)); }

Tensor SegmentationHead::backward(const Tensor& dy) { return conv3_.backward(conv1_.backward(dy)); }

// ---------------------------------------------------------------- SegmentationNetwork

SegmentationNetwork::SegmentationNetwork(const ModelConfig& cfg, std::uint64_t seed)
    : cfg_(cfg), dropout_rng_(std::make_unique<std::mt19937_64>(seed ^ 0x5deece66dULL)) {
  cfg_.validate();
  std::mt19937_64 init(seed);
  unet_ = UNetEncoderDecoder(params_, "unet", cfg_, dropout_rng_.get(), init);
  const std::int64_t c0 = cfg_.base_channels;
  std::int64_t c_global = c0;
  if (cfg_.use_swin_gce) {
    swin_ = std::make_unique<SwinContextEncoder>(params_, "swin", c0, cfg_.swin, init);
    c_global = cfg_.swin.out_channels;
  }
  fusion_ = FusionBlock(params_, "fusion", c0, c_global, cfg_.fusion_channels, cfg_.dropout_rate, dropout_rng_.get(),
                        init);
  head_ = SegmentationHead(params_, "head", cfg_.fusion_channels, cfg_.out_channels, init);
}

Tensor SegmentationNetwork::forward(const Tensor& x, Mode mode) {
  const FeatureShape s = feature_shape(x);
  if (s.c != cfg_.in_channels) {
    throw Error(ErrorCode::kShapeMismatch, "network: expected " + std::to_string(cfg_.in_channels) +
                                               " input channels, got " + x.shape_string());
  }
  const std::int64_t div = cfg_.spatial_divisor();
  if (s.x % div || s.y % div || s.z % div) {
    throw Error(ErrorCode::kShapeMismatch,
                "network: spatial dims of " + x.shape_string() + " must be divisible by " + std::to_string(div));
  }
  check_finite(x, "network input");
  const Tensor f_local = staged("encoder-decoder", [&] { return unet_.forward(x, mode); });
  const Tensor f_global = swin_ ? staged("context", [&] { return swin_->forward(f_local); }) : f_local;
  const Tensor fused = staged("fusion", [&] { return fusion_.forward(f_local, f_global, mode); });
  return staged("head", [&] { return head_.forward(fused); });
}

void SegmentationNetwork::backward(const Tensor& dlogits) {
  auto [d_local, d_global] = fusion_.backward(head_.backward(dlogits));
  if (swin_) {
    add_inplace(d_local, swin_->backward(d_global));
  } else {
    add_inplace(d_local, d_global);
  }
  unet_.backward(d_local);
}

}  // namespace strokeseg::nn

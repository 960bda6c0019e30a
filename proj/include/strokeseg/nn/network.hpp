// Copyright (c) 2026, strokeseg contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "json.hpp"
#include "strokeseg/nn/attention.hpp"
#include "strokeseg/nn/layers.hpp"

namespace strokeseg::nn {

struct SwinConfig {
  int window_size = 4;
  int num_heads = 2;
  int embed_dim = 32;
  int num_blocks = 2;
  double mlp_ratio = 4.0;
  bool reduce = true;     // 2x patch merge before the blocks, 2x un-embed after
  int out_channels = 8;   // channels handed to the fusion block
  SwinResidual residual = SwinResidual::kNested;

  bool operator==(const SwinConfig&) const = default;
};

struct ModelConfig {
  int in_channels = 1;
  int base_channels = 8;
  int encoder_depth = 3;
  std::vector<int> kernel_sizes;  // per level; empty means 3 everywhere
  int convs_per_block = 2;
  double dropout_rate = 0.1;
  SwinConfig swin;
  int fusion_channels = 16;
  bool use_swin_gce = true;
  int out_channels = 1;

  /// Small network used by tests and desk-scale experiments.
  static ModelConfig toy();
  /// Large network sized to roughly 100M trainable parameters. Never
  /// trained here; instantiated for parameter accounting.
  static ModelConfig large();

  void validate() const;
  int kernel_size(int level) const;
  std::int64_t level_channels(int level) const;
  /// Spatial dims of the input must be multiples of this.
  std::int64_t spatial_divisor() const;

  bool operator==(const ModelConfig&) const = default;
};

nlohmann::json to_json(const ModelConfig& c);
ModelConfig model_config_from_json(const nlohmann::json& j);

/// Conv stack with batch norm and PReLU plus a residual skip:
///   h_i = PReLU(BN(conv_i(h_{i-1})))           for i < n
///   out = Dropout(PReLU(BN(conv_n(h_{n-1})) + proj(x)))
/// proj is a biased 1x1x1 conv when cin != cout and the identity otherwise.
/// Convs feeding batch norm carry no bias (it would be cancelled by the
/// mean subtraction).
class ResidualBlock {
 public:
  ResidualBlock() = default;
  ResidualBlock(ModelParams& store, const std::string& name, std::int64_t cin, std::int64_t cout, int kernel,
                int num_convs, double dropout_rate, std::mt19937_64* dropout_rng, std::mt19937_64& init);

  Tensor forward(const Tensor& x, Mode mode);
  Tensor backward(const Tensor& dy);

  std::vector<Conv3d>& convs() { return convs_; }
  std::vector<BatchNorm3d>& norms() { return norms_; }
  std::vector<PReLU>& activations() { return acts_; }
  Conv3d* projection() { return proj_ ? &*proj_ : nullptr; }

 private:
  std::vector<Conv3d> convs_;
  std::vector<BatchNorm3d> norms_;
  std::vector<PReLU> acts_;
  std::optional<Conv3d> proj_;
  Dropout drop_;
};

/// Symmetric residual encoder-decoder; the output keeps the input's spatial
/// dims and has base_channels channels.
class UNetEncoderDecoder {
 public:
  UNetEncoderDecoder() = default;
  UNetEncoderDecoder(ModelParams& store, const std::string& name, const ModelConfig& cfg,
                     std::mt19937_64* dropout_rng, std::mt19937_64& init);

  Tensor forward(const Tensor& x, Mode mode);
  Tensor backward(const Tensor& dy);

  int depth() const { return static_cast<int>(enc_.size()); }
  ResidualBlock& encoder(int level) { return enc_.at(static_cast<std::size_t>(level)); }
  ResidualBlock& decoder(int level) { return dec_.at(static_cast<std::size_t>(level)); }

 private:
  std::int64_t divisor_ = 1;
  std::vector<ResidualBlock> enc_;
  std::vector<PatchDown> down_;
  std::vector<PatchUp> up_;
  std::vector<ResidualBlock> dec_;
  std::vector<std::int64_t> skip_channels_;
};

/// Global-context branch: patch embedding, a stack of windowed transformer
/// blocks with alternating shifts, and an un-embedding back to the input's
/// spatial dims.
class SwinContextEncoder {
 public:
  SwinContextEncoder() = default;
  SwinContextEncoder(ModelParams& store, const std::string& name, std::int64_t in_channels, const SwinConfig& cfg,
                     std::mt19937_64& init);

  Tensor forward(const Tensor& x);
  Tensor backward(const Tensor& dy);

  std::vector<int> shifts() const;
  std::vector<SwinBlock>& blocks() { return blocks_; }
  /// Patch embedding and un-embedding alone, skipping the blocks.
  Tensor linear_path(const Tensor& x);

 private:
  bool reduce_ = true;
  PatchDown embed_down_;
  Conv3d embed_conv_;
  PatchUp unembed_up_;
  Conv3d unembed_conv_;
  std::vector<SwinBlock> blocks_;
};

/// concat -> 1x1x1 conv (no bias) -> BN -> ReLU -> Dropout.
class FusionBlock {
 public:
  FusionBlock() = default;
  FusionBlock(ModelParams& store, const std::string& name, std::int64_t c_local, std::int64_t c_global,
              std::int64_t out_channels, double dropout_rate, std::mt19937_64* dropout_rng, std::mt19937_64& init);

  Tensor forward(const Tensor& local, const Tensor& global, Mode mode);
  /// Returns the gradients w.r.t. (local, global).
  std::pair<Tensor, Tensor> backward(const Tensor& dy);

  Conv3d& conv() { return conv_; }
  BatchNorm3d& norm() { return bn_; }
  std::int64_t concat_channels() const { return c_local_ + c_global_; }

 private:
  std::int64_t c_local_ = 0, c_global_ = 0;
  Conv3d conv_;
  BatchNorm3d bn_;
  ReLU relu_;
  Dropout drop_;
};

/// 3x3x3 conv then 1x1x1 conv to a single foreground logit.
class SegmentationHead {
 public:
  SegmentationHead() = default;
  SegmentationHead(ModelParams& store, const std::string& name, std::int64_t channels, std::int64_t out_channels,
                   std::mt19937_64& init);

  Tensor forward(const Tensor& x);
  Tensor backward(const Tensor& dy);

  Conv3d& spatial() { return conv3_; }
  Conv3d& pointwise() { return conv1_; }

 private:
  Conv3d conv3_;
  Conv3d conv1_;
};

/// The full network: encoder-decoder, optional context branch, fusion and
/// head. Parameters are owned by the network; layers point into the store.
class SegmentationNetwork {
 public:
  SegmentationNetwork(const ModelConfig& cfg, std::uint64_t seed);

  /// x: (N, in_channels, X, Y, Z) -> logits (N, 1, X, Y, Z).
  Tensor forward(const Tensor& x, Mode mode);
  /// Accumulates parameter gradients for the last forward.
  void backward(const Tensor& dlogits);

  const ModelConfig& config() const { return cfg_; }
  ModelParams& params() { return params_; }
  const ModelParams& params() const { return params_; }
  void set_dropout_seed(std::uint64_t seed) { dropout_rng_->seed(seed); }

  UNetEncoderDecoder& unet() { return unet_; }
  SwinContextEncoder* context() { return swin_ ? swin_.get() : nullptr; }
  FusionBlock& fusion() { return fusion_; }
  SegmentationHead& head() { return head_; }

 private:
  ModelConfig cfg_;
  ModelParams params_;
  std::unique_ptr<std::mt19937_64> dropout_rng_;
  UNetEncoderDecoder unet_;
  std::unique_ptr<SwinContextEncoder> swin_;
  FusionBlock fusion_;
  SegmentationHead head_;
};

}  // namespace strokeseg::nn

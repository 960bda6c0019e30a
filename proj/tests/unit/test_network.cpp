// Copyright (c) 2026, strokeseg contributors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <set>

#include "support/gradcheck.hpp"
#include "support/network_gradcheck.hpp"
#include "support/param_count_oracle.hpp"
#include "support/temp_dir.hpp"
#include "strokeseg/error.hpp"
#include "strokeseg/nn/checkpoint.hpp"
#include "strokeseg/nn/network.hpp"
#include "strokeseg/nn/optimizer.hpp"

namespace strokeseg::nn {
namespace {

using testing::random_tensor;

ModelConfig no_dropout(ModelConfig c = ModelConfig::toy()) {
  c.dropout_rate = 0.0;
  return c;
}

void zero(Parameter* p) {
  if (p) p->value.fill(0.0);
}

// Makes every transformer block the identity map.
void silence_blocks(SwinContextEncoder& swin) {
  for (auto& b : swin.blocks()) {
    zero(b.attention().proj().weight());
    zero(b.attention().proj().bias());
    zero(b.fc2().weight());
    zero(b.fc2().bias());
  }
}

double sigmoid(double v) { return 1.0 / (1.0 + std::exp(-v)); }

// L = sum(sigmoid(logits)^2); returns dL/dlogits.
Tensor sigmoid_square_grad(const Tensor& logits) {
  Tensor g = Tensor::zeros_like(logits);
  for (std::int64_t i = 0; i < logits.size(); ++i) {
    const double s = sigmoid(logits[i]);
    g[i] = 2.0 * s * s * (1.0 - s);
  }
  return g;
}

bool any_nonzero(const Tensor& t) {
  for (double v : t.values())
    if (v != 0.0) return true;
  return false;
}

TEST(Network, OutputShapeMatchesInput) {
  SegmentationNetwork net(ModelConfig::toy(), 1);
  const Tensor x = random_tensor({2, 1, 32, 32, 32}, 2);
  const Tensor y = net.forward(x, Mode::kEval);
  EXPECT_EQ(y.dims(), (std::vector<std::int64_t>{2, 1, 32, 32, 32}));
}

TEST(Network, NonRectangularInput) {
  SegmentationNetwork net(ModelConfig::toy(), 1);
  const Tensor y = net.forward(random_tensor({1, 1, 8, 16, 12}, 3), Mode::kEval);
  EXPECT_EQ(y.dims(), (std::vector<std::int64_t>{1, 1, 8, 16, 12}));
}

TEST(Network, IndivisibleSpatialDimsRejected) {
  SegmentationNetwork net(ModelConfig::toy(), 1);
  try {
    net.forward(random_tensor({1, 1, 30, 30, 30}, 2), Mode::kEval);
    FAIL() << "expected a shape error";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kShapeMismatch);
    EXPECT_EQ(std::string(e.what()).rfind("network: ", 0), 0u) << e.what();
    EXPECT_NE(std::string(e.what()).find("30"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("divisible by 4"), std::string::npos);
  }
}

TEST(Network, WrongChannelCountRejected) {
  SegmentationNetwork net(ModelConfig::toy(), 1);
  try {
    net.forward(random_tensor({1, 2, 8, 8, 8}, 2), Mode::kEval);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kShapeMismatch);
  }
}

TEST(Network, NonFiniteInputRejected) {
  SegmentationNetwork net(ModelConfig::toy(), 1);
  Tensor x = random_tensor({1, 1, 8, 8, 8}, 2);
  x[17] = std::nan("");
  try {
    net.forward(x, Mode::kEval);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kNonFinite);
  }
}

TEST(Network, SameSeedSameWeightsAndOutputs) {
  SegmentationNetwork a(ModelConfig::toy(), 5), b(ModelConfig::toy(), 5), c(ModelConfig::toy(), 6);
  EXPECT_EQ(a.params().checksum(), b.params().checksum());
  EXPECT_NE(a.params().checksum(), c.params().checksum());
  const Tensor x = random_tensor({1, 1, 16, 16, 16}, 9);
  EXPECT_EQ(a.forward(x, Mode::kEval), b.forward(x, Mode::kEval));
}

TEST(Network, EvalIsRepeatableAndIgnoresDropout) {
  SegmentationNetwork net(ModelConfig::toy(), 5);
  const Tensor x = random_tensor({1, 1, 16, 16, 16}, 9);
  const Tensor y1 = net.forward(x, Mode::kEval);
  net.forward(x, Mode::kTrain);  // updates running statistics
  const auto snapshot = net.params().snapshot();
  const Tensor y2 = net.forward(x, Mode::kEval);
  const Tensor y3 = net.forward(x, Mode::kEval);
  EXPECT_EQ(y2, y3);
  EXPECT_NE(y1, y2);
  // Eval mode leaves buffers untouched.
  const auto after = net.params().snapshot();
  EXPECT_EQ(snapshot, after);
}

TEST(Network, TrainModeDropoutFollowsSeed) {
  SegmentationNetwork a(ModelConfig::toy(), 5), b(ModelConfig::toy(), 5);
  a.set_dropout_seed(11);
  b.set_dropout_seed(11);
  const Tensor x = random_tensor({1, 1, 8, 8, 8}, 9);
  EXPECT_EQ(a.forward(x, Mode::kTrain), b.forward(x, Mode::kTrain));
  b.set_dropout_seed(12);
  a.set_dropout_seed(13);
  EXPECT_NE(a.forward(x, Mode::kTrain), b.forward(x, Mode::kTrain));
}

TEST(Network, EveryTrainableParameterReceivesGradient) {
  SegmentationNetwork net(no_dropout(), 3);
  const Tensor x = random_tensor({2, 1, 16, 16, 16}, 4);
  net.params().zero_grad();
  net.backward(sigmoid_square_grad(net.forward(x, Mode::kTrain)));
  for (std::size_t i = 0; i < net.params().size(); ++i) {
    const Parameter& p = net.params()[i];
    if (!p.trainable) {
      EXPECT_TRUE(p.grad.empty() || !any_nonzero(p.grad)) << p.name;
      continue;
    }
    ASSERT_FALSE(p.grad.empty()) << p.name;
    EXPECT_TRUE(any_nonzero(p.grad)) << p.name;
    for (double g : p.grad.values()) ASSERT_TRUE(std::isfinite(g)) << p.name;
  }
}

TEST(Network, FiniteDifferenceAcrossLayerFamilies) {
  const auto samples = testing::network_gradient_samples(7);
  std::set<std::string> families;
  for (const auto& s : samples) {
    families.insert(s.family);
    EXPECT_TRUE(s.sample.smooth) << s.sample.label;
    EXPECT_LE(s.sample.relative_error(), testing::kGradTolerance)
        << s.sample.label << " analytic " << s.sample.analytic << " numeric " << s.sample.numeric;
  }
  EXPECT_GE(samples.size(), 20u);
  for (const char* f : {"conv", "batchnorm", "prelu", "layernorm", "attention", "mlp", "fusion", "head"}) {
    EXPECT_TRUE(families.count(f)) << f;
  }
}

TEST(Network, InputGradientMatchesFiniteDifference) {
  SegmentationNetwork net(no_dropout(), 2);
  Tensor x = random_tensor({1, 1, 8, 8, 8}, 3);
  // The network's backward stops at the parameters; the encoder-decoder
  // also returns the input gradient.
  Tensor dx;
  testing::Probe probe{[&] { return net.unet().forward(x, Mode::kTrain); },
                       [&](const Tensor& dy) { dx = net.unet().backward(dy); }};
  testing::GradChecker checker(probe, 4);
  checker.run_backward(net.params());
  const Tensor analytic = dx;
  const auto samples = checker.check_tensor("input", x, analytic, 12);
  for (const auto& s : samples) EXPECT_LE(s.relative_error(), testing::kGradTolerance) << s.label;
}

// ---------------------------------------------------------------- parameter accounting

TEST(ParameterCount, ToyMatchesClosedForm) {
  SegmentationNetwork net(ModelConfig::toy(), 1);
  EXPECT_EQ(count_parameters(net.params()), testing::closed_form_parameter_count(ModelConfig::toy()));
  EXPECT_EQ(count_parameters(net.params()), 146605);
}

TEST(ParameterCount, VariantsMatchClosedForm) {
  std::vector<ModelConfig> configs;
  ModelConfig c = ModelConfig::toy();
  c.use_swin_gce = false;
  configs.push_back(c);
  c = ModelConfig::toy();
  c.swin.reduce = false;
  configs.push_back(c);
  c = ModelConfig::toy();
  c.kernel_sizes = {5, 3, 1};
  c.convs_per_block = 3;
  configs.push_back(c);
  c = ModelConfig::toy();
  c.encoder_depth = 2;
  c.base_channels = 4;
  c.in_channels = 2;
  c.swin.num_blocks = 4;
  c.swin.num_heads = 4;
  c.swin.mlp_ratio = 2.0;
  configs.push_back(c);
  for (const auto& cfg : configs) {
    SegmentationNetwork net(cfg, 1);
    EXPECT_EQ(count_parameters(net.params()), testing::closed_form_parameter_count(cfg)) << to_json(cfg).dump();
  }
}

TEST(ParameterCount, AblationRemovesOnlyTheContextBranch) {
  ModelConfig full = ModelConfig::toy(), ablated = ModelConfig::toy();
  ablated.use_swin_gce = false;
  SegmentationNetwork a(full, 1), b(ablated, 1);
  EXPECT_EQ(b.context(), nullptr);
  EXPECT_NE(a.context(), nullptr);
  std::int64_t swin = 0;
  for (std::size_t i = 0; i < a.params().size(); ++i) {
    const Parameter& p = a.params()[i];
    if (p.name.rfind("swin.", 0) == 0) {
      swin += p.value.size();
    } else if (p.name.rfind("fusion.", 0) != 0) {
      EXPECT_NE(b.params().find(p.name), nullptr) << p.name;
    }
  }
  for (std::size_t i = 0; i < b.params().size(); ++i) EXPECT_NE(b.params()[i].name.rfind("swin.", 0), 0u);
  // Fusion input shrinks from base + swin_out to 2 * base channels.
  const std::int64_t fusion_delta =
      (full.base_channels + full.swin.out_channels - 2 * full.base_channels) * full.fusion_channels;
  EXPECT_EQ(count_parameters(a.params()) - count_parameters(b.params()), swin + fusion_delta);
}

TEST(ParameterCount, LargePresetNearHundredMillion) {
  const ModelConfig c = ModelConfig::large();
  c.validate();
  const std::int64_t n = testing::closed_form_parameter_count(c);
  EXPECT_GE(n, 90'000'000);
  EXPECT_LE(n, 110'000'000);
}

TEST(ParameterCount, BuffersAreNotCounted) {
  SegmentationNetwork net(ModelConfig::toy(), 1);
  std::int64_t buffers = 0, all = 0;
  for (std::size_t i = 0; i < net.params().size(); ++i) {
    const Parameter& p = net.params()[i];
    all += p.value.size();
    if (!p.trainable) {
      buffers += p.value.size();
      const bool stat = p.name.find("running_mean") != std::string::npos ||
                        p.name.find("running_var") != std::string::npos;
      EXPECT_TRUE(stat) << p.name;
    }
  }
  EXPECT_GT(buffers, 0);
  EXPECT_EQ(all - buffers, count_parameters(net.params()));
}

// ---------------------------------------------------------------- submodules

TEST(ResidualBlock, ZeroedConvsReduceToActivatedProjection) {
  ModelParams store;
  std::mt19937_64 init(1);
  ResidualBlock block(store, "b", 3, 3, 3, 2, 0.0, nullptr, init);
  for (auto& c : block.convs()) zero(c.weight());
  ASSERT_EQ(block.projection(), nullptr);
  const Tensor x = random_tensor({1, 3, 4, 4, 4}, 2);
  const Tensor y = block.forward(x, Mode::kTrain);
  // BN of a zero map is its shift (0 at init), so the output is PReLU(x).
  const double slope = block.activations().back().slope()->value[0];
  for (std::int64_t i = 0; i < x.size(); ++i) {
    const double want = x[i] > 0 ? x[i] : slope * x[i];
    ASSERT_NEAR(y[i], want, 1e-12);
  }
}

TEST(ResidualBlock, ProjectionOnlyWhenWidthChanges) {
  ModelParams store;
  std::mt19937_64 init(1);
  ResidualBlock same(store, "a", 4, 4, 3, 2, 0.0, nullptr, init);
  ResidualBlock wider(store, "b", 4, 8, 3, 2, 0.0, nullptr, init);
  EXPECT_EQ(same.projection(), nullptr);
  ASSERT_NE(wider.projection(), nullptr);
  EXPECT_NE(wider.projection()->bias(), nullptr);
  for (auto& c : wider.convs()) EXPECT_EQ(c.bias(), nullptr);
}

TEST(UNet, LevelWidthsAndOutputChannels) {
  const ModelConfig c = ModelConfig::toy();
  SegmentationNetwork net(c, 1);
  auto& unet = net.unet();
  ASSERT_EQ(unet.depth(), c.encoder_depth);
  for (int l = 0; l < c.encoder_depth; ++l) {
    EXPECT_EQ(unet.encoder(l).convs().front().weight()->value.dim(0), c.level_channels(l));
  }
  for (int l = 0; l + 1 < c.encoder_depth; ++l) {
    EXPECT_EQ(unet.decoder(l).convs().front().weight()->value.dim(1), 2 * c.level_channels(l));
  }
  const Tensor f = unet.forward(random_tensor({1, 1, 8, 8, 8}, 2), Mode::kEval);
  EXPECT_EQ(f.dims(), (std::vector<std::int64_t>{1, c.base_channels, 8, 8, 8}));
}

TEST(UNet, GradientReachesDeepestLevel) {
  SegmentationNetwork net(no_dropout(), 1);
  const Tensor x = random_tensor({1, 1, 8, 8, 8}, 2);
  net.params().zero_grad();
  const Tensor f = net.unet().forward(x, Mode::kTrain);
  const Tensor dx = net.unet().backward(random_tensor(f.dims(), 3));
  EXPECT_TRUE(any_nonzero(dx));
  const int deepest = net.unet().depth() - 1;
  EXPECT_TRUE(any_nonzero(net.unet().encoder(deepest).convs().front().weight()->grad));
}

TEST(SwinContext, ShapesAndShiftSchedule) {
  SegmentationNetwork net(ModelConfig::toy(), 1);
  SwinContextEncoder* swin = net.context();
  ASSERT_NE(swin, nullptr);
  EXPECT_EQ(swin->shifts(), (std::vector<int>{0, 2}));
  const Tensor x = random_tensor({2, 8, 16, 8, 12}, 2);
  EXPECT_EQ(swin->forward(x).dims(), (std::vector<std::int64_t>{2, 8, 16, 8, 12}));

  ModelConfig c = ModelConfig::toy();
  c.swin.num_blocks = 4;
  c.swin.window_size = 3;
  SegmentationNetwork deeper(c, 1);
  EXPECT_EQ(deeper.context()->shifts(), (std::vector<int>{0, 1, 0, 1}));
}

TEST(SwinContext, IdentityBlocksLeaveLinearPath) {
  for (bool reduce : {true, false}) {
    ModelConfig c = ModelConfig::toy();
    c.swin.reduce = reduce;
    SegmentationNetwork net(c, 1);
    silence_blocks(*net.context());
    const Tensor x = random_tensor({1, 8, 8, 8, 8}, 2);
    const Tensor a = net.context()->forward(x);
    const Tensor b = net.context()->linear_path(x);
    ASSERT_EQ(a.dims(), b.dims());
    for (std::int64_t i = 0; i < a.size(); ++i) ASSERT_NEAR(a[i], b[i], 1e-12) << "reduce " << reduce;
  }
}

TEST(Fusion, ConcatWidthAndEvalDeterminism) {
  const ModelConfig c = ModelConfig::toy();
  SegmentationNetwork net(c, 1);
  EXPECT_EQ(net.fusion().concat_channels(), c.base_channels + c.swin.out_channels);
  EXPECT_EQ(net.fusion().conv().bias(), nullptr);
  const Tensor l = random_tensor({1, c.base_channels, 4, 4, 4}, 2);
  const Tensor g = random_tensor({1, c.swin.out_channels, 4, 4, 4}, 3);
  const Tensor y = net.fusion().forward(l, g, Mode::kEval);
  EXPECT_EQ(y.dims(), (std::vector<std::int64_t>{1, c.fusion_channels, 4, 4, 4}));
  EXPECT_EQ(y, net.fusion().forward(l, g, Mode::kEval));
  for (double v : y.values()) EXPECT_GE(v, 0.0);
}

TEST(Fusion, SpatialMismatchRejected) {
  SegmentationNetwork net(ModelConfig::toy(), 1);
  EXPECT_THROW(net.fusion().forward(random_tensor({1, 8, 4, 4, 4}, 1), random_tensor({1, 8, 4, 4, 2}, 2),
                                    Mode::kEval),
               Error);
}

TEST(Head, ZeroWeightsGiveConstantBias) {
  SegmentationNetwork net(ModelConfig::toy(), 1);
  zero(net.head().spatial().weight());
  zero(net.head().pointwise().weight());
  net.head().pointwise().bias()->value[0] = -1.25;
  const Tensor y = net.forward(random_tensor({1, 1, 8, 8, 8}, 2), Mode::kEval);
  for (double v : y.values()) ASSERT_EQ(v, -1.25);
}

TEST(Head, GradientReachesBothConvs) {
  SegmentationNetwork net(no_dropout(), 1);
  net.params().zero_grad();
  net.backward(sigmoid_square_grad(net.forward(random_tensor({1, 1, 8, 8, 8}, 2), Mode::kTrain)));
  EXPECT_TRUE(any_nonzero(net.head().spatial().weight()->grad));
  EXPECT_TRUE(any_nonzero(net.head().pointwise().weight()->grad));
}

// ---------------------------------------------------------------- config

TEST(ModelConfigJson, RoundTrip) {
  ModelConfig c = ModelConfig::toy();
  c.kernel_sizes = {5, 3, 3};
  c.swin.residual = SwinResidual::kSequential;
  c.use_swin_gce = false;
  EXPECT_EQ(model_config_from_json(to_json(c)), c);
  EXPECT_EQ(model_config_from_json(to_json(ModelConfig::large())), ModelConfig::large());
}

TEST(ModelConfigJson, MissingKeyIsMalformed) {
  nlohmann::json j = to_json(ModelConfig::toy());
  j.erase("fusion_channels");
  try {
    model_config_from_json(j);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kMalformedHeader);
  }
}

TEST(ModelConfigValidate, RejectsBadValues) {
  auto expect_invalid = [](auto mutate) {
    ModelConfig c = ModelConfig::toy();
    mutate(c);
    try {
      c.validate();
      ADD_FAILURE() << "accepted " << to_json(c).dump();
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::kInvalidArgument);
    }
  };
  expect_invalid([](ModelConfig& c) { c.base_channels = 0; });
  expect_invalid([](ModelConfig& c) { c.encoder_depth = 0; });
  expect_invalid([](ModelConfig& c) { c.kernel_sizes = {3, 3}; });
  expect_invalid([](ModelConfig& c) { c.kernel_sizes = {3, 4, 3}; });
  expect_invalid([](ModelConfig& c) { c.dropout_rate = 1.0; });
  expect_invalid([](ModelConfig& c) { c.out_channels = 2; });
  expect_invalid([](ModelConfig& c) { c.swin.num_heads = 3; });
  expect_invalid([](ModelConfig& c) { c.swin.num_blocks = 3; });
  expect_invalid([](ModelConfig& c) { c.swin.mlp_ratio = 0.0; });
  ModelConfig bad = ModelConfig::toy();
  bad.base_channels = -1;
  EXPECT_THROW(SegmentationNetwork(bad, 1), Error);
}

TEST(ModelConfig, SpatialDivisor) {
  ModelConfig c = ModelConfig::toy();
  EXPECT_EQ(c.spatial_divisor(), 4);
  c.encoder_depth = 1;
  EXPECT_EQ(c.spatial_divisor(), 2);
  c.swin.reduce = false;
  EXPECT_EQ(c.spatial_divisor(), 1);
  EXPECT_EQ(ModelConfig::large().spatial_divisor(), 16);
}

// ---------------------------------------------------------------- checkpoints

TEST(Checkpoint, RoundTripIsBitwise) {
  testing::TempDir dir;
  SegmentationNetwork net(ModelConfig::toy(), 4);
  net.forward(random_tensor({1, 1, 8, 8, 8}, 1), Mode::kTrain);  // non-trivial running stats
  save_checkpoint(net, dir / "m.ckpt", {{"epoch", 3}});
  auto loaded = load_checkpoint(dir / "m.ckpt");
  EXPECT_EQ(loaded->config(), net.config());
  EXPECT_EQ(loaded->params().checksum(), net.params().checksum());
  const Tensor x = random_tensor({1, 1, 8, 8, 8}, 2);
  EXPECT_EQ(loaded->forward(x, Mode::kEval), net.forward(x, Mode::kEval));
  EXPECT_EQ(read_checkpoint_header(dir / "m.ckpt").extra.at("epoch"), 3);

  SegmentationNetwork other(ModelConfig::toy(), 99);
  load_checkpoint_into(other, dir / "m.ckpt");
  EXPECT_EQ(other.params().checksum(), net.params().checksum());
}

TEST(Checkpoint, ArchitectureMismatchNamesParameter) {
  testing::TempDir dir;
  SegmentationNetwork net(ModelConfig::toy(), 4);
  save_checkpoint(net, dir / "m.ckpt");
  ModelConfig c = ModelConfig::toy();
  c.swin.out_channels = 4;
  SegmentationNetwork other(c, 1);
  try {
    load_checkpoint_into(other, dir / "m.ckpt");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kCheckpointMismatch);
    EXPECT_NE(std::string(e.what()).find("swin.unembed"), std::string::npos) << e.what();
  }
}

TEST(Checkpoint, MissingAndCorruptFiles) {
  testing::TempDir dir;
  try {
    load_checkpoint(dir / "absent.ckpt");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kMissingFile);
  }
  std::ofstream(dir / "junk.ckpt") << "not a checkpoint";
  try {
    load_checkpoint(dir / "junk.ckpt");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kMalformedHeader);
  }
  SegmentationNetwork net(ModelConfig::toy(), 4);
  save_checkpoint(net, dir / "m.ckpt");
  std::filesystem::resize_file(dir / "m.ckpt", std::filesystem::file_size(dir / "m.ckpt") - 8);
  EXPECT_THROW(load_checkpoint(dir / "m.ckpt"), Error);
}

// ---------------------------------------------------------------- optimizer

struct OptimizerFixture {
  ModelParams params;
  Parameter* w;
  Parameter* buffer;
  OptimizerFixture() {
    w = params.add("w", Tensor({3}));
    buffer = params.add("buf", Tensor({2}, 5.0), false);
    w->value[0] = 1.0, w->value[1] = -2.0, w->value[2] = 0.5;
  }
  void set_grad(double a, double b, double c) {
    Tensor& g = w->gradient();
    g[0] = a, g[1] = b, g[2] = c;
    buffer->gradient().fill(1.0);
  }
};

TEST(Optimizer, SgdStep) {
  OptimizerFixture f;
  Optimizer opt({.kind = OptimizerKind::kSgd, .learning_rate = 0.1});
  f.set_grad(1.0, -3.0, 0.0);
  opt.step(f.params);
  EXPECT_DOUBLE_EQ(f.w->value[0], 0.9);
  EXPECT_DOUBLE_EQ(f.w->value[1], -1.7);
  EXPECT_DOUBLE_EQ(f.w->value[2], 0.5);
  EXPECT_EQ(f.buffer->value, Tensor({2}, 5.0));
}

TEST(Optimizer, AdamMatchesClosedForm) {
  OptimizerFixture f;
  const OptimizerConfig cfg{.kind = OptimizerKind::kAdam, .learning_rate = 0.01};
  Optimizer opt(cfg);
  // First step: bias-corrected m/sqrt(v) = sign(g), so every entry moves by lr.
  f.set_grad(0.3, -7.0, 1e-3);
  opt.step(f.params);
  EXPECT_NEAR(f.w->value[0], 1.0 - 0.01, 1e-9);
  EXPECT_NEAR(f.w->value[1], -2.0 + 0.01, 1e-9);
  EXPECT_NEAR(f.w->value[2], 0.5 - 0.01 * 1e-3 / (1e-3 + 1e-8), 1e-12);

  // Second step written out from the moment recursions.
  const double g1 = 0.3, g2 = -0.1;
  const double m = 0.9 * (0.1 * g1) + 0.1 * g2;
  const double v = 0.999 * (0.001 * g1 * g1) + 0.001 * g2 * g2;
  const double mhat = m / (1 - 0.81), vhat = v / (1 - 0.999 * 0.999);
  const double before = f.w->value[0];
  f.set_grad(g2, 0.0, 0.0);
  opt.step(f.params);
  EXPECT_NEAR(f.w->value[0], before - 0.01 * mhat / (std::sqrt(vhat) + 1e-8), 1e-12);
  EXPECT_EQ(opt.steps(), 2);
  EXPECT_EQ(f.buffer->value, Tensor({2}, 5.0));
}

TEST(Optimizer, ConfigValidation) {
  EXPECT_THROW(Optimizer({.learning_rate = 0.0}), Error);
  EXPECT_THROW(Optimizer({.beta1 = 1.0}), Error);
  EXPECT_THROW(Optimizer({.eps = -1.0}), Error);
  EXPECT_EQ(parse_optimizer("adam"), OptimizerKind::kAdam);
  EXPECT_EQ(parse_optimizer("sgd"), OptimizerKind::kSgd);
  EXPECT_THROW(parse_optimizer("rmsprop"), Error);
}

TEST(Optimizer, TrainingStepReducesLossOnFixedBatch) {
  SegmentationNetwork net(no_dropout(), 1);
  Optimizer opt({.learning_rate = 1e-3});
  const Tensor x = random_tensor({1, 1, 8, 8, 8}, 2);
  auto loss = [&] {
    double l = 0;
    for (double v : net.forward(x, Mode::kTrain).values()) l += sigmoid(v) * sigmoid(v);
    return l;
  };
  const double before = loss();
  for (int i = 0; i < 5; ++i) {
    net.params().zero_grad();
    net.backward(sigmoid_square_grad(net.forward(x, Mode::kTrain)));
    opt.step(net.params());
  }
  EXPECT_LT(loss(), before);
}

}  // namespace
}  // namespace strokeseg::nn

// Copyright (c) 2026, strokeseg contributors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>

#include "support/gradcheck.hpp"
#include "strokeseg/error.hpp"
#include "strokeseg/nn/layers.hpp"

namespace strokeseg::nn {
namespace {

using testing::GradChecker;
using testing::max_relative_error;
using testing::Probe;
using testing::random_tensor;

constexpr double kGradTol = 1e-3;

// Direct 3D convolution with zero padding k/2.
Tensor naive_conv(const Tensor& x, const Parameter& w, const Parameter* b, int k) {
  const FeatureShape s = feature_shape(x);
  const std::int64_t cout = w.value.dim(0);
  Tensor y = make_feature_map({s.n, cout, s.x, s.y, s.z});
  const int p = k / 2;
  for (std::int64_t n = 0; n < s.n; ++n)
    for (std::int64_t o = 0; o < cout; ++o)
      for (std::int64_t z = 0; z < s.z; ++z)
        for (std::int64_t yy = 0; yy < s.y; ++yy)
          for (std::int64_t xx = 0; xx < s.x; ++xx) {
            double acc = b ? b->value[o] : 0.0;
            for (std::int64_t i = 0; i < s.c; ++i)
              for (int dz = 0; dz < k; ++dz)
                for (int dy = 0; dy < k; ++dy)
                  for (int dx = 0; dx < k; ++dx) {
                    const std::int64_t sx = xx + dx - p, sy = yy + dy - p, sz = z + dz - p;
                    if (sx < 0 || sy < 0 || sz < 0 || sx >= s.x || sy >= s.y || sz >= s.z) continue;
                    const std::int64_t widx = (((o * s.c + i) * k + dz) * k + dy) * k + dx;
                    acc += w.value[widx] * x.at(n, i, sx, sy, sz);
                  }
            y.at(n, o, xx, yy, z) = acc;
          }
  return y;
}

void expect_close(const Tensor& a, const Tensor& b, double tol) {
  ASSERT_EQ(a.dims(), b.dims());
  for (std::int64_t i = 0; i < a.size(); ++i) ASSERT_NEAR(a[i], b[i], tol) << "at " << i;
}

template <class Layer>
void check_layer_grads(ModelParams& store, Layer& layer, Tensor x, int samples_per_param = 6,
                       std::uint64_t seed = 1) {
  Tensor dx;
  Probe probe{[&] { return layer.forward(x); }, [&](const Tensor& dy) { dx = layer.backward(dy); }};
  GradChecker checker(probe, seed);
  checker.run_backward(store);
  for (std::size_t i = 0; i < store.size(); ++i) {
    if (!store[i].trainable) continue;
    const auto s = checker.check_parameter(store[i], samples_per_param);
    EXPECT_LT(max_relative_error(s), kGradTol) << store[i].name;
  }
  const Tensor analytic_dx = dx;
  const auto s = checker.check_tensor("input", x, analytic_dx, samples_per_param);
  EXPECT_LT(max_relative_error(s), kGradTol) << "input";
}

TEST(Conv3d, MatchesDirectConvolution) {
  for (int k : {1, 3, 5}) {
    ModelParams store;
    std::mt19937_64 init(k);
    Conv3d conv(store, "c", 3, 4, k, true, init);
    for (std::int64_t i = 0; i < conv.bias()->value.size(); ++i) conv.bias()->value[i] = 0.1 * i;
    const Tensor x = random_tensor({2, 3, 5, 6, 4}, k);
    expect_close(conv.forward(x), naive_conv(x, *conv.weight(), conv.bias(), k), 1e-12);
  }
}

TEST(Conv3d, Gradients) {
  for (int k : {1, 3}) {
    ModelParams store;
    std::mt19937_64 init(k);
    Conv3d conv(store, "c", 2, 3, k, true, init);
    check_layer_grads(store, conv, random_tensor({2, 2, 4, 3, 5}, 11));
  }
}

TEST(Conv3d, ParameterCountExample) {
  ModelParams store;
  std::mt19937_64 init(0);
  Conv3d conv(store, "c", 3, 5, 1, true, init);
  EXPECT_EQ(count_parameters(store), 20);
}

TEST(Conv3d, ScaleEquivarianceWithoutBias) {
  ModelParams store;
  std::mt19937_64 init(3);
  Conv3d conv(store, "c", 24, 16, 1, false, init);
  Tensor x = random_tensor({1, 24, 4, 4, 4}, 2);
  const Tensor y = conv.forward(x);
  for (double& v : x.values()) v *= -2.5;
  const Tensor y2 = conv.forward(x);
  for (std::int64_t i = 0; i < y.size(); ++i) EXPECT_NEAR(y2[i], -2.5 * y[i], 1e-12);
}

TEST(PatchDown, MatchesStridedConvolution) {
  ModelParams store;
  std::mt19937_64 init(5);
  PatchDown down(store, "d", 2, 3, init);
  const Tensor x = random_tensor({1, 2, 4, 6, 2}, 7);
  const Tensor y = down.forward(x);
  ASSERT_EQ(y.dims(), (std::vector<std::int64_t>{1, 3, 2, 3, 1}));
  const Parameter& w = store.at("d.weight");
  const Parameter& b = store.at("d.bias");
  for (std::int64_t o = 0; o < 3; ++o)
    for (std::int64_t z = 0; z < 1; ++z)
      for (std::int64_t yy = 0; yy < 3; ++yy)
        for (std::int64_t xx = 0; xx < 2; ++xx) {
          double acc = b.value[o];
          for (std::int64_t i = 0; i < 2; ++i)
            for (int dx = 0; dx < 2; ++dx)
              for (int dy = 0; dy < 2; ++dy)
                for (int dz = 0; dz < 2; ++dz)
                  acc += w.value[(((o * 2 + i) * 2 + dz) * 2 + dy) * 2 + dx] *
                         x.at(0, i, 2 * xx + dx, 2 * yy + dy, 2 * z + dz);
          EXPECT_NEAR(y.at(0, o, xx, yy, z), acc, 1e-12);
        }
  check_layer_grads(store, down, random_tensor({2, 2, 4, 2, 4}, 3));
}

TEST(PatchUp, MatchesTransposedConvolution) {
  ModelParams store;
  std::mt19937_64 init(6);
  PatchUp up(store, "u", 3, 2, init);
  const Tensor x = random_tensor({1, 3, 2, 1, 2}, 8);
  const Tensor y = up.forward(x);
  ASSERT_EQ(y.dims(), (std::vector<std::int64_t>{1, 2, 4, 2, 4}));
  const Parameter& w = store.at("u.weight");
  const Parameter& b = store.at("u.bias");
  for (std::int64_t o = 0; o < 2; ++o)
    for (std::int64_t z = 0; z < 4; ++z)
      for (std::int64_t yy = 0; yy < 2; ++yy)
        for (std::int64_t xx = 0; xx < 4; ++xx) {
          double acc = b.value[o];
          for (std::int64_t i = 0; i < 3; ++i)
            acc += w.value[(((i * 2 + o) * 2 + z % 2) * 2 + yy % 2) * 2 + xx % 2] * x.at(0, i, xx / 2, yy / 2, z / 2);
          EXPECT_NEAR(y.at(0, o, xx, yy, z), acc, 1e-12);
        }
  check_layer_grads(store, up, random_tensor({2, 3, 2, 2, 1}, 4));
}

TEST(BatchNorm3d, TrainModeNormalizesPerChannel) {
  ModelParams store;
  BatchNorm3d bn(store, "bn", 3);
  Tensor x = random_tensor({2, 3, 3, 3, 3}, 9, 4.0);
  for (std::int64_t i = 0; i < x.size(); ++i) x[i] += 5.0;
  const Tensor y = bn.forward(x, Mode::kTrain);
  const FeatureShape s = feature_shape(x);
  for (std::int64_t c = 0; c < 3; ++c) {
    double mean = 0, sq = 0, xm = 0, xs = 0;
    const double count = static_cast<double>(s.n * s.spatial());
    for (std::int64_t n = 0; n < s.n; ++n)
      for (std::int64_t i = 0; i < s.spatial(); ++i) {
        const double v = y[(n * 3 + c) * s.spatial() + i];
        mean += v;
        sq += v * v;
        xm += x[(n * 3 + c) * s.spatial() + i];
      }
    mean /= count;
    EXPECT_NEAR(mean, 0.0, 1e-12);
    xm /= count;
    for (std::int64_t n = 0; n < s.n; ++n)
      for (std::int64_t i = 0; i < s.spatial(); ++i) xs += std::pow(x[(n * 3 + c) * s.spatial() + i] - xm, 2);
    const double var = xs / count;
    EXPECT_NEAR(sq / count, var / (var + BatchNorm3d::kEps), 1e-9);
    // Running statistics move 10% toward the batch (unbiased variance).
    EXPECT_NEAR(bn.running_mean()->value[c], 0.1 * xm, 1e-12);
    EXPECT_NEAR(bn.running_var()->value[c], 0.9 + 0.1 * xs / (count - 1), 1e-12);
  }
}

TEST(BatchNorm3d, EvalModeUsesRunningStatistics) {
  ModelParams store;
  BatchNorm3d bn(store, "bn", 2);
  bn.running_mean()->value[0] = 1.0;
  bn.running_var()->value[0] = 4.0;
  bn.gamma()->value[0] = 2.0;
  bn.beta()->value[0] = 0.5;
  Tensor x({1, 2, 1, 1, 1});
  x[0] = 3.0;
  const Tensor y = bn.forward(x, Mode::kEval);
  EXPECT_NEAR(y[0], 2.0 * (3.0 - 1.0) / std::sqrt(4.0 + BatchNorm3d::kEps) + 0.5, 1e-12);
  EXPECT_NEAR(y[1], 0.0, 1e-12);
}

TEST(BatchNorm3d, Gradients) {
  ModelParams store;
  BatchNorm3d bn(store, "bn", 3);
  for (int c = 0; c < 3; ++c) {
    bn.gamma()->value[c] = 0.5 + c;
    bn.beta()->value[c] = -0.3 * c;
  }
  Tensor x = random_tensor({2, 3, 2, 3, 2}, 12);
  for (Mode mode : {Mode::kTrain, Mode::kEval}) {
    Tensor dx;
    Probe probe{[&] { return bn.forward(x, mode); }, [&](const Tensor& dy) { dx = bn.backward(dy); }};
    GradChecker checker(probe, 2);
    checker.run_backward(store);
    EXPECT_LT(max_relative_error(checker.check_parameter(*bn.gamma(), 3)), kGradTol);
    EXPECT_LT(max_relative_error(checker.check_parameter(*bn.beta(), 3)), kGradTol);
    const Tensor adx = dx;
    EXPECT_LT(max_relative_error(checker.check_tensor("x", x, adx, 8)), kGradTol);
  }
}

TEST(PReLU, ValuesAndGradients) {
  ModelParams store;
  PReLU act(store, "a", 2);
  EXPECT_EQ(act.slope()->value[0], 0.25);
  Tensor x({1, 2, 2, 1, 1});
  x[0] = -2.0;
  x[1] = 3.0;
  x[2] = -1.0;
  x[3] = 0.5;
  act.slope()->value[1] = 0.1;
  const Tensor y = act.forward(x);
  EXPECT_DOUBLE_EQ(y[0], -0.5);
  EXPECT_DOUBLE_EQ(y[1], 3.0);
  EXPECT_DOUBLE_EQ(y[2], -0.1);
  EXPECT_DOUBLE_EQ(y[3], 0.5);
  check_layer_grads(store, act, random_tensor({2, 2, 3, 2, 2}, 13));
}

TEST(ReLU, ForwardBackward) {
  ReLU relu;
  Tensor x({1, 1, 3, 1, 1});
  x[0] = -1;
  x[1] = 2;
  x[2] = 0.5;
  const Tensor y = relu.forward(x);
  EXPECT_EQ(y[0], 0.0);
  EXPECT_EQ(y[1], 2.0);
  Tensor dy({1, 1, 3, 1, 1}, 1.0);
  const Tensor dx = relu.backward(dy);
  EXPECT_EQ(dx[0], 0.0);
  EXPECT_EQ(dx[1], 1.0);
  EXPECT_EQ(dx[2], 1.0);
}

TEST(Dropout, EvalIsIdentityAndTrainIsInverted) {
  std::mt19937_64 rng(4);
  Dropout drop(0.25, &rng);
  const Tensor x = random_tensor({2, 3, 4, 4, 4}, 14);
  EXPECT_EQ(drop.forward(x, Mode::kEval), x);
  EXPECT_EQ(drop.forward(x, Mode::kEval), x);
  const Tensor y = drop.forward(x, Mode::kTrain);
  std::int64_t dropped = 0;
  for (std::int64_t i = 0; i < x.size(); ++i) {
    if (y[i] == 0.0) {
      ++dropped;
    } else {
      EXPECT_NEAR(y[i], x[i] / 0.75, 1e-12);
    }
  }
  EXPECT_NEAR(static_cast<double>(dropped) / x.size(), 0.25, 0.05);
  // Backward applies the same mask and scale.
  const Tensor dx = drop.backward(x);
  EXPECT_EQ(dx, y);
  Dropout none(0.0, &rng);
  EXPECT_EQ(none.forward(x, Mode::kTrain), x);
}

TEST(LayerNorm, NormalizesLastDimension) {
  ModelParams store;
  LayerNorm ln(store, "ln", 4);
  const Tensor x = random_tensor({3, 4}, 15, 3.0);
  const Tensor y = ln.forward(x);
  for (int r = 0; r < 3; ++r) {
    double m = 0, v = 0, xm = 0, xv = 0;
    for (int c = 0; c < 4; ++c) {
      m += y[r * 4 + c];
      xm += x[r * 4 + c];
    }
    xm /= 4;
    for (int c = 0; c < 4; ++c) {
      v += y[r * 4 + c] * y[r * 4 + c];
      xv += std::pow(x[r * 4 + c] - xm, 2);
    }
    EXPECT_NEAR(m, 0.0, 1e-12);
    xv /= 4;
    EXPECT_NEAR(v / 4, xv / (xv + LayerNorm::kEps), 1e-9);
  }
  for (int c = 0; c < 4; ++c) {
    ln.gamma()->value[c] = 1.0 + 0.2 * c;
    ln.beta()->value[c] = 0.1 * c;
  }
  check_layer_grads(store, ln, random_tensor({5, 4}, 16));
}

TEST(Linear, AffineMapAndGradients) {
  ModelParams store;
  std::mt19937_64 init(7);
  Linear lin(store, "l", 3, 2, init);
  for (int i = 0; i < 2; ++i) lin.bias()->value[i] = 0.5 * (i + 1);
  const Tensor x = random_tensor({4, 3}, 17);
  const Tensor y = lin.forward(x);
  ASSERT_EQ(y.dims(), (std::vector<std::int64_t>{4, 2}));
  for (int r = 0; r < 4; ++r)
    for (int o = 0; o < 2; ++o) {
      double acc = lin.bias()->value[o];
      for (int i = 0; i < 3; ++i) acc += lin.weight()->value[o * 3 + i] * x[r * 3 + i];
      EXPECT_NEAR(y[r * 2 + o], acc, 1e-12);
    }
  check_layer_grads(store, lin, random_tensor({2, 3, 3}, 18));
}

TEST(Gelu, ExactErfForm) {
  Gelu g;
  Tensor x({5});
  const double vals[] = {-3.0, -0.5, 0.0, 0.7, 2.0};
  for (int i = 0; i < 5; ++i) x[i] = vals[i];
  const Tensor y = g.forward(x);
  for (int i = 0; i < 5; ++i) {
    EXPECT_NEAR(y[i], 0.5 * vals[i] * (1.0 + std::erf(vals[i] / std::sqrt(2.0))), 1e-15);
  }
  ModelParams empty;
  check_layer_grads(empty, g, random_tensor({3, 7}, 19));
}

TEST(Tensor, ChannelConcatSplitRoundTrip) {
  const Tensor a = random_tensor({2, 3, 2, 2, 2}, 20);
  const Tensor b = random_tensor({2, 5, 2, 2, 2}, 21);
  const Tensor c = concat_channels(a, b);
  EXPECT_EQ(feature_shape(c).c, 8);
  Tensor ga, gb;
  split_channels(c, 3, ga, gb);
  EXPECT_EQ(ga, a);
  EXPECT_EQ(gb, b);
  EXPECT_EQ(to_feature_map(to_tokens(a)), a);
}

TEST(Tensor, ErrorsCarryCodes) {
  try {
    feature_shape(Tensor({2, 3}));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kShapeMismatch);
  }
  Tensor t({2});
  t[1] = std::nan("");
  try {
    check_finite(t, "probe");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kNonFinite);
  }
}

TEST(ModelParams, RegistryContract) {
  ModelParams p;
  p.add("a", Tensor({3}, 1.0));
  p.add("stat", Tensor({2}), false);
  EXPECT_EQ(count_parameters(p), 3);
  try {
    p.add("a", Tensor({1}));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kInvalidArgument);
  }
  const auto snap = p.snapshot();
  const auto sum = p.checksum();
  p.at("a").value[0] = 5.0;
  EXPECT_NE(p.checksum(), sum);
  p.restore(snap);
  EXPECT_EQ(p.checksum(), sum);
}

}  // namespace
}  // namespace strokeseg::nn

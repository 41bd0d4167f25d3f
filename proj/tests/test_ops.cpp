#include <cmath>
#include <limits>

#include <gtest/gtest.h>

#include "gyolo/ops.hpp"
#include "oracle.hpp"

namespace gyolo {
namespace {

using testing::random_tensor;
using testing::reference_conv;

TEST(Tensor, RejectsNonPositiveExtents) {
  EXPECT_THROW(Tensor({1, 0, 2, 2}), ShapeError);
  EXPECT_THROW(Tensor({1, 1, 2, 2}, std::vector<float>(3)), ShapeError);
  EXPECT_EQ(Tensor({2, 3, 4, 5}).numel(), 120u);
}

TEST(Conv2d, IdentityKernel) {
  const Tensor x({1, 1, 2, 2}, {1, 2, 3, 4});
  const Tensor w({1, 1, 1, 1}, {1});
  EXPECT_TRUE(bit_equal(conv2d(x, w, {}, ConvParams::square(1, 1)), x));
}

TEST(Conv2d, OnesKernelCountsOverlap) {
  const Tensor x({1, 1, 3, 3}, 1.0f);
  const Tensor w({1, 1, 3, 3}, 1.0f);
  const Tensor y = conv2d(x, w, {}, ConvParams::square(1, 3));
  EXPECT_EQ(y.at(0, 0, 1, 1), 9.0f);
  EXPECT_EQ(y.at(0, 0, 0, 0), 4.0f);
  EXPECT_EQ(y.at(0, 0, 2, 2), 4.0f);
  EXPECT_EQ(y.at(0, 0, 0, 1), 6.0f);
}

TEST(Conv2d, StrideTwoShape) {
  const Tensor x({1, 3, 640, 640});
  const Tensor w({16, 3, 3, 3});
  EXPECT_EQ(conv2d(x, w, {}, ConvParams::square(16, 3, 2)).shape(), (Shape{1, 16, 320, 320}));
}

TEST(Conv2d, RejectsBadShapes) {
  const Tensor x({1, 4, 5, 5});
  EXPECT_THROW(conv2d(x, Tensor({8, 3, 3, 3}), {}, ConvParams::square(8, 3)), ShapeError);
  EXPECT_THROW(conv2d(x, Tensor({6, 2, 1, 1}), {}, ConvParams::square(6, 1, 1, 3)), ShapeError);
  const std::vector<float> bias(3);
  EXPECT_THROW(conv2d(x, Tensor({8, 4, 1, 1}), bias, ConvParams::square(8, 1)), ShapeError);
}

// Randomized (k, s, p, d, groups) against the direct sliding window: values
// must match bit for bit, including spatial sizes that exercise the partial
// column tiles.
TEST(Conv2d, MatchesSlidingWindowReferenceExactly) {
  Xoshiro256pp rng(11);
  auto pick = [&](int lo, int hi) {
    return lo + static_cast<int>(rng.next() % static_cast<std::uint64_t>(hi - lo + 1));
  };
  for (int trial = 0; trial < 150; ++trial) {
    ConvParams p;
    p.groups = pick(1, 3);
    const int c1 = p.groups * pick(1, 5);
    p.out_channels = p.groups * pick(1, 12);
    p.kernel = {pick(1, 5), pick(1, 5)};
    p.stride = {pick(1, 3), pick(1, 3)};
    p.dilation = {pick(1, 2), pick(1, 2)};
    p.padding = {pick(0, 3), pick(0, 3)};
    const int h = pick(1, 23) + p.dilation.h * (p.kernel.h - 1);
    const int w = pick(1, 41) + p.dilation.w * (p.kernel.w - 1);
    const Tensor x = random_tensor(rng, {pick(1, 2), c1, h, w});
    const Tensor wt = random_tensor(rng, {p.out_channels, c1 / p.groups, p.kernel.h, p.kernel.w});
    std::vector<float> bias;
    if (trial % 2 == 0) {
      for (int o = 0; o < p.out_channels; ++o) bias.push_back(rng.uniform_symmetric(1.0f));
    }
    const Tensor got = conv2d(x, wt, bias, p);
    const Tensor want = reference_conv(x, wt, bias, p);
    ASSERT_EQ(got.shape(), want.shape()) << "trial " << trial;
    ASSERT_TRUE(bit_equal(got, want)) << "trial " << trial;
  }
}

TEST(Conv2d, LargeChannelCountsMatchReference) {
  Xoshiro256pp rng(12);
  for (int hw : {5, 9, 20}) {
    const Tensor x = random_tensor(rng, {1, 300, hw, hw});
    const Tensor w = random_tensor(rng, {20, 300, 3, 3}, -0.1f, 0.1f);
    const ConvParams p = ConvParams::square(20, 3);
    EXPECT_TRUE(bit_equal(conv2d(x, w, {}, p), reference_conv(x, w, {}, p))) << hw;
  }
}

TEST(Conv2d, IsLinearWithoutBias) {
  Xoshiro256pp rng(13);
  const ConvParams p = ConvParams::square(6, 3);
  const Tensor w = random_tensor(rng, {6, 4, 3, 3});
  const Tensor x = random_tensor(rng, {1, 4, 8, 8});
  const Tensor y = random_tensor(rng, {1, 4, 8, 8});
  const float a = 0.7f, b = -1.3f;
  const Tensor lhs = conv2d(add(scale(x, a), scale(y, b)), w, {}, p);
  const Tensor rhs = add(scale(conv2d(x, w, {}, p), a), scale(conv2d(y, w, {}, p), b));
  float max_abs = 0.0f;
  for (float v : rhs.values()) max_abs = std::max(max_abs, std::abs(v));
  for (std::size_t i = 0; i < lhs.numel(); ++i) {
    EXPECT_NEAR(lhs.values()[i], rhs.values()[i], 1e-5f * max_abs);
  }
}

TEST(Conv2d, RepeatedCallsAreBitIdentical) {
  Xoshiro256pp rng(14);
  const Tensor x = random_tensor(rng, {1, 16, 21, 19});
  const Tensor w = random_tensor(rng, {24, 16, 3, 3});
  const ConvParams p = ConvParams::square(24, 3, 2);
  EXPECT_TRUE(bit_equal(conv2d(x, w, {}, p), conv2d(x, w, {}, p)));
}

TEST(DepthwiseConv2d, ScalesEachChannelIndependently) {
  const Tensor x({1, 2, 2, 2}, {1, 2, 3, 4, 5, 6, 7, 8});
  const Tensor w({2, 1, 1, 1}, {2, 3});
  const Tensor y = depthwise_conv2d(x, w, ConvParams::square(2, 1, 1, 2));
  EXPECT_EQ(y.values(), (std::vector<float>{2, 4, 6, 8, 15, 18, 21, 24}));
}

TEST(DepthwiseConv2d, EqualsGroupedConvAndPreservesShape) {
  Xoshiro256pp rng(15);
  const Tensor x = random_tensor(rng, {1, 16, 20, 20});
  const Tensor w = random_tensor(rng, {16, 1, 5, 5});
  const ConvParams p = ConvParams::square(16, 5, 1, 16);
  const Tensor y = depthwise_conv2d(x, w, p);
  EXPECT_EQ(y.shape(), (Shape{1, 16, 20, 20}));
  EXPECT_TRUE(bit_equal(y, reference_conv(x, w, {}, p)));
}

TEST(DepthwiseConv2d, RejectsGroupMismatch) {
  const Tensor x({1, 4, 5, 5});
  EXPECT_THROW(depthwise_conv2d(x, Tensor({4, 2, 3, 3}), ConvParams::square(4, 3, 1, 2)),
               ShapeError);
}

TEST(BatchNorm, Examples) {
  const Tensor x({1, 1, 1, 3}, {-1, 0, 2});
  const std::vector<float> one{1}, zero{0};
  EXPECT_TRUE(bit_equal(batchnorm_infer(x, one, zero, zero, one, 0.0f), x));

  const Tensor two({1, 1, 1, 1}, 2.0f);
  const std::vector<float> g{3}, b{1};
  EXPECT_EQ(batchnorm_infer(two, g, b, zero, one, 0.0f).values()[0], 7.0f);

  const Tensor c({1, 2, 2, 2}, 5.0f);
  const std::vector<float> gg{2, 3}, bb{0.25f, -4}, mm{5, 5}, vv{1, 9};
  const Tensor y = batchnorm_infer(c, gg, bb, mm, vv, 1e-3f);
  for (int i = 0; i < 4; ++i) {
    EXPECT_EQ(y.values()[i], 0.25f);
    EXPECT_EQ(y.values()[4 + i], -4.0f);
  }
  const std::vector<float> wrong{1, 1, 1};
  EXPECT_THROW(batchnorm_infer(c, wrong, bb, mm, vv, 1e-3f), ShapeError);
}

TEST(Silu, Examples) {
  EXPECT_EQ(silu(0.0f), 0.0f);
  EXPECT_NEAR(silu(20.0f), 20.0f, 1e-6f);
  const double s1 = 1.0 / (1.0 + std::exp(-1.0));
  const double sm1 = 1.0 / (1.0 + std::exp(1.0));
  // silu(-x) * sigma(x) = -silu(x) * sigma(-x) at x = 1
  EXPECT_NEAR(silu(-1.0f) * s1, -silu(1.0f) * sm1, 1e-7);
  EXPECT_NEAR(silu(-1.0f) * sigmoid(1.0f), -silu(1.0f) * sigmoid(-1.0f), 1e-7f);
}

TEST(Silu, CloseToDoublePrecisionDefinition) {
  for (int i = -2000; i <= 2000; ++i) {
    const float x = i * 0.01f;
    const double want = x / (1.0 + std::exp(-static_cast<double>(x)));
    EXPECT_NEAR(silu(x), want, 1e-6 * std::max(1.0, std::abs(want))) << x;
    const double sig = 1.0 / (1.0 + std::exp(-static_cast<double>(x)));
    EXPECT_NEAR(sigmoid(x), sig, 1e-6 * std::max(1e-3, sig)) << x;
  }
  EXPECT_EQ(sigmoid(-200.0f) < 1e-30f, true);
  EXPECT_EQ(sigmoid(200.0f), 1.0f);
}

TEST(Silu, TensorFormMatchesScalarBitForBit) {
  Xoshiro256pp rng(16);
  const Tensor x = random_tensor(rng, {1, 3, 7, 11}, -30.0f, 30.0f);
  const Tensor y = silu(x);
  const Tensor s = sigmoid(x);
  for (std::size_t i = 0; i < x.numel(); ++i) {
    ASSERT_EQ(y.values()[i], silu(x.values()[i]));
    ASSERT_EQ(s.values()[i], sigmoid(x.values()[i]));
  }
}

TEST(MaxPool, Examples) {
  Xoshiro256pp rng(17);
  const Tensor x = random_tensor(rng, {1, 2, 9, 7});
  EXPECT_EQ(maxpool2d(x, 5, 1, 2).shape(), x.shape());
  const Tensor c({1, 1, 4, 4}, 2.5f);
  EXPECT_TRUE(bit_equal(maxpool2d(c, 5, 1, 2), c));
  std::vector<float> v(9);
  for (int i = 0; i < 9; ++i) v[i] = static_cast<float>(i + 1);
  const Tensor y = maxpool2d(Tensor({1, 1, 3, 3}, v), 3, 1, 0);
  EXPECT_EQ(y.shape(), (Shape{1, 1, 1, 1}));
  EXPECT_EQ(y.values()[0], 9.0f);
}

TEST(MaxPool, PaddingNeverWinsOnNegativeMaps) {
  const Tensor x({1, 1, 3, 3}, -4.0f);
  const Tensor y = maxpool2d(x, 5, 1, 2);
  for (float v : y.values()) EXPECT_EQ(v, -4.0f);
}

TEST(MaxPool, MatchesReference) {
  Xoshiro256pp rng(18);
  const Tensor x = random_tensor(rng, {2, 3, 11, 13});
  for (auto [k, s, p] : {std::tuple{3, 2, 1}, {5, 1, 2}, {2, 2, 0}, {13, 1, 6}}) {
    EXPECT_TRUE(bit_equal(maxpool2d(x, k, s, p), testing::reference_maxpool(x, k, s, p)));
  }
}

TEST(MaxPool, ChainedPoolsEqualWiderPools) {
  Xoshiro256pp rng(19);
  const Tensor x = random_tensor(rng, {1, 4, 20, 20}, -5.0f, 5.0f);
  const Tensor p1 = maxpool2d(x, 5, 1, 2);
  const Tensor p2 = maxpool2d(p1, 5, 1, 2);
  const Tensor p3 = maxpool2d(p2, 5, 1, 2);
  EXPECT_TRUE(bit_equal(p2, maxpool2d(x, 9, 1, 4)));
  EXPECT_TRUE(bit_equal(p3, maxpool2d(x, 13, 1, 6)));
}

TEST(Upsample, Examples) {
  const Tensor y = upsample_nearest2x(Tensor({1, 1, 1, 1}, 5.0f));
  EXPECT_EQ(y.shape(), (Shape{1, 1, 2, 2}));
  for (float v : y.values()) EXPECT_EQ(v, 5.0f);
  EXPECT_EQ(upsample_nearest2x(Tensor({1, 64, 40, 40})).shape(), (Shape{1, 64, 80, 80}));
  const Tensor c({1, 2, 3, 3}, 1.5f);
  EXPECT_TRUE(bit_equal(maxpool2d(upsample_nearest2x(c), 2, 2, 0), c));
}

TEST(Upsample, ReplicatesIntoBlocks) {
  Xoshiro256pp rng(20);
  const Tensor x = random_tensor(rng, {1, 2, 3, 4});
  const Tensor y = upsample_nearest2x(x);
  for (int c = 0; c < 2; ++c)
    for (int i = 0; i < 6; ++i)
      for (int j = 0; j < 8; ++j) EXPECT_EQ(y.at(0, c, i, j), x.at(0, c, i / 2, j / 2));
}

TEST(Concat, ExamplesAndSplitRoundTrip) {
  Xoshiro256pp rng(21);
  const Tensor a = random_tensor(rng, {1, 8, 4, 4});
  const Tensor b = random_tensor(rng, {1, 8, 4, 4});
  const Tensor y = concat_channels({&a, &b});
  EXPECT_EQ(y.shape(), (Shape{1, 16, 4, 4}));
  EXPECT_TRUE(bit_equal(concat_channels({&a}), a));
  EXPECT_TRUE(bit_equal(slice_channels(y, 0, 8), a));
  EXPECT_TRUE(bit_equal(slice_channels(y, 8, 8), b));

  const Tensor c = random_tensor(rng, {2, 3, 5, 2});
  const Tensor d = random_tensor(rng, {2, 5, 5, 2});
  const Tensor cd = concat_channels({&c, &d});
  EXPECT_TRUE(bit_equal(slice_channels(cd, 0, 3), c));
  EXPECT_TRUE(bit_equal(slice_channels(cd, 3, 5), d));
  const Tensor bad({1, 8, 4, 5});
  EXPECT_THROW(concat_channels({&a, &bad}), ShapeError);
  EXPECT_THROW(slice_channels(a, 6, 3), ShapeError);
}

TEST(Elementwise, AddSoftmaxMatmul) {
  Xoshiro256pp rng(22);
  const Tensor x = random_tensor(rng, {1, 2, 3, 4});
  EXPECT_TRUE(bit_equal(add(x, Tensor(x.shape())), x));
  EXPECT_THROW(add(x, Tensor({1, 2, 4, 3})), ShapeError);

  const Tensor s = softmax_lastdim(Tensor({1, 1, 2, 16}, 0.3f));
  for (float v : s.values()) EXPECT_FLOAT_EQ(v, 1.0f / 16.0f);
  const Tensor r = softmax_lastdim(random_tensor(rng, {1, 3, 5, 9}, -20.0f, 20.0f));
  for (int row = 0; row < 15; ++row) {
    double sum = 0.0;
    for (int i = 0; i < 9; ++i) sum += r.values()[row * 9 + i];
    EXPECT_NEAR(sum, 1.0, 1e-6);
  }

  const Tensor eye({1, 1, 2, 2}, {1, 0, 0, 1});
  const Tensor m = random_tensor(rng, {1, 1, 2, 2});
  EXPECT_TRUE(bit_equal(matmul_batched(eye, m), m));
  EXPECT_TRUE(bit_equal(matmul_batched(m, eye), m));
  EXPECT_THROW(matmul_batched(m, Tensor({1, 1, 3, 2})), ShapeError);
  const Tensor ab = matmul_batched(Tensor({1, 1, 1, 2}, {1, 2}), Tensor({1, 1, 2, 1}, {3, 4}));
  EXPECT_EQ(ab.values()[0], 11.0f);
  EXPECT_TRUE(bit_equal(transpose_last2(transpose_last2(x)), x));
}

}  // namespace
}  // namespace gyolo

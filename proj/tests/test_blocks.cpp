#include <gtest/gtest.h>

#include "gyolo/analysis.hpp"
#include "gyolo/arch.hpp"
#include "gyolo/blocks.hpp"
#include "gyolo/ops.hpp"
#include "oracle.hpp"

namespace gyolo {
namespace {

using testing::random_tensor;

std::vector<float> identity_kernel(int c) {
  std::vector<float> w(static_cast<std::size_t>(c) * c, 0.0f);
  for (int i = 0; i < c; ++i) w[static_cast<std::size_t>(i) * c + i] = 1.0f;
  return w;
}

TestIdentityBinder::Source zeros() {
  return [](const ParamDecl& d) { return std::vector<float>(element_count(d.dims), 0.0f); };
}

TestIdentityBinder::Source random_weights(std::uint64_t seed) {
  return [seed](const ParamDecl& d) {
    Xoshiro256pp rng(parameter_seed(d.name, seed));
    std::vector<float> v(element_count(d.dims));
    for (float& x : v) x = rng.uniform_symmetric(0.5f);
    return v;
  };
}

TEST(GhostConv, IntrinsicPlusGhostChannels) {
  RandomBinder binder(0);
  GhostConvBlock g(binder, "g", 3, 16);
  Xoshiro256pp rng(1);
  EXPECT_EQ(g.out_channels(), 16);
  EXPECT_EQ(g.forward(random_tensor(rng, {1, 3, 10, 10})).shape(), (Shape{1, 16, 10, 10}));
}

TEST(GhostConv, IdentityPrimaryZeroCheap) {
  TestIdentityBinder binder([](const ParamDecl& d) {
    if (d.name == "g.cv1.weight") return identity_kernel(8);
    return std::vector<float>(element_count(d.dims), 0.0f);
  });
  GhostConvBlock g(binder, "g", 8, 16, 1);
  Xoshiro256pp rng(2);
  const Tensor x = random_tensor(rng, {1, 8, 7, 9});
  const Tensor y = g.forward(x);
  ASSERT_EQ(y.shape(), (Shape{1, 16, 7, 9}));
  EXPECT_TRUE(bit_equal(slice_channels(y, 0, 8), x));
  const Tensor cheap = slice_channels(y, 8, 8);
  for (float v : cheap.values()) EXPECT_EQ(v, 0.0f);
}

TEST(GhostConv, LearnableParameterCount) {
  WeightContainer c;
  RandomBinder binder(0, &c);
  GhostConvBlock g(binder, "g", 16, 32, 1);
  EXPECT_EQ(c.learnable_elements(), 720u);
  EXPECT_EQ(ghost_conv_params(16, 32, 1), 720);
  EXPECT_EQ(conv_block_params(16, 16, 1), 288);
  EXPECT_EQ(conv_block_params(16, 16, 5, 16), 432);
}

TEST(GhostConv, OddWidthRejected) {
  RandomBinder binder(0);
  EXPECT_ANY_THROW(GhostConvBlock(binder, "g", 4, 15));
}

TEST(GhostConv, FewerParamsThanDenseConvForEveryGraphConfig) {
  int checked = 0;
  for (Scale s : kAllScales) {
    const ArchGraph g = make_graph(Family::GYOLOv11, s, 9);
    const std::vector<int> cin = input_channels(g);
    for (const NodeSpec& n : g.nodes) {
      std::vector<std::array<int, 3>> configs;
      if (n.kind == NodeKind::GhostConv) {
        configs.push_back({cin[n.index], n.args.out_channels, n.args.kernel});
      } else if (n.kind == NodeKind::C3Ghost) {
        const int h = static_cast<int>(n.args.out_channels * n.args.expansion);
        configs.push_back({h, h / 2, 1});
        configs.push_back({h / 2, h, 1});
      }
      for (auto [c1, c2, k] : configs) {
        WeightContainer counted;
        RandomBinder binder(0, &counted);
        GhostConvBlock block(binder, "g", c1, c2, k);
        EXPECT_EQ(static_cast<std::int64_t>(counted.learnable_elements()),
                  ghost_conv_params(c1, c2, k));
        EXPECT_LT(ghost_conv_params(c1, c2, k), conv_block_params(c1, c2, 3))
            << c1 << "->" << c2 << " k" << k;
        ++checked;
      }
    }
  }
  EXPECT_GT(checked, 40);
}

TEST(GhostBottleneck, ZeroGhostPathIsIdentity) {
  TestIdentityBinder binder(zeros());
  GhostBottleneck b(binder, "b", 32, 32, 3, 1);
  ASSERT_TRUE(b.identity_shortcut());
  Xoshiro256pp rng(3);
  const Tensor x = random_tensor(rng, {1, 32, 6, 5});
  EXPECT_TRUE(bit_equal(b.forward(x), x));
}

TEST(GhostBottleneck, PathsAreSummed) {
  TestIdentityBinder binder(random_weights(4));
  GhostBottleneck b(binder, "b", 16, 64, 3, 2);
  Xoshiro256pp rng(4);
  const Tensor x = random_tensor(rng, {1, 16, 8, 8});
  const Tensor y = b.forward(x);
  EXPECT_EQ(y.shape(), (Shape{1, 64, 4, 4}));
  EXPECT_TRUE(bit_equal(y, add(b.ghost_path(x), b.shortcut(x))));

  // The reduction ghost conv is linear here, so doubling its primary
  // weights doubles the ghost path contribution.
  const Tensor before = b.ghost_path(x);
  b.reduce().primary().weight() = scale(b.reduce().primary().weight(), 2.0f);
  const Tensor after = b.ghost_path(x);
  for (std::size_t i = 0; i < before.numel(); ++i) {
    EXPECT_NEAR(after.values()[i], 2.0f * before.values()[i],
                1e-5f * std::max(1.0f, std::abs(before.values()[i])));
  }
}

TEST(Sppf, PreservesShape) {
  RandomBinder binder(5);
  SPPFBlock sppf(binder, "s", 256, 256);
  Xoshiro256pp rng(5);
  EXPECT_EQ(sppf.forward(random_tensor(rng, {1, 256, 20, 20})).shape(),
            (Shape{1, 256, 20, 20}));
}

TEST(C2psa, PreservesShapeAndAttentionIsRowStochastic) {
  RandomBinder binder(6);
  C2PSABlock block(binder, "p", 128, 128, 1);
  Xoshiro256pp rng(6);
  const Tensor x = random_tensor(rng, {1, 128, 20, 20});
  EXPECT_EQ(block.forward(x).shape(), (Shape{1, 128, 20, 20}));

  const Tensor a = block.units()[0].attention().attention_weights(block.attended_input(x));
  ASSERT_EQ(a.shape(), (Shape{1, 1, 400, 400}));
  for (int row = 0; row < a.h(); ++row) {
    double sum = 0.0;
    for (int j = 0; j < a.w(); ++j) {
      const float v = a.at(0, 0, row, j);
      ASSERT_GE(v, 0.0f);
      sum += v;
    }
    EXPECT_NEAR(sum, 1.0, 1e-5);
  }
}

TEST(C3Blocks, DeclaredOutputWidth) {
  RandomBinder binder(7);
  Xoshiro256pp rng(7);
  const Tensor x = random_tensor(rng, {1, 32, 8, 8});
  C3GhostBlock g(binder, "g", 32, 48, 2);
  EXPECT_EQ(g.forward(x).shape(), (Shape{1, 48, 8, 8}));
  C3k2Block a(binder, "a", 32, 40, 2, false, 0.25);
  EXPECT_EQ(a.forward(x).shape(), (Shape{1, 40, 8, 8}));
  C3k2Block b(binder, "b", 32, 64, 1, true);
  EXPECT_EQ(b.forward(x).shape(), (Shape{1, 64, 8, 8}));
}

TEST(Blocks, ForwardIsDeterministicAndLeavesInputAlone) {
  RandomBinder binder(8);
  C3GhostBlock g(binder, "g", 16, 16, 1);
  Xoshiro256pp rng(8);
  const Tensor x = random_tensor(rng, {1, 16, 9, 11});
  const Tensor copy = x;
  EXPECT_TRUE(bit_equal(g.forward(x), g.forward(x)));
  EXPECT_TRUE(bit_equal(x, copy));
}

TEST(Detect, ChannelsAndAnchors) {
  RandomBinder binder(9);
  DetectHead head(binder, "d", 9, {64, 128, 256}, false);
  EXPECT_EQ(head.out_channels(), 73);
  const Tensor p3({1, 64, 80, 80}), p4({1, 128, 40, 40}), p5({1, 256, 20, 20});
  const Tensor* feats[] = {&p3, &p4, &p5};
  const std::vector<Tensor> maps = head.forward(feats);
  ASSERT_EQ(maps.size(), 3u);
  EXPECT_EQ(maps[0].shape(), (Shape{1, 73, 80, 80}));
  EXPECT_EQ(maps[1].shape(), (Shape{1, 73, 40, 40}));
  EXPECT_EQ(maps[2].shape(), (Shape{1, 73, 20, 20}));
  std::size_t anchors = 0;
  for (const Tensor& m : maps) anchors += m.shape().plane();
  EXPECT_EQ(anchors, 8400u);
}

TEST(Model, TracedShapesMatchClosedFormForAllVariants) {
  for (Family f : kAllFamilies) {
    for (Scale s : kAllScales) {
      const ArchGraph g = make_graph(f, s, 9);
      RandomBinder binder(0);
      const Model model(g, binder);
      const std::vector<Shape> traced = model.trace_shapes(Tensor({1, 3, 96, 128}));
      const std::vector<NodeShape> expect = propagate_shapes(g, 96, 128);
      ASSERT_EQ(traced.size(), expect.size());
      for (std::size_t i = 0; i < traced.size(); ++i) {
        EXPECT_EQ(traced[i].c, expect[i].c) << variant_name(f, s) << " node " << i;
        EXPECT_EQ(traced[i].h, expect[i].h) << variant_name(f, s) << " node " << i;
        EXPECT_EQ(traced[i].w, expect[i].w) << variant_name(f, s) << " node " << i;
      }
    }
  }
}

}  // namespace
}  // namespace gyolo

#include <gtest/gtest.h>

#include "gyolo/gradcheck.hpp"

namespace gyolo::grad {
namespace {

TEST(Backward, SiluSlopeAtZero) {
  const DTensor x({1, 1, 1, 3}, {0.0, 40.0, -40.0});
  const DTensor g = silu_backward(x, DTensor({1, 1, 1, 3}, 1.0));
  EXPECT_DOUBLE_EQ(g.v[0], 0.5);
  EXPECT_NEAR(g.v[1], 1.0, 1e-12);
  EXPECT_NEAR(g.v[2], 0.0, 1e-12);
}

TEST(Backward, OnesKernelInputGradientCountsWindows) {
  const DTensor x({1, 1, 3, 3}, 1.0);
  const DTensor w({1, 1, 3, 3}, 1.0);
  const ConvGrads g = conv2d_backward(x, w, ConvParams::square(1, 3), DTensor({1, 1, 3, 3}, 1.0));
  const std::vector<double> expect{4, 6, 4, 6, 9, 6, 4, 6, 4};
  EXPECT_EQ(g.dx.v, expect);
  EXPECT_EQ(g.dw.v, expect);
  ASSERT_EQ(g.db.size(), 1u);
  EXPECT_EQ(g.db[0], 9.0);
}

TEST(Backward, AddAndConcatRouteUpstream) {
  const DTensor dy({1, 3, 2, 2}, {1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12});
  const auto [da, db] = add_backward(dy);
  EXPECT_EQ(da.v, dy.v);
  EXPECT_EQ(db.v, dy.v);
  const auto [ca, cb] = concat_backward(dy, 1);
  EXPECT_EQ(ca.v, (std::vector<double>{1, 2, 3, 4}));
  EXPECT_EQ(cb.shape, (Shape{1, 2, 2, 2}));
  EXPECT_EQ(cb.v.front(), 5.0);
}

TEST(Backward, SoftmaxGradientOfUniformUpstreamIsZero) {
  const DTensor x({1, 1, 2, 4}, {0.1, -2, 3, 0.5, 1, 1, 1, 1});
  const DTensor g = softmax_backward(softmax_lastdim(x), DTensor({1, 1, 2, 4}, 1.0));
  for (double v : g.v) EXPECT_NEAR(v, 0.0, 1e-15);
}

TEST(Check, SmallConvExample) {
  const GradReport r = check(Target::Conv2d, 1);
  EXPECT_TRUE(r.pass);
  EXPECT_LT(r.max_rel_error, 1e-4);
  ASSERT_FALSE(r.shapes.empty());
  EXPECT_EQ(r.shapes[0], "x(1,3,6,6)");
}

TEST(Check, EveryTargetPassesOverFiveSeeds) {
  for (Target t : all_targets()) {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      const GradReport r = check(t, seed);
      EXPECT_TRUE(r.pass) << to_string(t) << " seed " << seed << " err " << r.max_rel_error;
      EXPECT_GT(r.probes, 0u);
    }
  }
}

TEST(Check, SignFlipIsCaught) {
  for (Target t : all_targets()) {
    const GradReport r = check(t, 1, kGradTolerance, true);
    EXPECT_FALSE(r.pass) << to_string(t);
  }
}

TEST(Check, TargetNames) {
  EXPECT_EQ(all_targets().size(), 9u);
  for (Target t : all_targets()) EXPECT_EQ(parse_target(to_string(t)), t);
  EXPECT_ANY_THROW(parse_target("matmul"));
}

}  // namespace
}  // namespace gyolo::grad

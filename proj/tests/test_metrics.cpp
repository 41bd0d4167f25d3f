#include <cmath>
#include <sstream>

#include <gtest/gtest.h>

#include "gyolo/metrics.hpp"
#include "oracle.hpp"

namespace gyolo {
namespace {

const Box kUnit{0, 0, 10, 10};
const Box kFar{500, 500, 510, 510};

ImageRecord image(std::vector<Detection> dets, std::vector<TruthBox> truths) {
  return {"img", std::move(dets), std::move(truths)};
}

double single_class_ap(const std::vector<ImageRecord>& ds) {
  return average_precision(pr_curves(ds, 1, 0.5)[0]);
}

TEST(Iou, Examples) {
  EXPECT_EQ(iou(kUnit, kUnit), 1.0);
  EXPECT_DOUBLE_EQ(iou({0, 0, 2, 2}, {1, 1, 3, 3}), 1.0 / 7.0);
  EXPECT_EQ(iou(kUnit, kFar), 0.0);
  EXPECT_EQ(iou({0, 0, 0, 5}, {0, 0, 0, 5}), 0.0);
  EXPECT_EQ(iou({0, 0, 10, 10}, {10, 0, 20, 10}), 0.0);
}

TEST(Match, Examples) {
  const std::vector<TruthBox> one{{0, kUnit}};
  EXPECT_EQ(match({{0, 0.9, kUnit}}, one, 0.5).counts, (ConfusionCounts{1, 0, 0}));
  EXPECT_EQ(match({{0, 0.9, kUnit}, {0, 0.8, kUnit}}, one, 0.5).counts,
            (ConfusionCounts{1, 1, 0}));
  EXPECT_EQ(match({{1, 0.9, kUnit}}, one, 0.5).counts, (ConfusionCounts{0, 1, 1}));
}

TEST(Match, HigherConfidenceClaimsFirstAndTiesGoToLowerIndex) {
  const std::vector<TruthBox> truths{{0, {0, 0, 10, 10}}, {0, {0, 0, 10, 10}}};
  const MatchResult r = match({{0, 0.2, kUnit}, {0, 0.7, kUnit}}, truths, 0.5);
  EXPECT_EQ(r.order, (std::vector<int>{1, 0}));
  EXPECT_EQ(r.matched_truth, (std::vector<int>{1, 0}));
}

TEST(Scores, Examples) {
  EXPECT_DOUBLE_EQ(precision({8, 2, 0}), 0.8);
  EXPECT_DOUBLE_EQ(recall({8, 0, 8}), 0.5);
  EXPECT_DOUBLE_EQ(fscore(0.5, 0.5), 0.5);
  EXPECT_NEAR(fscore(0.1, 0.9), 0.18, 1e-15);
  EXPECT_EQ(precision({}), 0.0);
  EXPECT_EQ(recall({}), 0.0);
  EXPECT_EQ(fscore(0.0, 0.0), 0.0);
}

TEST(Scores, FscoreBounds) {
  for (int i = 0; i <= 20; ++i) {
    for (int j = 0; j <= 20; ++j) {
      const double p = i / 20.0, r = j / 20.0;
      const double f = fscore(p, r);
      EXPECT_GE(f, 0.0);
      EXPECT_LE(f, std::max(p, r) + 1e-15);
      EXPECT_GE(f + 1e-15, std::min(p, r));
    }
  }
}

TEST(AveragePrecision, Examples) {
  EXPECT_DOUBLE_EQ(single_class_ap({image({{0, 0.9, kUnit}}, {{0, kUnit}})}), 1.0);
  EXPECT_DOUBLE_EQ(single_class_ap({image({{0, 0.9, kFar}, {0, 0.5, kUnit}}, {{0, kUnit}})}), 0.5);
  EXPECT_DOUBLE_EQ(single_class_ap({image({}, {{0, kUnit}})}), 0.0);
  EXPECT_THROW(single_class_ap({image({{0, 0.9, kUnit}}, {})}), std::domain_error);
}

TEST(Evaluate, MeanOverClassesWithTruths) {
  // Class 0 missed entirely, class 1 found, class 2 has no truths.
  const std::vector<ImageRecord> ds{
      image({{1, 0.9, kUnit}, {2, 0.4, kFar}}, {{0, kFar}, {1, kUnit}})};
  const MetricsReport r = evaluate(ds, 3);
  EXPECT_TRUE(r.valid);
  EXPECT_EQ(r.classes_evaluated, 2);
  EXPECT_DOUBLE_EQ(r.map50, 0.5);
  EXPECT_DOUBLE_EQ(r.map5095, 0.5);
  EXPECT_EQ(r.per_class[2].num_truths, 0);
}

TEST(Evaluate, PerfectDetectorAndEmptyTruth) {
  Xoshiro256pp rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<ImageRecord> ds = testing::random_dataset(rng, 4, 6, 3);
    for (auto& rec : ds) {
      rec.detections.clear();
      for (const TruthBox& t : rec.truths) rec.detections.push_back({t.class_id, 0.9, t.box});
    }
    const MetricsReport r = evaluate(ds, 3);
    if (!r.valid) continue;
    EXPECT_EQ(r.map50, 1.0);
    EXPECT_EQ(r.map5095, 1.0);
  }
  const MetricsReport empty = evaluate({image({{0, 0.5, kUnit}}, {})}, 2);
  EXPECT_FALSE(empty.valid);
  EXPECT_EQ(empty.classes_evaluated, 0);
}

TEST(Evaluate, MatchesBruteForceOracle) {
  Xoshiro256pp rng(2024);
  for (int trial = 0; trial < 200; ++trial) {
    const int nc = 1 + static_cast<int>(rng.next() % 3);
    const std::vector<ImageRecord> ds = testing::random_dataset(rng, 5, 6, nc);
    const testing::OracleMetrics o = testing::oracle_evaluate(ds, nc);
    const MetricsReport r = evaluate(ds, nc);
    ASSERT_EQ(r.valid, o.valid) << trial;
    if (!r.valid) continue;
    EXPECT_NEAR(r.map50, o.map50, 1e-9) << trial;
    EXPECT_NEAR(r.map5095, o.map5095, 1e-9) << trial;
    for (int c = 0; c < nc; ++c) {
      if (o.ap[c][0] < 0) continue;
      for (int t = 0; t < 10; ++t) EXPECT_NEAR(r.per_class[c].ap[t], o.ap[c][t], 1e-9);
    }
    const Curves cv = curves(ds, nc);
    ASSERT_EQ(cv.fscore.all.size(), 1000u);
    for (int i = 0; i < 1000; ++i) ASSERT_NEAR(cv.fscore.all[i], o.pooled_fscore[i], 1e-12);
  }
}

TEST(Evaluate, AddingFalsePositiveNeverRaisesAp) {
  Xoshiro256pp rng(77);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<ImageRecord> ds = testing::random_dataset(rng, 4, 5, 2);
    const MetricsReport before = evaluate(ds, 2);
    if (!before.valid) continue;
    const int cls = static_cast<int>(rng.next() % 2);
    ds[rng.next() % ds.size()].detections.push_back(
        {cls, 0.05 * (1 + static_cast<int>(rng.next() % 20)), {900, 900, 950, 950}});
    const MetricsReport after = evaluate(ds, 2);
    for (int t = 0; t < 10; ++t) {
      EXPECT_LE(after.per_class[cls].ap[t], before.per_class[cls].ap[t] + 1e-12);
    }
  }
}

TEST(Evaluate, AddingTopTruePositiveNeverLowersAp) {
  Xoshiro256pp rng(78);
  int tested = 0;
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<ImageRecord> ds = testing::random_dataset(rng, 4, 5, 2);
    // A truth that no same-class detection overlaps by 0.5 stays unmatched
    // at every threshold; a top-confidence copy of it is a pure gain.
    const TruthBox* target = nullptr;
    std::size_t where = 0;
    for (std::size_t i = 0; i < ds.size() && !target; ++i) {
      for (const TruthBox& t : ds[i].truths) {
        bool covered = false;
        for (const Detection& d : ds[i].detections) {
          covered |= d.class_id == t.class_id && iou(d.box, t.box) >= 0.5;
        }
        if (!covered) {
          target = &t;
          where = i;
          break;
        }
      }
    }
    if (!target) continue;
    const MetricsReport before = evaluate(ds, 2);
    const Detection top{target->class_id, 1.5, target->box};
    ds[where].detections.push_back(top);
    const MetricsReport after = evaluate(ds, 2);
    for (int t = 0; t < 10; ++t) {
      EXPECT_GE(after.per_class[top.class_id].ap[t] + 1e-12,
                before.per_class[top.class_id].ap[t]);
    }
    ++tested;
  }
  EXPECT_GT(tested, 50);
}

TEST(Evaluate, Map50DominatesMap5095) {
  Xoshiro256pp rng(79);
  for (int trial = 0; trial < 50; ++trial) {
    const MetricsReport r = evaluate(testing::random_dataset(rng, 6, 8, 3), 3);
    if (r.valid) {
      EXPECT_GE(r.map50, r.map5095);
    }
  }
}

TEST(Curves, SinglePerfectDetection) {
  const Curves c = curves({image({{0, 0.9, kUnit}}, {{0, kUnit}})}, 1);
  for (int i = 0; i < 1000; ++i) {
    EXPECT_EQ(c.fscore.all[i], i <= 900 ? 1.0 : 0.0) << i;
    EXPECT_EQ(c.fscore.per_class[0][i], c.fscore.all[i]);
  }
  EXPECT_EQ(operating_index(c.fscore), 0u);
}

TEST(Curves, PerfectSweepReachesFullPrecisionAndRecall) {
  const Curves c = curves({image({{0, 0.9, kUnit}, {0, 0.6, kFar}}, {{0, kUnit}, {0, kFar}})}, 1);
  const PRPoint& last = c.pr[0].points.back();
  EXPECT_EQ(last.precision, 1.0);
  EXPECT_EQ(last.recall, 1.0);
}

TEST(Curves, CsvLayouts) {
  const Curves c = curves({image({{0, 0.9, kUnit}, {1, 0.3, kFar}}, {{0, kUnit}})}, 2);
  const std::string f = fscore_csv(c.fscore, {"boneanomaly", "bonelesion"});
  std::istringstream in(f);
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "confidence,all,boneanomaly,bonelesion");
  std::getline(in, line);
  EXPECT_EQ(line.substr(0, 6), "0.000,");
  int rows = 1;
  while (std::getline(in, line)) ++rows;
  EXPECT_EQ(rows, 1000);
  EXPECT_EQ(pr_csv(c.pr[0]).substr(0, 28), "confidence,precision,recall\n");
}

TEST(Evaluate, RejectsOutOfRangeClasses) {
  EXPECT_ANY_THROW(evaluate({image({{5, 0.9, kUnit}}, {{0, kUnit}})}, 2));
  EXPECT_ANY_THROW(evaluate({image({}, {{-1, kUnit}})}, 2));
  EXPECT_ANY_THROW(evaluate({}, 0));
}

}  // namespace
}  // namespace gyolo

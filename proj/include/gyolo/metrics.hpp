#pragma once

#include <array>
#include <string>
#include <vector>

#include "gyolo/detection.hpp"

namespace gyolo {

struct ConfusionCounts {
  long tp = 0;
  long fp = 0;
  long fn = 0;
  bool operator==(const ConfusionCounts&) const = default;
};

struct MatchResult {
  ConfusionCounts counts;
  /// For every input detection, the truth index it matched or -1.
  std::vector<int> matched_truth;
  /// Input indices in matching order (confidence descending, stable).
  std::vector<int> order;
};

/// Greedy matching: detections in descending confidence each take the
/// highest-IoU unmatched truth of their class with IoU >= threshold (ties go
/// to the lower truth index).
MatchResult match(const std::vector<Detection>& detections,
                  const std::vector<TruthBox>& truths, double iou_threshold);

/// tp / (tp + fp), 0 for 0/0.
double precision(const ConfusionCounts& c);
/// tp / (tp + fn), 0 for 0/0.
double recall(const ConfusionCounts& c);
/// Harmonic mean, 0 when p + r is 0.
double fscore(double p, double r);

struct PRPoint {
  double recall = 0.0;
  double precision = 0.0;
  double confidence = 0.0;
};

/// One class's confidence sweep: a point after every detection.
struct PRCurve {
  int class_id = 0;
  long num_truths = 0;
  std::vector<PRPoint> points;
  /// Cumulative true positives after each point.
  std::vector<long> cum_tp;
};

/// 101-point interpolated AP: mean over r in {0, 0.01, ..., 1} of the highest
/// precision at recall >= r. Throws std::domain_error when the class has no
/// ground truth.
double average_precision(const PRCurve& curve);

/// Detections and truths of one image, boxes in the same coordinate frame.
struct ImageRecord {
  std::string name;
  std::vector<Detection> detections;
  std::vector<TruthBox> truths;
};

inline constexpr std::array<double, 10> kIouThresholds = {
    0.50, 0.55, 0.60, 0.65, 0.70, 0.75, 0.80, 0.85, 0.90, 0.95};

/// Per-class confidence sweeps at one IoU threshold.
std::vector<PRCurve> pr_curves(const std::vector<ImageRecord>& dataset,
                               int num_classes, double iou_threshold);

struct ClassMetrics {
  int class_id = 0;
  long num_truths = 0;
  long num_detections = 0;
  /// AP at each IoU threshold (0 for classes without truths, which are
  /// excluded from the means).
  std::vector<double> ap;
  double ap50 = 0.0;
  double ap5095 = 0.0;
};

struct MetricsReport {
  int num_classes = 0;
  /// False when the dataset holds no ground truth at all.
  bool valid = false;
  std::vector<double> iou_thresholds;
  std::vector<ClassMetrics> per_class;
  /// Classes with at least one truth (the mAP denominator).
  int classes_evaluated = 0;
  double map50 = 0.0;
  double map5095 = 0.0;
  /// Confidence threshold maximizing the all-class FScore at IoU 0.5.
  double operating_confidence = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double fscore = 0.0;
};

MetricsReport evaluate(const std::vector<ImageRecord>& dataset, int num_classes,
                       const std::vector<double>& iou_thresholds =
                           {kIouThresholds.begin(), kIouThresholds.end()});

inline constexpr int kCurveSamples = 1000;

/// FScore against confidence thresholds i / 1000 for i in 0..999, keeping
/// detections with confidence >= threshold.
struct FScoreCurve {
  std::vector<double> thresholds;
  /// [class][threshold]
  std::vector<std::vector<double>> per_class;
  /// All classes pooled (tp, fp, fn summed before dividing).
  std::vector<double> all;
  std::vector<double> all_precision;
  std::vector<double> all_recall;
};

struct Curves {
  std::vector<PRCurve> pr;
  FScoreCurve fscore;
};

Curves curves(const std::vector<ImageRecord>& dataset, int num_classes,
              double iou_threshold = 0.5);

/// Index of the first maximum of the pooled FScore curve.
std::size_t operating_index(const FScoreCurve& curve);

/// "confidence,precision,recall" rows of one class.
std::string pr_csv(const PRCurve& curve);
/// "confidence,all,<names...>" rows.
std::string fscore_csv(const FScoreCurve& curve,
                       const std::vector<std::string>& class_names);

std::string metrics_json(const MetricsReport& report,
                         const std::vector<std::string>& class_names);

}  // namespace gyolo

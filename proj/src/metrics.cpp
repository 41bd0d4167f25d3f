#include "gyolo/metrics.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace gyolo {

double iou(const Box& a, const Box& b) {
  const double area_a = a.area();
  const double area_b = b.area();
  if (area_a <= 0.0 || area_b <= 0.0) return 0.0;
  const double iw = std::min(a.x2, b.x2) - std::max(a.x1, b.x1);
  const double ih = std::min(a.y2, b.y2) - std::max(a.y1, b.y1);
  if (iw <= 0.0 || ih <= 0.0) return 0.0;
  const double inter = iw * ih;
  return inter / (area_a + area_b - inter);
}

MatchResult match(const std::vector<Detection>& detections,
                  const std::vector<TruthBox>& truths, double iou_threshold) {
  MatchResult r;
  r.order.resize(detections.size());
  std::iota(r.order.begin(), r.order.end(), 0);
  std::stable_sort(r.order.begin(), r.order.end(), [&](int a, int b) {
    return detections[a].confidence > detections[b].confidence;
  });
  r.matched_truth.assign(detections.size(), -1);
  std::vector<bool> taken(truths.size(), false);
  for (int d : r.order) {
    const Detection& det = detections[d];
    int best = -1;
    double best_iou = -1.0;
    for (std::size_t t = 0; t < truths.size(); ++t) {
      if (taken[t] || truths[t].class_id != det.class_id) continue;
      const double v = iou(det.box, truths[t].box);
      if (v >= iou_threshold && v > best_iou) {
        best = static_cast<int>(t);
        best_iou = v;
      }
    }
    if (best >= 0) {
      taken[best] = true;
      r.matched_truth[d] = best;
      ++r.counts.tp;
    } else {
      ++r.counts.fp;
    }
  }
  r.counts.fn = static_cast<long>(truths.size()) - r.counts.tp;
  return r;
}

double precision(const ConfusionCounts& c) {
  const long d = c.tp + c.fp;
  return d == 0 ? 0.0 : static_cast<double>(c.tp) / d;
}

double recall(const ConfusionCounts& c) {
  const long d = c.tp + c.fn;
  return d == 0 ? 0.0 : static_cast<double>(c.tp) / d;
}

double fscore(double p, double r) {
  return p + r == 0.0 ? 0.0 : 2.0 * p * r / (p + r);
}

double average_precision(const PRCurve& curve) {
  if (curve.num_truths <= 0) {
    throw std::domain_error("AP undefined for class " +
                            std::to_string(curve.class_id) +
                            " without ground truth");
  }
  // Interpolated precision: running max from the end of the sweep. Recall
  // levels are compared in integers (100 * tp >= k * npos) so that r = k/100
  // is hit exactly.
  const std::size_t n = curve.points.size();
  std::vector<double> best_after(n + 1, 0.0);
  for (std::size_t i = n; i-- > 0;) {
    best_after[i] = std::max(best_after[i + 1], curve.points[i].precision);
  }
  double sum = 0.0;
  std::size_t i = 0;
  for (long k = 0; k <= 100; ++k) {
    while (i < n && 100 * curve.cum_tp[i] < k * curve.num_truths) ++i;
    sum += best_after[i];
  }
  return sum / 101.0;
}

namespace {

struct Scored {
  double confidence;
  bool tp;
  std::size_t image;
  std::size_t rank;  // position in the image's matching order
};

/// Per-class scored detections sorted for the sweep.
std::vector<std::vector<Scored>> scored_by_class(
    const std::vector<ImageRecord>& dataset, int num_classes,
    double iou_threshold, std::vector<long>& truths_per_class) {
  std::vector<std::vector<Scored>> by_class(num_classes);
  truths_per_class.assign(num_classes, 0);
  for (std::size_t im = 0; im < dataset.size(); ++im) {
    const ImageRecord& rec = dataset[im];
    for (const auto& t : rec.truths) {
      if (t.class_id < 0 || t.class_id >= num_classes) {
        throw std::out_of_range("truth class " + std::to_string(t.class_id) +
                                " outside [0, " + std::to_string(num_classes) +
                                ") in image '" + rec.name + "'");
      }
      ++truths_per_class[t.class_id];
    }
    const MatchResult m = match(rec.detections, rec.truths, iou_threshold);
    for (std::size_t rank = 0; rank < m.order.size(); ++rank) {
      const int d = m.order[rank];
      const Detection& det = rec.detections[d];
      if (det.class_id < 0 || det.class_id >= num_classes) {
        throw std::out_of_range("detection class " +
                                std::to_string(det.class_id) + " outside [0, " +
                                std::to_string(num_classes) + ") in image '" +
                                rec.name + "'");
      }
      by_class[det.class_id].push_back(
          {det.confidence, m.matched_truth[d] >= 0, im, rank});
    }
  }
  for (auto& v : by_class) {
    std::sort(v.begin(), v.end(), [](const Scored& a, const Scored& b) {
      if (a.confidence != b.confidence) return a.confidence > b.confidence;
      if (a.image != b.image) return a.image < b.image;
      return a.rank < b.rank;
    });
  }
  return by_class;
}

}  // namespace

std::vector<PRCurve> pr_curves(const std::vector<ImageRecord>& dataset,
                               int num_classes, double iou_threshold) {
  std::vector<long> npos;
  const auto by_class = scored_by_class(dataset, num_classes, iou_threshold, npos);
  std::vector<PRCurve> out(num_classes);
  for (int c = 0; c < num_classes; ++c) {
    PRCurve& curve = out[c];
    curve.class_id = c;
    curve.num_truths = npos[c];
    long tp = 0;
    long fp = 0;
    for (const Scored& s : by_class[c]) {
      (s.tp ? tp : fp) += 1;
      const ConfusionCounts cc{tp, fp, npos[c] - tp};
      curve.points.push_back({recall(cc), precision(cc), s.confidence});
      curve.cum_tp.push_back(tp);
    }
  }
  return out;
}

Curves curves(const std::vector<ImageRecord>& dataset, int num_classes,
              double iou_threshold) {
  std::vector<long> npos;
  const auto by_class = scored_by_class(dataset, num_classes, iou_threshold, npos);
  Curves out;
  out.pr = pr_curves(dataset, num_classes, iou_threshold);

  FScoreCurve& f = out.fscore;
  f.per_class.assign(num_classes, std::vector<double>(kCurveSamples, 0.0));
  const long total_truths = std::accumulate(npos.begin(), npos.end(), 0L);
  for (int i = 0; i < kCurveSamples; ++i) {
    const double t = i / static_cast<double>(kCurveSamples);
    f.thresholds.push_back(t);
    long all_tp = 0;
    long all_fp = 0;
    for (int c = 0; c < num_classes; ++c) {
      long tp = 0;
      long fp = 0;
      for (const Scored& s : by_class[c]) {
        if (s.confidence < t) break;
        (s.tp ? tp : fp) += 1;
      }
      const ConfusionCounts cc{tp, fp, npos[c] - tp};
      f.per_class[c][i] = fscore(precision(cc), recall(cc));
      all_tp += tp;
      all_fp += fp;
    }
    const ConfusionCounts all{all_tp, all_fp, total_truths - all_tp};
    f.all_precision.push_back(precision(all));
    f.all_recall.push_back(recall(all));
    f.all.push_back(fscore(precision(all), recall(all)));
  }
  return out;
}

std::size_t operating_index(const FScoreCurve& curve) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < curve.all.size(); ++i) {
    if (curve.all[i] > curve.all[best]) best = i;
  }
  return best;
}

MetricsReport evaluate(const std::vector<ImageRecord>& dataset, int num_classes,
                       const std::vector<double>& iou_thresholds) {
  if (num_classes < 1) throw std::invalid_argument("num_classes must be >= 1");
  if (iou_thresholds.empty()) {
    throw std::invalid_argument("at least one IoU threshold is required");
  }
  MetricsReport r;
  r.num_classes = num_classes;
  r.iou_thresholds = iou_thresholds;
  r.per_class.resize(num_classes);
  for (int c = 0; c < num_classes; ++c) r.per_class[c].class_id = c;

  for (double thr : iou_thresholds) {
    const std::vector<PRCurve> pr = pr_curves(dataset, num_classes, thr);
    for (int c = 0; c < num_classes; ++c) {
      ClassMetrics& m = r.per_class[c];
      m.num_truths = pr[c].num_truths;
      m.num_detections = static_cast<long>(pr[c].points.size());
      m.ap.push_back(m.num_truths > 0 ? average_precision(pr[c]) : 0.0);
    }
  }
  double sum50 = 0.0;
  double sum_all = 0.0;
  for (ClassMetrics& m : r.per_class) {
    m.ap50 = m.ap.front();
    m.ap5095 = std::accumulate(m.ap.begin(), m.ap.end(), 0.0) /
               static_cast<double>(m.ap.size());
    if (m.num_truths > 0) {
      ++r.classes_evaluated;
      sum50 += m.ap50;
      sum_all += m.ap5095;
    }
  }
  r.valid = r.classes_evaluated > 0;
  if (r.valid) {
    r.map50 = sum50 / r.classes_evaluated;
    r.map5095 = sum_all / r.classes_evaluated;
  }

  const Curves cv = curves(dataset, num_classes, iou_thresholds.front());
  const std::size_t op = operating_index(cv.fscore);
  r.operating_confidence = cv.fscore.thresholds[op];
  r.precision = cv.fscore.all_precision[op];
  r.recall = cv.fscore.all_recall[op];
  r.fscore = cv.fscore.all[op];
  return r;
}

// ---------------------------------------------------------------- output --

namespace {
std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}
}  // namespace

std::string pr_csv(const PRCurve& curve) {
  std::ostringstream os;
  os << "confidence,precision,recall\n";
  for (const PRPoint& p : curve.points) {
    os << num(p.confidence) << ',' << num(p.precision) << ',' << num(p.recall)
       << '\n';
  }
  return os.str();
}

std::string fscore_csv(const FScoreCurve& curve,
                       const std::vector<std::string>& class_names) {
  std::ostringstream os;
  os << "confidence,all";
  for (std::size_t c = 0; c < curve.per_class.size(); ++c) {
    os << ',' << (c < class_names.size() ? class_names[c] : "class" + std::to_string(c));
  }
  os << '\n';
  for (std::size_t i = 0; i < curve.thresholds.size(); ++i) {
    char t[16];
    std::snprintf(t, sizeof t, "%.3f", curve.thresholds[i]);
    os << t << ',' << num(curve.all[i]);
    for (const auto& cls : curve.per_class) os << ',' << num(cls[i]);
    os << '\n';
  }
  return os.str();
}

std::string metrics_json(const MetricsReport& r,
                         const std::vector<std::string>& class_names) {
  nlohmann::json classes = nlohmann::json::array();
  for (const ClassMetrics& m : r.per_class) {
    nlohmann::json entry = {
        {"class_id", m.class_id},
        {"name", m.class_id < static_cast<int>(class_names.size())
                     ? class_names[m.class_id]
                     : "class" + std::to_string(m.class_id)},
        {"num_truths", m.num_truths},
        {"num_detections", m.num_detections},
        {"evaluated", m.num_truths > 0},
        {"ap", m.ap},
        {"ap50", m.ap50},
        {"ap50_95", m.ap5095}};
    classes.push_back(std::move(entry));
  }
  nlohmann::json doc = {{"num_classes", r.num_classes},
                        {"valid", r.valid},
                        {"iou_thresholds", r.iou_thresholds},
                        {"classes_evaluated", r.classes_evaluated},
                        {"map50", r.map50},
                        {"map50_95", r.map5095},
                        {"operating_confidence", r.operating_confidence},
                        {"precision", r.precision},
                        {"recall", r.recall},
                        {"fscore", r.fscore},
                        {"per_class", classes}};
  return doc.dump(2) + "\n";
}

}  // namespace gyolo

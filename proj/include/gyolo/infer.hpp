#pragma once

#include <array>
#include <string>
#include <vector>

#include "gyolo/arch.hpp"
#include "gyolo/data.hpp"
#include "gyolo/detection.hpp"
#include "gyolo/tensor.hpp"

namespace gyolo {

struct LetterboxResult {
  /// (1, 3, S, S) in [0, 1].
  Tensor tensor;
  double scale = 1.0;
  /// Left and top padding in network pixels.
  int dx = 0;
  int dy = 0;
  /// Size of the resized content.
  int content_w = 0;
  int content_h = 0;
  int source_w = 0;
  int source_h = 0;

  /// Network-input point -> source-image point.
  double to_source_x(double x) const { return (x - dx) / scale; }
  double to_source_y(double y) const { return (y - dy) / scale; }
};

inline constexpr float kLetterboxPad = 114.0f / 255.0f;

/// Aspect-preserving nearest-neighbour resize into an S x S canvas, content
/// centred, padding 114/255.
LetterboxResult letterbox(const Tensor& image, int size = 640);

/// Expected bin index under softmax(logits[0..count)).
float dfl_expectation(const float* logits, int count, std::size_t stride = 1);

/// Candidates from raw head maps: per cell the best class whose sigmoid score
/// exceeds `conf_threshold`, box from the four DFL distances. Boxes are in
/// network-input pixels, or in source pixels (clipped) when `lb` is given.
std::vector<Detection> decode_dfl(const std::vector<Tensor>& maps,
                                  std::array<int, 3> strides,
                                  float conf_threshold,
                                  const LetterboxResult* lb = nullptr);

/// Class-wise greedy NMS. Output is sorted by confidence descending, ties by
/// class id, then input order.
std::vector<Detection> nms(const std::vector<Detection>& candidates,
                           double iou_threshold);

struct InferOptions {
  int imgsz = 640;
  float conf = 0.25f;
  double iou = 0.45;
  /// Kept detections per image after NMS.
  std::size_t max_det = 300;
};

/// Evaluation thresholds.
inline InferOptions eval_options() { return {640, 0.001f, 0.7, 300}; }

std::vector<Detection> run(const Model& model, const Tensor& image,
                           const InferOptions& options = {});

struct StageStats {
  double mean_ms = 0.0;
  double stdev_ms = 0.0;
};

struct BenchReport {
  std::string variant;
  int imgsz = 640;
  int runs = 0;
  int warmup = 3;
  StageStats preprocess;
  StageStats forward;
  StageStats postprocess;
  /// Sum of the stage means.
  double total_mean_ms = 0.0;
};

/// Times the three pipeline stages on `image` (runs after 3 warmups).
BenchReport bench(const Model& model, const Tensor& image, int runs,
                  const InferOptions& options = {});

/// Mean and sample standard deviation in milliseconds of forward passes on a
/// fixed input of the given size.
StageStats time_forward(const Model& model, int imgsz, int runs, int warmup = 3);

std::string bench_json(const BenchReport& r);

struct ImageDetections {
  std::string image;
  std::vector<Detection> detections;
};

/// JSON array of {image, class_id, class_name, bbox, confidence}.
std::string detections_json(const std::vector<ImageDetections>& results,
                            const std::vector<std::string>& class_names);
/// Parses detections_json output (class names are ignored).
std::vector<ImageDetections> parse_detections_json(const std::string& text);

}  // namespace gyolo

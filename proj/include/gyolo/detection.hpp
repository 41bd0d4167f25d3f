#pragma once

namespace gyolo {

/// Axis-aligned corner box (x1, y1) - (x2, y2).
struct Box {
  double x1 = 0.0;
  double y1 = 0.0;
  double x2 = 0.0;
  double y2 = 0.0;

  double width() const { return x2 - x1; }
  double height() const { return y2 - y1; }
  double area() const {
    return width() > 0.0 && height() > 0.0 ? width() * height() : 0.0;
  }
  bool operator==(const Box&) const = default;
};

struct Detection {
  int class_id = 0;
  double confidence = 0.0;
  Box box;
  bool operator==(const Detection&) const = default;
};

struct TruthBox {
  int class_id = 0;
  Box box;
  bool operator==(const TruthBox&) const = default;
};

/// Intersection over union; 0 when the boxes are disjoint or either one has
/// zero area.
double iou(const Box& a, const Box& b);

}  // namespace gyolo

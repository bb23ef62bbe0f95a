#pragma once

#include <string>

namespace yolospp {

/// Axis-aligned box in pixels, center based.
struct Box {
  double x = 0;
  double y = 0;
  double w = 0;
  double h = 0;

  double left() const { return x - w / 2; }
  double right() const { return x + w / 2; }
  double top() const { return y - h / 2; }
  double bottom() const { return y + h / 2; }
  double area() const { return w * h; }

  static Box from_corners(double x1, double y1, double x2, double y2) {
    return {(x1 + x2) / 2, (y1 + y2) / 2, x2 - x1, y2 - y1};
  }
  bool operator==(const Box&) const = default;
  auto operator<=>(const Box&) const = default;
};

/// Intersection over union of the corner rectangles; 0 for disjoint or degenerate boxes.
double iou(const Box& a, const Box& b);

struct Detection {
  std::string image_id;
  int class_index = 0;
  double score = 0;  // objectness x class probability
  Box box;
  bool operator==(const Detection&) const = default;
};

/// Annotated object. Ignored regions carry class_index -1 and never count as TP or FN.
struct GroundTruthBox {
  std::string image_id;
  int class_index = 0;
  Box box;
  bool ignore = false;
  bool operator==(const GroundTruthBox&) const = default;
};

}  // namespace yolospp

#pragma once

#include <vector>

namespace boicr {

/// Axis-aligned box in continuous image coordinates; (x1,y1) is the top-left
/// corner, (x2,y2) the bottom-right. Zero-area boxes are valid.
struct Box {
  double x1 = 0.0;
  double y1 = 0.0;
  double x2 = 0.0;
  double y2 = 0.0;

  double width() const { return x2 - x1; }
  double height() const { return y2 - y1; }
  double area() const { return width() * height(); }
};

double intersection_area(const Box& a, const Box& b);

/// Intersection over union in [0,1]; returns 0 when the union has zero area.
double iou(const Box& a, const Box& b);

struct Detection {
  Box box;
  int class_id = 0;  // 0-based in memory; files store 1-based ids
  double score = 0.0;
};

/// Greedy per-class non-maximum suppression. Detections are visited by
/// descending score (ties broken by lower index); one is dropped iff its IoU
/// with an already-kept detection of the same class exceeds `iou_threshold`.
/// Returns the kept indices in keep order.
std::vector<int> nms(const std::vector<Detection>& detections, double iou_threshold);

}  // namespace boicr

#include "boicr/geometry.hpp"

#include <algorithm>
#include <numeric>

#include "boicr/common.hpp"

namespace boicr {

double intersection_area(const Box& a, const Box& b) {
  const double w = std::min(a.x2, b.x2) - std::max(a.x1, b.x1);
  if (w <= 0.0) return 0.0;
  const double h = std::min(a.y2, b.y2) - std::max(a.y1, b.y1);
  if (h <= 0.0) return 0.0;
  return w * h;
}

double iou(const Box& a, const Box& b) {
  const double inter = intersection_area(a, b);
  const double uni = a.area() + b.area() - inter;
  if (uni <= 0.0) return 0.0;
  return inter / uni;
}

std::vector<int> nms(const std::vector<Detection>& detections, double iou_threshold) {
  require(iou_threshold >= 0.0 && iou_threshold <= 1.0, "nms: iou_threshold must be in [0,1]");
  std::vector<int> order(detections.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return detections[a].score > detections[b].score;
  });

  std::vector<int> kept;
  kept.reserve(order.size());
  for (int candidate : order) {
    bool suppressed = false;
    for (int keeper : kept) {
      if (detections[keeper].class_id != detections[candidate].class_id) continue;
      if (iou(detections[keeper].box, detections[candidate].box) > iou_threshold) {
        suppressed = true;
        break;
      }
    }
    if (!suppressed) kept.push_back(candidate);
  }
  return kept;
}

}  // namespace boicr

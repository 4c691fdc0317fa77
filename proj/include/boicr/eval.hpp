#pragma once

#include <string>
#include <vector>

#include "boicr/dataset.hpp"
#include "boicr/geometry.hpp"

namespace boicr {

struct ClassEval {
  int gt_count = 0;
  int tp = 0;
  int fp = 0;
  bool has_gt = false;  // classes without ground truth are excluded from means
  double ap = 0.0;
  int positive_images = 0;
  int corloc_hits = 0;
  double corloc = 0.0;
};

struct EvalReport {
  std::vector<ClassEval> per_class;
  double map = 0.0;
  double corloc_mean = 0.0;
};

/// Greedy matching for one class within one image: detections must be sorted
/// by descending score; each one claims the still-unmatched ground-truth box
/// it overlaps most (ties: lower GT index) and is a true positive when that
/// IoU strictly exceeds the threshold. Returns a TP flag per detection.
std::vector<bool> match_detections(const std::vector<Detection>& detections,
                                   const std::vector<Box>& gt_boxes,
                                   double iou_threshold = 0.5);

/// Pascal VOC 2007 average precision: mean over recall thresholds
/// {0, 0.1, ..., 1.0} of the best precision achieved at recall >= t.
/// `precision` and `recall` are the cumulative curves in detection order.
double voc_ap_11point(const std::vector<double>& precision, const std::vector<double>& recall);

/// Area-under-curve variant (monotone precision envelope), selectable in
/// evaluate() for comparison with later VOC protocols.
double voc_ap_all_points(const std::vector<double>& precision,
                         const std::vector<double>& recall);

/// Full evaluation of a detections file against a ground-truth-bearing
/// dataset. AP follows the PASCAL criteria at IoU > `iou_threshold`; CorLoc
/// for a class is the fraction of images containing it whose top-scoring
/// detection overlaps some ground-truth instance of it with IoU > 0.5.
EvalReport evaluate(const Dataset& dataset, const std::vector<DetectionRecord>& detections,
                    double iou_threshold = 0.5, bool all_points_ap = false);

/// CSV: one row per class (1-based ids), then a mean row. Blank cells mark
/// classes without ground truth.
std::string report_to_csv(const EvalReport& report);

/// Aligned human-readable table of the same numbers.
std::string report_to_table(const EvalReport& report);

}  // namespace boicr

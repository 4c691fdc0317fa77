#include "boicr/eval.hpp"

#include <algorithm>
#include <cstdio>
#include <map>
#include <sstream>

namespace boicr {
namespace {

std::string format_fixed(double value) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6f", value);
  return buf;
}

// One detection flattened for the global precision-recall sweep.
struct ScoredFlag {
  double score = 0.0;
  int image_index = 0;
  int rank_in_image = 0;  // position within its image's sorted detections
  bool tp = false;
};

}  // namespace

std::vector<bool> match_detections(const std::vector<Detection>& detections,
                                   const std::vector<Box>& gt_boxes, double iou_threshold) {
  for (size_t i = 1; i < detections.size(); ++i)
    require(detections[i - 1].score >= detections[i].score,
            "match_detections: detections must be sorted by descending score");

  std::vector<bool> gt_taken(gt_boxes.size(), false);
  std::vector<bool> flags(detections.size(), false);
  for (size_t d = 0; d < detections.size(); ++d) {
    int best_gt = -1;
    double best_iou = 0.0;
    for (size_t g = 0; g < gt_boxes.size(); ++g) {
      if (gt_taken[g]) continue;
      const double v = iou(detections[d].box, gt_boxes[g]);
      if (v > best_iou) {
        best_iou = v;
        best_gt = static_cast<int>(g);
      }
    }
    if (best_gt >= 0 && best_iou > iou_threshold) {
      flags[d] = true;
      gt_taken[best_gt] = true;
    }
  }
  return flags;
}

double voc_ap_11point(const std::vector<double>& precision, const std::vector<double>& recall) {
  require(precision.size() == recall.size(), "voc_ap_11point: curve length mismatch");
  double sum = 0.0;
  for (int k = 0; k <= 10; ++k) {
    const double t = k / 10.0;
    double best = 0.0;
    for (size_t i = 0; i < recall.size(); ++i)
      if (recall[i] >= t && precision[i] > best) best = precision[i];
    sum += best;
  }
  // Divide once at the end: curves whose best precisions are exact binary
  // fractions (e.g. all 1.0, or all 0.5) then yield an exact quotient.
  return sum / 11.0;
}

double voc_ap_all_points(const std::vector<double>& precision,
                         const std::vector<double>& recall) {
  require(precision.size() == recall.size(), "voc_ap_all_points: curve length mismatch");
  if (recall.empty()) return 0.0;
  // Monotone non-increasing precision envelope, swept right to left.
  std::vector<double> envelope = precision;
  for (size_t i = envelope.size() - 1; i-- > 0;)
    envelope[i] = std::max(envelope[i], envelope[i + 1]);
  double ap = recall.front() * envelope.front();
  for (size_t i = 1; i < recall.size(); ++i) ap += (recall[i] - recall[i - 1]) * envelope[i];
  return ap;
}

EvalReport evaluate(const Dataset& dataset, const std::vector<DetectionRecord>& detections,
                    double iou_threshold, bool all_points_ap) {
  const int num_classes = dataset.num_classes;
  require(num_classes >= 1, "evaluate: dataset has no classes");

  std::map<std::string, int> image_index;
  for (size_t i = 0; i < dataset.images.size(); ++i)
    image_index[dataset.images[i].image_id] = static_cast<int>(i);

  // Detections bucketed per (class, image), preserving file order.
  std::vector<std::vector<std::vector<Detection>>> buckets(
      num_classes, std::vector<std::vector<Detection>>(dataset.images.size()));
  for (const DetectionRecord& r : detections) {
    const auto it = image_index.find(r.image_id);
    require(it != image_index.end(), "evaluate: detection references unknown image " + r.image_id);
    require(r.det.class_id >= 0 && r.det.class_id < num_classes,
            "evaluate: detection class outside dataset classes");
    buckets[r.det.class_id][it->second].push_back(r.det);
  }

  EvalReport report;
  report.per_class.resize(num_classes);
  double ap_sum = 0.0;
  double corloc_sum = 0.0;
  int classes_with_gt = 0;

  for (int c = 0; c < num_classes; ++c) {
    ClassEval& cls = report.per_class[c];
    std::vector<ScoredFlag> flat;

    for (size_t i = 0; i < dataset.images.size(); ++i) {
      std::vector<Box> gt_boxes;
      for (const GtInstance& g : dataset.images[i].gt)
        if (g.class_id == c) gt_boxes.push_back(g.box);
      cls.gt_count += static_cast<int>(gt_boxes.size());

      std::vector<Detection>& dets = buckets[c][i];
      std::stable_sort(dets.begin(), dets.end(),
                       [](const Detection& a, const Detection& b) { return a.score > b.score; });

      // Ground truth is consumed per image, so greedy matching within each
      // image composes to the global greedy sweep.
      const std::vector<bool> flags = match_detections(dets, gt_boxes, iou_threshold);
      for (size_t d = 0; d < dets.size(); ++d)
        flat.push_back(
            {dets[d].score, static_cast<int>(i), static_cast<int>(d), flags[d]});

      if (!gt_boxes.empty()) {
        ++cls.positive_images;
        if (!dets.empty()) {
          // dets is sorted, so the top detection is first; IoU with any
          // ground truth of the class counts (no consumption for CorLoc).
          for (const Box& g : gt_boxes) {
            if (iou(dets.front().box, g) > 0.5) {
              ++cls.corloc_hits;
              break;
            }
          }
        }
      }
    }

    std::sort(flat.begin(), flat.end(), [](const ScoredFlag& a, const ScoredFlag& b) {
      if (a.score != b.score) return a.score > b.score;
      if (a.image_index != b.image_index) return a.image_index < b.image_index;
      return a.rank_in_image < b.rank_in_image;
    });

    std::vector<double> precision, recall;
    int tp = 0, fp = 0;
    for (const ScoredFlag& f : flat) {
      f.tp ? ++tp : ++fp;
      precision.push_back(static_cast<double>(tp) / (tp + fp));
      recall.push_back(cls.gt_count > 0 ? static_cast<double>(tp) / cls.gt_count : 0.0);
    }
    cls.tp = tp;
    cls.fp = fp;
    cls.has_gt = cls.gt_count > 0;
    if (cls.has_gt) {
      cls.ap = all_points_ap ? voc_ap_all_points(precision, recall)
                             : voc_ap_11point(precision, recall);
      cls.corloc = cls.positive_images > 0
                       ? static_cast<double>(cls.corloc_hits) / cls.positive_images
                       : 0.0;
      ap_sum += cls.ap;
      corloc_sum += cls.corloc;
      ++classes_with_gt;
    }
  }

  if (classes_with_gt > 0) {
    report.map = ap_sum / classes_with_gt;
    report.corloc_mean = corloc_sum / classes_with_gt;
  }
  return report;
}

std::string report_to_csv(const EvalReport& report) {
  std::ostringstream out;
  out << "class,gt_count,tp,fp,ap,corloc\n";
  for (size_t c = 0; c < report.per_class.size(); ++c) {
    const ClassEval& cls = report.per_class[c];
    out << (c + 1) << ',' << cls.gt_count << ',' << cls.tp << ',' << cls.fp << ',';
    if (cls.has_gt)
      out << format_fixed(cls.ap) << ',' << format_fixed(cls.corloc) << '\n';
    else
      out << ",\n";
  }
  out << "mean,,,," << format_fixed(report.map) << ',' << format_fixed(report.corloc_mean)
      << '\n';
  return out.str();
}

std::string report_to_table(const EvalReport& report) {
  std::ostringstream out;
  out << "class     gt     tp     fp      ap   corloc\n";
  char buf[96];
  for (size_t c = 0; c < report.per_class.size(); ++c) {
    const ClassEval& cls = report.per_class[c];
    if (cls.has_gt) {
      std::snprintf(buf, sizeof(buf), "%-6zu %5d  %5d  %5d  %6.4f   %6.4f\n", c + 1,
                    cls.gt_count, cls.tp, cls.fp, cls.ap, cls.corloc);
    } else {
      std::snprintf(buf, sizeof(buf), "%-6zu %5d  %5d  %5d       -        -\n", c + 1,
                    cls.gt_count, cls.tp, cls.fp);
    }
    out << buf;
  }
  std::snprintf(buf, sizeof(buf), "mean                         %6.4f   %6.4f\n", report.map,
                report.corloc_mean);
  out << buf;
  return out.str();
}

}  // namespace boicr

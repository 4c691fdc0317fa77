#include "boicr/supervision.hpp"

#include <algorithm>
#include <string>

namespace boicr {

int select_best_instance(const Matrix& scores, int class_index) {
  require(class_index >= 0 && class_index < scores.rows(),
          "select_best_instance: class index " + std::to_string(class_index) +
              " outside table with " + std::to_string(scores.rows()) + " rows");
  require(scores.cols() > 0, "select_best_instance: empty score table");
  int best = 0;
  for (int r = 1; r < scores.cols(); ++r)
    if (scores(class_index, r) > scores(class_index, best)) best = r;
  return best;
}

SupervisionTarget build_supervision(const Matrix& prev_scores,
                                    const std::vector<Box>& proposals,
                                    const std::vector<int>& present_classes, double lambda,
                                    double lambda_ign, bool ignore_enabled) {
  const int num_classes = static_cast<int>(prev_scores.rows());
  const int num_proposals = static_cast<int>(proposals.size());
  require(num_proposals > 0, "build_supervision: no proposals");
  require(prev_scores.cols() == num_proposals,
          "build_supervision: score table has " + std::to_string(prev_scores.cols()) +
              " columns for " + std::to_string(num_proposals) + " proposals");
  require(!present_classes.empty(), "build_supervision: image has no labels");
  require(lambda >= 0.0 && lambda <= 1.0, "build_supervision: lambda outside [0, 1]");
  require(lambda_ign >= 0.0 && lambda_ign <= 1.0,
          "build_supervision: lambda_ign outside [0, 1]");

  std::vector<int> present = present_classes;
  std::sort(present.begin(), present.end());
  present.erase(std::unique(present.begin(), present.end()), present.end());

  SupervisionTarget target;
  target.labels = Eigen::VectorXi::Constant(num_proposals, num_classes);
  target.weights = Vector::Zero(num_proposals);
  target.seed_index.assign(num_classes, -1);
  target.seed_score.assign(num_classes, 0.0);

  for (int c : present) {
    require(c >= 0 && c < num_classes,
            "build_supervision: present class " + std::to_string(c) + " outside table");
    const int seed = select_best_instance(prev_scores, c);
    target.seed_index[c] = seed;
    target.seed_score[c] = prev_scores(c, seed);
  }

  for (int r = 0; r < num_proposals; ++r) {
    // The seed with the highest IoU claims proposal r; ties go to the higher
    // seed score, then to the lower class index.
    int claim_class = -1;
    double claim_iou = -1.0;
    for (int c : present) {
      const double v = iou(proposals[r], proposals[target.seed_index[c]]);
      const bool better =
          v > claim_iou || (v == claim_iou && claim_class >= 0 &&
                            target.seed_score[c] > target.seed_score[claim_class]);
      if (claim_class < 0 || better) {
        claim_class = c;
        claim_iou = v;
      }
    }

    target.weights(r) = target.seed_score[claim_class];
    if (claim_iou >= lambda) {
      target.labels(r) = claim_class;
    } else if (ignore_enabled) {
      target.labels(r) = claim_iou >= lambda_ign ? num_classes : kIgnoreLabel;
    } else {
      target.labels(r) = num_classes;
    }
  }

  // Seeds always carry their own class, whatever band they fell into.
  for (int c : present) {
    target.labels(target.seed_index[c]) = c;
    target.weights(target.seed_index[c]) = target.seed_score[c];
  }
  return target;
}

double weighted_agent_loss(const Matrix& probs, const SupervisionTarget& target) {
  const int num_proposals = static_cast<int>(probs.cols());
  require(target.labels.size() == num_proposals && target.weights.size() == num_proposals,
          "weighted_agent_loss: target size mismatch");
  double total = 0.0;
  for (int r = 0; r < num_proposals; ++r) {
    const int label = target.labels(r);
    if (label == kIgnoreLabel) continue;
    require(label >= 0 && label < probs.rows(), "weighted_agent_loss: label outside table");
    total -= target.weights(r) * safe_log(probs(label, r));
  }
  return total / num_proposals;
}

Matrix weighted_agent_loss_backward(const Matrix& probs, const SupervisionTarget& target) {
  const int num_proposals = static_cast<int>(probs.cols());
  require(target.labels.size() == num_proposals && target.weights.size() == num_proposals,
          "weighted_agent_loss_backward: target size mismatch");
  Matrix grad = Matrix::Zero(probs.rows(), probs.cols());
  for (int r = 0; r < num_proposals; ++r) {
    const int label = target.labels(r);
    if (label == kIgnoreLabel) continue;
    const double p = probs(label, r);
    if (p < kLogFloor) continue;  // clamped loss is constant here
    grad(label, r) = -target.weights(r) / (p * num_proposals);
  }
  return grad;
}

}  // namespace boicr

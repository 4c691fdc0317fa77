#pragma once

#include <vector>

#include "boicr/geometry.hpp"
#include "boicr/nn.hpp"

namespace boicr {

/// Label value for proposals excluded from an agent's loss.
inline constexpr int kIgnoreLabel = -1;

/// Per-proposal training targets mined from the previous stage's score table.
/// Labels use 0-based class indices: 0..C-1 are object classes, C is
/// background, kIgnoreLabel marks proposals excluded from the loss.
struct SupervisionTarget {
  Eigen::VectorXi labels;          // one entry per proposal
  Vector weights;                  // one entry per proposal, in (0, 1]
  std::vector<int> seed_index;     // per class; -1 when the class is absent
  std::vector<double> seed_score;  // per class; 0 when the class is absent
};

/// Index of the top-scoring proposal for `class_index` (a row of `scores`).
/// Ties are broken by the lowest proposal index.
int select_best_instance(const Matrix& scores, int class_index);

/// Mines per-proposal labels and weights from the previous stage's class
/// scores (C x R, class rows only — no background row).
///
/// For each present class the top proposal becomes that class's seed. Every
/// proposal is then claimed by the seed it overlaps most (ties: higher seed
/// score, then lower class index) and banded by that IoU v:
///
///   v >= lambda                          -> the seed's class
///   v >= lambda_ign   (if ignoring)      -> background
///   otherwise         (if ignoring)      -> ignored
///   v <  lambda       (if not ignoring)  -> background
///
/// The proposal's weight is the claiming seed's score; when every seed has
/// IoU 0 with the proposal, the strongest seed claims it. Finally each seed
/// is forced to its own class regardless of the thresholds.
SupervisionTarget build_supervision(const Matrix& prev_scores,
                                    const std::vector<Box>& proposals,
                                    const std::vector<int>& present_classes, double lambda,
                                    double lambda_ign, bool ignore_enabled);

/// Weighted cross-entropy over non-ignored proposals, averaged over the total
/// proposal count R:
///
///   L = -(1/R) * sum_{r not ignored} w_r * log p[label_r][r]
///
/// `probs` is (C+1) x R column-stochastic (row C = background).
double weighted_agent_loss(const Matrix& probs, const SupervisionTarget& target);

/// dL/dprobs for weighted_agent_loss. Entries whose probability sits below
/// the log floor get zero gradient (the clamped loss is flat there).
Matrix weighted_agent_loss_backward(const Matrix& probs, const SupervisionTarget& target);

}  // namespace boicr

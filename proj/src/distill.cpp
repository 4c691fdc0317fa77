#include "boicr/distill.hpp"

#include <string>

namespace boicr {

Matrix average_agent_scores(const std::vector<Matrix>& agent_tables) {
  require(!agent_tables.empty(), "average_agent_scores: no agent tables");
  Matrix mean = agent_tables.front();
  for (size_t k = 1; k < agent_tables.size(); ++k) {
    require(agent_tables[k].rows() == mean.rows() && agent_tables[k].cols() == mean.cols(),
            "average_agent_scores: table " + std::to_string(k) + " shape mismatch");
    mean += agent_tables[k];
  }
  return mean / static_cast<double>(agent_tables.size());
}

SupervisionTarget distillation_supervision(const Matrix& averaged_scores,
                                           const std::vector<Box>& proposals,
                                           const std::vector<int>& present_classes,
                                           double lambda, double lambda_ign,
                                           bool ignore_enabled) {
  require(averaged_scores.rows() >= 2,
          "distillation_supervision: table needs class rows plus a background row");
  const Matrix class_rows = averaged_scores.topRows(averaged_scores.rows() - 1);
  return build_supervision(class_rows, proposals, present_classes, lambda, lambda_ign,
                           ignore_enabled);
}

}  // namespace boicr

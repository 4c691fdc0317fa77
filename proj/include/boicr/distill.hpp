#pragma once

#include <vector>

#include "boicr/supervision.hpp"

namespace boicr {

/// Element-wise mean of the K agent score tables (all (C+1) x R). The result
/// stays column-stochastic because averaging preserves column sums.
Matrix average_agent_scores(const std::vector<Matrix>& agent_tables);

/// Supervision for the distillation head: the averaged table replaces a
/// single previous agent, its background row is dropped for seeding, and the
/// usual mining rules apply.
SupervisionTarget distillation_supervision(const Matrix& averaged_scores,
                                           const std::vector<Box>& proposals,
                                           const std::vector<int>& present_classes,
                                           double lambda, double lambda_ign,
                                           bool ignore_enabled);

}  // namespace boicr

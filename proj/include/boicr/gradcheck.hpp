#pragma once

#include <string>

#include "boicr/model.hpp"

namespace boicr {

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::string worst_param;
  int worst_row = 0;
  int worst_col = 0;
  double analytic = 0.0;
  double numeric = 0.0;
};

/// Compares analytic gradients of the total loss against central finite
/// differences, parameter by parameter.
///
/// Supervision is mined once at the evaluation point and then frozen for
/// every probe: the training loss treats mined labels and weights as
/// constants, so the function being differentiated must hold them fixed too
/// (and freezing also keeps probes away from mining decision boundaries).
///
/// Relative error per element: |a - n| / max(1e-8, |a| + |n|). Elements where
/// both sides are below 1e-8 count as agreement: finite differences cannot
/// resolve anything there (for a structurally gradient-free direction like
/// the detection stream's bias, a shift-invariant axis of its row softmax,
/// the probes return pure floating-point roundoff).
GradCheckResult grad_check(Model& model, const Matrix& raw_features,
                           const std::vector<Box>& proposals,
                           const std::vector<int>& present_classes,
                           const SupervisionSettings& settings, double epsilon = 1e-5);

}  // namespace boicr

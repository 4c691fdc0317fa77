#include "boicr/gradcheck.hpp"

#include <algorithm>
#include <cmath>

namespace boicr {

GradCheckResult grad_check(Model& model, const Matrix& raw_features,
                           const std::vector<Box>& proposals,
                           const std::vector<int>& present_classes,
                           const SupervisionSettings& settings, double epsilon) {
  require(epsilon > 0.0, "grad_check: epsilon must be positive");

  // Mine supervision once, then freeze it for the analytic pass and every
  // finite-difference probe.
  const ForwardResult mined =
      model_forward(model, raw_features, proposals, present_classes, settings);
  FrozenSupervision frozen;
  frozen.agent_targets = mined.agent_targets;
  if (model.config.distillation) frozen.distill_target = mined.distill_target;

  model.zero_grads();
  model_backward(model, raw_features, mined, 1.0);

  const auto loss_at = [&]() {
    return model_forward(model, raw_features, proposals, present_classes, settings, &frozen)
        .loss_total;
  };

  GradCheckResult result;
  for (ParamTensor* p : model.params()) {
    for (Eigen::Index i = 0; i < p->value.rows(); ++i) {
      for (Eigen::Index j = 0; j < p->value.cols(); ++j) {
        const double saved = p->value(i, j);
        p->value(i, j) = saved + epsilon;
        const double loss_plus = loss_at();
        p->value(i, j) = saved - epsilon;
        const double loss_minus = loss_at();
        p->value(i, j) = saved;

        const double numeric = (loss_plus - loss_minus) / (2.0 * epsilon);
        const double analytic = p->grad(i, j);
        // Below 1e-8 both sides are in the noise regime and count as
        // agreement: central differences only measure their own roundoff
        // there. The detection stream's bias is the permanent example — a
        // constant shift inside its row softmax cancels, so its true
        // gradient is exactly zero while the probes return ~1e-11 of noise.
        if (std::abs(analytic) < 1e-8 && std::abs(numeric) < 1e-8) continue;
        const double rel = std::abs(analytic - numeric) /
                           std::max(1e-8, std::abs(analytic) + std::abs(numeric));
        if (rel > result.max_rel_error) {
          result.max_rel_error = rel;
          result.worst_param = p->name;
          result.worst_row = static_cast<int>(i);
          result.worst_col = static_cast<int>(j);
          result.analytic = analytic;
          result.numeric = numeric;
        }
      }
    }
  }
  return result;
}

}  // namespace boicr

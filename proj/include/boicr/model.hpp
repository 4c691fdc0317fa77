#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "boicr/distill.hpp"
#include "boicr/geometry.hpp"
#include "boicr/midn.hpp"
#include "boicr/supervision.hpp"

namespace boicr {

struct ModelConfig {
  int num_classes = 5;
  int raw_dim = 32;
  int trunk_dim = 64;
  int num_agents = 3;
  bool distillation = false;
  double head_init_stddev = 0.01;  // scoring heads start near-uniform
};

/// The full detector: shared trunk, two-stream selector, a cascade of
/// (C+1)-way refinement agents, and an optional distillation head with the
/// same architecture as an agent.
struct Model {
  ModelConfig config;
  TrunkParams trunk;
  MidnHeads midn;
  std::vector<Affine> agents;
  std::optional<Affine> distill_head;

  static Model init(const ModelConfig& config, uint64_t seed);

  std::vector<ParamTensor*> params();
  std::vector<const ParamTensor*> params() const;
  void zero_grads();
};

/// Thresholds in force at the current optimizer step.
struct SupervisionSettings {
  double lambda = 0.5;
  double lambda_ign = 0.0;
  bool ignore_enabled = false;
};

/// Pre-computed targets that replace online mining, used by the gradient
/// checker to keep the loss differentiable at the evaluation point.
struct FrozenSupervision {
  std::vector<SupervisionTarget> agent_targets;
  std::optional<SupervisionTarget> distill_target;
};

/// Everything one training forward pass produces: activations for backward,
/// mined targets, and each loss term. Score tables are (C+1) x R
/// column-stochastic except the fused selector table (C x R).
struct ForwardResult {
  std::vector<int> present_classes;
  TrunkCache trunk_cache;
  MidnOutput midn_out;
  std::vector<Matrix> agent_probs;
  std::vector<SupervisionTarget> agent_targets;
  Matrix distill_probs;  // empty when distillation is off
  SupervisionTarget distill_target;
  double loss_class = 0.0;
  std::vector<double> loss_agents;
  double loss_distill = 0.0;
  double loss_total = 0.0;
};

/// Runs the full pipeline on one image. Supervision for agent 1 comes from
/// the fused selector table, for agent k from agent k-1, and for the
/// distillation head from the agents' average; mined targets are constants
/// with respect to gradients. `frozen` (when given) bypasses mining.
ForwardResult model_forward(const Model& model, const Matrix& raw_features,
                            const std::vector<Box>& proposals,
                            const std::vector<int>& present_classes,
                            const SupervisionSettings& settings,
                            const FrozenSupervision* frozen = nullptr);

/// Accumulates dL/dparam for `scale` * loss_total into every parameter's
/// grad buffer.
void model_backward(Model& model, const Matrix& raw_features, const ForwardResult& result,
                    double scale);

/// Which heads inference averages.
enum class HeadMode { kAgentsOnly, kAgentsPlusDistill };

/// Per-proposal class scores for inference: mean over the selected heads of
/// their column-softmax tables, background row dropped (C x R). Asking for
/// the distillation head on a model trained without one quietly falls back
/// to agents only.
Matrix model_score(const Model& model, const Matrix& raw_features, HeadMode heads);

}  // namespace boicr

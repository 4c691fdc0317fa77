#include "boicr/model.hpp"

#include <string>

namespace boicr {

Model Model::init(const ModelConfig& config, uint64_t seed) {
  require(config.num_classes >= 1, "model: num_classes must be >= 1");
  require(config.raw_dim >= 1 && config.trunk_dim >= 1, "model: dimensions must be >= 1");
  require(config.num_agents >= 0, "model: agent count cannot be negative");
  require(config.num_agents >= 1 || !config.distillation,
          "model: distillation needs at least one agent to average");
  Model model;
  model.config = config;
  Rng rng(seed);
  model.trunk = TrunkParams::init(config.raw_dim, config.trunk_dim, rng);
  model.midn = MidnHeads::init(config.trunk_dim, config.num_classes, config.head_init_stddev,
                               rng);
  model.agents.reserve(config.num_agents);
  for (int k = 0; k < config.num_agents; ++k)
    model.agents.push_back(Affine::init_gaussian("agent" + std::to_string(k + 1),
                                                 config.trunk_dim, config.num_classes + 1,
                                                 config.head_init_stddev, rng));
  if (config.distillation)
    model.distill_head = Affine::init_gaussian("distill", config.trunk_dim,
                                               config.num_classes + 1,
                                               config.head_init_stddev, rng);
  return model;
}

std::vector<ParamTensor*> Model::params() {
  std::vector<ParamTensor*> out;
  trunk.collect_params(out);
  midn.collect_params(out);
  for (Affine& agent : agents) agent.collect_params(out);
  if (distill_head) distill_head->collect_params(out);
  return out;
}

std::vector<const ParamTensor*> Model::params() const {
  std::vector<const ParamTensor*> out;
  for (ParamTensor* p : const_cast<Model*>(this)->params()) out.push_back(p);
  return out;
}

void Model::zero_grads() {
  for (ParamTensor* p : params()) p->grad.setZero();
}

ForwardResult model_forward(const Model& model, const Matrix& raw_features,
                            const std::vector<Box>& proposals,
                            const std::vector<int>& present_classes,
                            const SupervisionSettings& settings,
                            const FrozenSupervision* frozen) {
  const int num_classes = model.config.num_classes;
  require(raw_features.cols() == model.config.raw_dim,
          "model_forward: raw feature width mismatch");
  require(static_cast<int>(proposals.size()) == raw_features.rows(),
          "model_forward: proposal/feature count mismatch");
  if (frozen)
    require(static_cast<int>(frozen->agent_targets.size()) == model.config.num_agents &&
                frozen->distill_target.has_value() == model.config.distillation,
            "model_forward: frozen supervision does not match the model layout");

  ForwardResult result;
  result.present_classes = present_classes;
  result.trunk_cache = trunk_forward(model.trunk, raw_features);
  const Matrix& features = result.trunk_cache.features;

  result.midn_out = midn_forward(model.midn, features);
  result.loss_class = classification_loss(result.midn_out.phi, present_classes);

  result.agent_probs.reserve(model.agents.size());
  for (size_t k = 0; k < model.agents.size(); ++k) {
    const Matrix logits = model.agents[k].forward(features).transpose();
    result.agent_probs.push_back(softmax_over_classes(logits));
    const SupervisionTarget target =
        frozen ? frozen->agent_targets[k]
               : build_supervision(k == 0 ? result.midn_out.fused
                                          : Matrix(result.agent_probs[k - 1].topRows(num_classes)),
                                   proposals, present_classes, settings.lambda,
                                   settings.lambda_ign, settings.ignore_enabled);
    result.agent_targets.push_back(target);
    result.loss_agents.push_back(weighted_agent_loss(result.agent_probs[k], target));
  }

  if (model.config.distillation) {
    require(model.distill_head.has_value(), "model_forward: distillation head missing");
    const Matrix logits = model.distill_head->forward(features).transpose();
    result.distill_probs = softmax_over_classes(logits);
    result.distill_target =
        frozen ? *frozen->distill_target
               : distillation_supervision(average_agent_scores(result.agent_probs), proposals,
                                          present_classes, settings.lambda,
                                          settings.lambda_ign, settings.ignore_enabled);
    result.loss_distill = weighted_agent_loss(result.distill_probs, result.distill_target);
  }

  result.loss_total = result.loss_class + result.loss_distill;
  for (double l : result.loss_agents) result.loss_total += l;
  return result;
}

void model_backward(Model& model, const Matrix& raw_features, const ForwardResult& result,
                    double scale) {
  const Matrix& features = result.trunk_cache.features;
  Matrix d_features = Matrix::Zero(features.rows(), features.cols());

  // Image-classification term: phi is the row sums of the fused table, so
  // d(fused) broadcasts each class's dphi across that row.
  const Vector dphi =
      scale * classification_loss_backward(result.midn_out.phi, result.present_classes);
  const Matrix d_fused = dphi.replicate(1, result.midn_out.fused.cols());
  d_features += midn_backward(model.midn, features, result.midn_out, d_fused);

  // Agent terms. Mined targets are constants, so nothing flows back through
  // the previous agent's table — only through each agent's own softmax.
  for (size_t k = 0; k < model.agents.size(); ++k) {
    const Matrix d_probs =
        scale * weighted_agent_loss_backward(result.agent_probs[k], result.agent_targets[k]);
    const Matrix d_logits = softmax_over_classes_backward(result.agent_probs[k], d_probs);
    d_features += model.agents[k].backward(features, d_logits.transpose());
  }

  if (model.config.distillation) {
    const Matrix d_probs =
        scale * weighted_agent_loss_backward(result.distill_probs, result.distill_target);
    const Matrix d_logits = softmax_over_classes_backward(result.distill_probs, d_probs);
    d_features += model.distill_head->backward(features, d_logits.transpose());
  }

  trunk_backward(model.trunk, raw_features, result.trunk_cache, d_features);
}

Matrix model_score(const Model& model, const Matrix& raw_features, HeadMode heads) {
  require(raw_features.cols() == model.config.raw_dim, "model_score: feature width mismatch");
  const TrunkCache cache = trunk_forward(model.trunk, raw_features);
  Matrix sum = Matrix::Zero(model.config.num_classes + 1, raw_features.rows());
  int count = 0;
  for (const Affine& agent : model.agents) {
    sum += softmax_over_classes(agent.forward(cache.features).transpose());
    ++count;
  }
  if (heads == HeadMode::kAgentsPlusDistill && model.distill_head) {
    sum += softmax_over_classes(model.distill_head->forward(cache.features).transpose());
    ++count;
  }
  require(count > 0, "model_score: no scoring heads available");
  return (sum / count).topRows(model.config.num_classes);
}

}  // namespace boicr

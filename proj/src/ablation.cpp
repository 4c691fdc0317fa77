#include "boicr/ablation.hpp"

#include <algorithm>
#include <cstdio>
#include <ostream>
#include <sstream>

namespace boicr {

std::vector<AblationArm> standard_arms() {
  return {
      {1, "K=3 fixed lambda=0.5", 3, false, false, false},
      {2, "K=3 adaptive", 3, true, false, false},
      {3, "K=3 adaptive+ignore", 3, true, true, false},
      {4, "K=3 adaptive+ignore+distill", 3, true, true, true},
      {5, "K=4 adaptive+ignore", 4, true, true, false},
  };
}

double median(std::vector<double> values) {
  require(!values.empty(), "median: no values");
  std::sort(values.begin(), values.end());
  const size_t mid = values.size() / 2;
  return values.size() % 2 == 1 ? values[mid] : 0.5 * (values[mid - 1] + values[mid]);
}

std::vector<ArmOutcome> run_ablation(const Dataset& train_set, const Dataset& test_set,
                                     const AblationConfig& config, std::ostream* progress) {
  require(!config.seeds.empty(), "run_ablation: need at least one seed");
  std::vector<ArmOutcome> outcomes;
  for (const AblationArm& arm : standard_arms()) {
    if (!config.arm_ids.empty() &&
        std::find(config.arm_ids.begin(), config.arm_ids.end(), arm.id) == config.arm_ids.end())
      continue;
    ArmOutcome outcome;
    outcome.arm = arm;
    for (uint64_t seed : config.seeds) {
      TrainConfig train_config = config.base;
      train_config.model.num_agents = arm.num_agents;
      train_config.model.distillation = arm.distillation;
      train_config.adaptive_lambda = arm.adaptive_lambda;
      train_config.ignore_enabled = arm.ignore_enabled;
      train_config.rng_seed = seed;

      const TrainResult trained = train(train_set, train_config);
      const std::vector<DetectionRecord> detections = infer_dataset(
          trained.model, test_set, HeadMode::kAgentsPlusDistill, config.nms_threshold);
      const EvalReport report = evaluate(test_set, detections);
      outcome.map_per_seed.push_back(100.0 * report.map);
      outcome.corloc_per_seed.push_back(100.0 * report.corloc_mean);
      if (progress)
        *progress << "arm " << arm.id << " seed " << seed << ": mAP "
                  << outcome.map_per_seed.back() << " CorLoc "
                  << outcome.corloc_per_seed.back() << std::endl;
    }
    outcome.median_map = median(outcome.map_per_seed);
    outcome.median_corloc = median(outcome.corloc_per_seed);
    outcomes.push_back(std::move(outcome));
  }
  return outcomes;
}

std::string ablation_table(const std::vector<ArmOutcome>& outcomes) {
  std::ostringstream out;
  out << "ID  K  lambda     ignore  distill  mAP     CorLoc\n";
  char buf[128];
  for (const ArmOutcome& o : outcomes) {
    std::snprintf(buf, sizeof(buf), "%-3d %-2d %-10s %-7s %-8s %-7.2f %-7.2f\n", o.arm.id,
                  o.arm.num_agents, o.arm.adaptive_lambda ? "adaptive" : "fixed 0.5",
                  o.arm.ignore_enabled ? "yes" : "no", o.arm.distillation ? "yes" : "no",
                  o.median_map, o.median_corloc);
    out << buf;
  }
  return out.str();
}

}  // namespace boicr

#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "boicr/eval.hpp"
#include "boicr/trainer.hpp"

namespace boicr {

/// One configuration row of the supervision-strategy comparison.
struct AblationArm {
  int id = 0;
  std::string label;
  int num_agents = 3;
  bool adaptive_lambda = false;
  bool ignore_enabled = false;
  bool distillation = false;
};

/// The five standard arms: fixed threshold baseline; adaptive threshold
/// alone; adaptive + ignore band; adaptive + ignore + distillation; and the
/// four-agent variant of adaptive + ignore.
std::vector<AblationArm> standard_arms();

struct ArmOutcome {
  AblationArm arm;
  std::vector<double> map_per_seed;
  std::vector<double> corloc_per_seed;
  double median_map = 0.0;
  double median_corloc = 0.0;
};

struct AblationConfig {
  TrainConfig base;  // per-arm fields (K, schedule mode, ignore, distill, seed) get overridden
  std::vector<uint64_t> seeds = {1, 2, 3, 4, 5};
  double nms_threshold = 0.3;
  std::vector<int> arm_ids;  // empty = run every standard arm
};

double median(std::vector<double> values);

/// Trains every arm with the same seed set on the same split and evaluates
/// on the held-out split (metrics in percent). Arms that trained a
/// distillation head include it at inference. `progress` (optional) receives
/// one line per finished run.
std::vector<ArmOutcome> run_ablation(const Dataset& train_set, const Dataset& test_set,
                                     const AblationConfig& config,
                                     std::ostream* progress = nullptr);

/// Aligned comparison table, one row per arm with median metrics.
std::string ablation_table(const std::vector<ArmOutcome>& outcomes);

}  // namespace boicr

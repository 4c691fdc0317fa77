#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "boicr/dataset.hpp"
#include "boicr/model.hpp"
#include "boicr/schedule.hpp"

namespace boicr {

/// Learning rate in force from `from_step` onward.
struct LrStage {
  int from_step = 0;
  double lr = 0.01;
};

struct TrainConfig {
  ModelConfig model;
  int total_steps = 2000;
  int batch_size = 2;
  std::vector<LrStage> lr_schedule = {{0, 0.01}, {1200, 0.001}};
  double momentum = 0.9;
  double weight_decay = 5e-4;
  bool adaptive_lambda = true;
  double fixed_lambda = 0.5;   // used when adaptive_lambda is false
  double growth_base = 100.0;  // l_b of the adaptive threshold curve
  double lambda_max = 0.51;
  bool ignore_enabled = true;
  uint64_t rng_seed = 42;
};

/// One optimizer step's record; loss terms are batch means.
struct StepLog {
  int step = 0;
  double lambda = 0.0;
  double lambda_ign = 0.0;
  double lr = 0.0;
  double loss_class = 0.0;
  std::vector<double> loss_agents;
  double loss_distill = 0.0;
  double loss_total = 0.0;
};

struct TrainResult {
  Model model;
  std::vector<StepLog> log;
};

/// Builds the threshold schedule a config describes.
AggregationSchedule make_schedule(const TrainConfig& config);

/// Learning rate for a step under a stage list (latest stage whose
/// `from_step` is <= step wins).
double lr_at(const std::vector<LrStage>& stages, int step);

/// Runs `total_steps` SGD updates over reshuffled batches. Each step mines
/// supervision with the thresholds for that step index, averages per-image
/// losses over the batch, and applies momentum SGD with weight decay.
/// Deterministic for a given config; aborts naming the step and term if any
/// loss turns non-finite.
TrainResult train(const Dataset& train_set, const TrainConfig& config);

/// CSV with one row per step: step, thresholds, lr, then each loss term.
std::string loss_log_to_csv(const std::vector<StepLog>& log, int num_agents);

/// Scores one image with the selected heads and applies per-class NMS.
/// Returns all surviving (proposal, class) detections sorted by descending
/// score.
std::vector<Detection> infer(const Model& model, const ImageSample& sample, HeadMode heads,
                             double nms_threshold);

/// Runs infer over a whole split, tagging detections with image ids.
std::vector<DetectionRecord> infer_dataset(const Model& model, const Dataset& dataset,
                                           HeadMode heads, double nms_threshold);

/// Versioned text container holding the config, the step counter, and every
/// parameter in hex-float (exact round-trip).
void save_checkpoint(const std::string& path, const Model& model, int step);

struct LoadedCheckpoint {
  Model model;
  int step = 0;
};

LoadedCheckpoint load_checkpoint(const std::string& path);

}  // namespace boicr

#include "boicr/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace boicr {
namespace {

using ordered_json = nlohmann::ordered_json;

constexpr uint64_t kModelStream = 0x6d6f64656c;    // "model"
constexpr uint64_t kShuffleStream = 0x7368756666;  // "shuff"

constexpr const char* kCheckpointMagic = "boicr-checkpoint v1";

std::string format_full(double value) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", value);
  return buf;
}

std::string format_hex(double value) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%a", value);
  return buf;
}

void validate_train_inputs(const Dataset& train_set, const TrainConfig& config) {
  require(!train_set.images.empty(), "train: dataset is empty");
  require(train_set.num_classes == config.model.num_classes,
          "train: dataset classes differ from model classes");
  require(train_set.feature_dim == config.model.raw_dim,
          "train: dataset feature width differs from model raw_dim");
  require(config.total_steps >= 0, "train: total_steps cannot be negative");
  require(config.batch_size >= 1, "train: batch_size must be >= 1");
  require(!config.lr_schedule.empty(), "train: lr schedule is empty");
  for (size_t i = 1; i < config.lr_schedule.size(); ++i)
    require(config.lr_schedule[i - 1].from_step < config.lr_schedule[i].from_step,
            "train: lr schedule thresholds must strictly increase");
  require(config.lr_schedule.front().from_step == 0, "train: lr schedule must start at step 0");
  for (const ImageSample& sample : train_set.images) {
    require(!sample.labels.empty(), "train: image " + sample.image_id + " has no labels");
    require(!sample.proposals.empty(), "train: image " + sample.image_id + " has no proposals");
  }
}

void check_finite_losses(const ForwardResult& fwd, int step) {
  const auto fail = [step](const std::string& term) {
    require(false,
            "train: non-finite " + term + " at step " + std::to_string(step));
  };
  if (!std::isfinite(fwd.loss_class)) fail("L_class");
  for (size_t k = 0; k < fwd.loss_agents.size(); ++k)
    if (!std::isfinite(fwd.loss_agents[k])) fail("L_agent_" + std::to_string(k + 1));
  if (!std::isfinite(fwd.loss_distill)) fail("L_distill");
  if (!std::isfinite(fwd.loss_total)) fail("L_total");
}

// Fisher-Yates with our own RNG: std::shuffle's draw sequence is
// implementation-defined, which would break cross-platform determinism.
void shuffle_indices(std::vector<int>& indices, Rng& rng) {
  for (int i = static_cast<int>(indices.size()) - 1; i > 0; --i)
    std::swap(indices[i], indices[rng.uniform_int(0, i)]);
}

ordered_json model_config_to_json(const ModelConfig& config) {
  ordered_json j;
  j["num_classes"] = config.num_classes;
  j["raw_dim"] = config.raw_dim;
  j["trunk_dim"] = config.trunk_dim;
  j["num_agents"] = config.num_agents;
  j["distillation"] = config.distillation;
  j["head_init_stddev"] = config.head_init_stddev;
  return j;
}

ModelConfig model_config_from_json(const ordered_json& j) {
  ModelConfig config;
  config.num_classes = j.at("num_classes").get<int>();
  config.raw_dim = j.at("raw_dim").get<int>();
  config.trunk_dim = j.at("trunk_dim").get<int>();
  config.num_agents = j.at("num_agents").get<int>();
  config.distillation = j.at("distillation").get<bool>();
  config.head_init_stddev = j.at("head_init_stddev").get<double>();
  return config;
}

}  // namespace

AggregationSchedule make_schedule(const TrainConfig& config) {
  // The schedule domain must cover every training step, so a zero-step run
  // still builds a valid (if unused) schedule over one step.
  const int steps = std::max(config.total_steps, 1);
  return config.adaptive_lambda
             ? AggregationSchedule::adaptive(steps, config.growth_base, config.lambda_max)
             : AggregationSchedule::fixed(config.fixed_lambda, steps, config.lambda_max);
}

double lr_at(const std::vector<LrStage>& stages, int step) {
  require(!stages.empty() && stages.front().from_step <= step,
          "lr_at: no stage covers step " + std::to_string(step));
  double lr = stages.front().lr;
  for (const LrStage& stage : stages)
    if (stage.from_step <= step) lr = stage.lr;
  return lr;
}

TrainResult train(const Dataset& train_set, const TrainConfig& config) {
  validate_train_inputs(train_set, config);
  const AggregationSchedule schedule = make_schedule(config);

  TrainResult result;
  result.model = Model::init(config.model, mix_seed(config.rng_seed, kModelStream));
  std::vector<ParamTensor*> params = result.model.params();

  Rng order_rng(mix_seed(config.rng_seed, kShuffleStream));
  std::vector<int> order(train_set.images.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
  size_t cursor = order.size();  // forces a shuffle before the first batch

  const double inv_batch = 1.0 / config.batch_size;
  for (int step = 0; step < config.total_steps; ++step) {
    SupervisionSettings settings;
    settings.lambda = schedule.lambda_at(step);
    settings.lambda_ign = schedule.lambda_ign_at(step);
    settings.ignore_enabled = config.ignore_enabled;
    const double lr = lr_at(config.lr_schedule, step);

    StepLog entry;
    entry.step = step;
    entry.lambda = settings.lambda;
    entry.lambda_ign = settings.lambda_ign;
    entry.lr = lr;
    entry.loss_agents.assign(config.model.num_agents, 0.0);

    for (int b = 0; b < config.batch_size; ++b) {
      if (cursor + 1 > order.size()) {  // epoch exhausted (remainder dropped)
        shuffle_indices(order, order_rng);
        cursor = 0;
      }
      const ImageSample& sample = train_set.images[order[cursor++]];
      const ForwardResult fwd = model_forward(result.model, sample.features, sample.proposals,
                                              sample.labels, settings);
      check_finite_losses(fwd, step);
      model_backward(result.model, sample.features, fwd, inv_batch);

      entry.loss_class += fwd.loss_class * inv_batch;
      for (int k = 0; k < config.model.num_agents; ++k)
        entry.loss_agents[k] += fwd.loss_agents[k] * inv_batch;
      entry.loss_distill += fwd.loss_distill * inv_batch;
      entry.loss_total += fwd.loss_total * inv_batch;
    }

    sgd_step(params, lr, config.momentum, config.weight_decay);
    result.log.push_back(std::move(entry));
  }
  return result;
}

std::string loss_log_to_csv(const std::vector<StepLog>& log, int num_agents) {
  std::ostringstream out;
  out << "step,lambda,lambda_ign,lr,L_class";
  for (int k = 1; k <= num_agents; ++k) out << ",L_agent_" << k;
  out << ",L_distill,L_total\n";
  for (const StepLog& entry : log) {
    out << entry.step << ',' << format_full(entry.lambda) << ','
        << format_full(entry.lambda_ign) << ',' << format_full(entry.lr) << ','
        << format_full(entry.loss_class);
    for (double l : entry.loss_agents) out << ',' << format_full(l);
    out << ',' << format_full(entry.loss_distill) << ',' << format_full(entry.loss_total)
        << '\n';
  }
  return out.str();
}

std::vector<Detection> infer(const Model& model, const ImageSample& sample, HeadMode heads,
                             double nms_threshold) {
  require(static_cast<Eigen::Index>(sample.proposals.size()) == sample.features.rows(),
          "infer: proposal/feature count mismatch in " + sample.image_id);
  const Matrix scores = model_score(model, sample.features, heads);
  std::vector<Detection> candidates;
  candidates.reserve(scores.size());
  for (int c = 0; c < scores.rows(); ++c)
    for (int r = 0; r < scores.cols(); ++r)
      candidates.push_back(Detection{sample.proposals[r], c, scores(c, r)});
  const std::vector<int> kept = nms(candidates, nms_threshold);
  std::vector<Detection> result;
  result.reserve(kept.size());
  for (int idx : kept) result.push_back(candidates[idx]);
  return result;  // nms emits keepers in descending score order
}

std::vector<DetectionRecord> infer_dataset(const Model& model, const Dataset& dataset,
                                           HeadMode heads, double nms_threshold) {
  std::vector<DetectionRecord> records;
  for (const ImageSample& sample : dataset.images)
    for (const Detection& det : infer(model, sample, heads, nms_threshold))
      records.push_back(DetectionRecord{sample.image_id, det});
  return records;
}

void save_checkpoint(const std::string& path, const Model& model, int step) {
  std::ofstream file(path, std::ios::binary);
  require(file.good(), "save_checkpoint: cannot open " + path);
  const std::vector<const ParamTensor*> params = model.params();

  file << kCheckpointMagic << '\n';
  file << "config " << model_config_to_json(model.config).dump() << '\n';
  file << "step " << step << '\n';
  file << "params " << params.size() << '\n';
  for (const ParamTensor* p : params) {
    file << "param " << p->name << ' ' << p->value.rows() << ' ' << p->value.cols() << '\n';
    for (Eigen::Index i = 0; i < p->value.rows(); ++i) {
      for (Eigen::Index j = 0; j < p->value.cols(); ++j) {
        if (j > 0) file << ' ';
        file << format_hex(p->value(i, j));
      }
      file << '\n';
    }
  }
  require(file.good(), "save_checkpoint: write failed for " + path);
}

LoadedCheckpoint load_checkpoint(const std::string& path) {
  std::ifstream file(path, std::ios::binary);
  require(file.good(), "load_checkpoint: cannot open " + path);
  std::string line;

  require(static_cast<bool>(std::getline(file, line)) && line == kCheckpointMagic,
          "load_checkpoint: bad magic line in " + path);

  require(static_cast<bool>(std::getline(file, line)) && line.rfind("config ", 0) == 0,
          "load_checkpoint: missing config line");
  ModelConfig config;
  try {
    config = model_config_from_json(ordered_json::parse(line.substr(7)));
  } catch (const std::exception& e) {
    require(false, std::string("load_checkpoint: invalid config: ") + e.what());
  }

  LoadedCheckpoint loaded;
  require(static_cast<bool>(std::getline(file, line)) && line.rfind("step ", 0) == 0,
          "load_checkpoint: missing step line");
  loaded.step = std::stoi(line.substr(5));

  require(static_cast<bool>(std::getline(file, line)) && line.rfind("params ", 0) == 0,
          "load_checkpoint: missing params line");
  const size_t declared = std::stoul(line.substr(7));

  loaded.model = Model::init(config, 0);
  const std::vector<ParamTensor*> params = loaded.model.params();
  require(params.size() == declared,
          "load_checkpoint: parameter count mismatch (file " + std::to_string(declared) +
              ", model " + std::to_string(params.size()) + ")");

  for (ParamTensor* p : params) {
    require(static_cast<bool>(std::getline(file, line)) && line.rfind("param ", 0) == 0,
            "load_checkpoint: missing block for " + p->name);
    std::istringstream header(line.substr(6));
    std::string name;
    Eigen::Index rows = 0, cols = 0;
    header >> name >> rows >> cols;
    require(name == p->name, "load_checkpoint: expected block " + p->name + ", found " + name);
    require(rows == p->value.rows() && cols == p->value.cols(),
            "load_checkpoint: shape mismatch for " + p->name);
    for (Eigen::Index i = 0; i < rows; ++i) {
      require(static_cast<bool>(std::getline(file, line)),
              "load_checkpoint: truncated block " + p->name);
      std::istringstream row(line);
      std::string token;
      for (Eigen::Index j = 0; j < cols; ++j) {
        require(static_cast<bool>(row >> token), "load_checkpoint: short row in " + p->name);
        p->value(i, j) = std::strtod(token.c_str(), nullptr);
      }
    }
  }
  return loaded;
}

}  // namespace boicr

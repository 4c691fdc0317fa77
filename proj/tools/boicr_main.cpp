#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "boicr/ablation.hpp"
#include "boicr/dataset.hpp"
#include "boicr/eval.hpp"
#include "boicr/schedule.hpp"
#include "boicr/trainer.hpp"
#include "boicr/version.hpp"

namespace fs = std::filesystem;
using boicr::require;
using ordered_json = nlohmann::ordered_json;

namespace {

// BOICR_OUT_DIR, when set, overrides any --out flag so whole pipelines can be
// redirected without touching their invocations.
std::string resolve_out_dir(const std::string& flag_value) {
  if (const char* env = std::getenv("BOICR_OUT_DIR"); env != nullptr && *env != '\0')
    return env;
  return flag_value;
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream file(path, std::ios::binary);
  require(file.good(), "cannot open " + path.string() + " for writing");
  file << content;
  require(file.good(), "write failed for " + path.string());
}

void write_manifest(const fs::path& dir, const std::string& command, uint64_t seed,
                    uint64_t dataset_fingerprint, const ordered_json& config,
                    const std::vector<std::string>& artifacts) {
  ordered_json manifest;
  manifest["tool"] = boicr::kToolName;
  manifest["version"] = boicr::kVersion;
  manifest["command"] = command;
  manifest["seed"] = seed;
  char fp[32];
  std::snprintf(fp, sizeof(fp), "%016llx", static_cast<unsigned long long>(dataset_fingerprint));
  manifest["dataset_fingerprint"] = fp;
  manifest["config"] = config;
  manifest["artifacts"] = artifacts;
  const std::string body = manifest.dump(2);
  char run_fp[32];
  std::snprintf(run_fp, sizeof(run_fp), "%016llx",
                static_cast<unsigned long long>(boicr::fnv1a64(body.data(), body.size())));
  manifest["run_fingerprint"] = run_fp;
  write_file(dir / "manifest.json", manifest.dump(2) + "\n");
}

boicr::HeadMode parse_heads(const std::string& value) {
  if (value == "agents") return boicr::HeadMode::kAgentsOnly;
  if (value == "agents+distill") return boicr::HeadMode::kAgentsPlusDistill;
  require(false, "--heads must be 'agents' or 'agents+distill'");
  return boicr::HeadMode::kAgentsOnly;
}

bool parse_on_off(const std::string& value, const std::string& flag) {
  if (value == "on") return true;
  if (value == "off") return false;
  require(false, flag + " must be 'on' or 'off'");
  return false;
}

// "adaptive" or "fixed:<value>".
void parse_lambda_mode(const std::string& value, boicr::TrainConfig& config) {
  if (value == "adaptive") {
    config.adaptive_lambda = true;
    return;
  }
  if (value.rfind("fixed:", 0) == 0) {
    config.adaptive_lambda = false;
    config.fixed_lambda = std::stod(value.substr(6));
    return;
  }
  require(false, "--lambda must be 'adaptive' or 'fixed:<value>'");
}

// "0:0.01,1400:0.001" -> stage list.
std::vector<boicr::LrStage> parse_lr_schedule(const std::string& value) {
  std::vector<boicr::LrStage> stages;
  size_t pos = 0;
  while (pos < value.size()) {
    size_t comma = value.find(',', pos);
    if (comma == std::string::npos) comma = value.size();
    const std::string item = value.substr(pos, comma - pos);
    const size_t colon = item.find(':');
    require(colon != std::string::npos,
            "--lr-schedule items must look like <step>:<lr>, got '" + item + "'");
    stages.push_back({std::stoi(item.substr(0, colon)), std::stod(item.substr(colon + 1))});
    pos = comma + 1;
  }
  require(!stages.empty(), "--lr-schedule is empty");
  return stages;
}

ordered_json scene_spec_to_json(const boicr::SceneSpec& spec) {
  ordered_json j;
  j["num_classes"] = spec.num_classes;
  j["images_train"] = spec.images_train;
  j["images_test"] = spec.images_test;
  j["objects_min"] = spec.objects_min;
  j["objects_max"] = spec.objects_max;
  j["canvas_width"] = spec.canvas_width;
  j["canvas_height"] = spec.canvas_height;
  j["part_signal_gain"] = spec.part_signal_gain;
  j["part_evidence"] = spec.part_evidence;
  j["part_evidence_spread"] = spec.part_evidence_spread;
  j["part_evidence_jitter"] = spec.part_evidence_jitter;
  j["part_extend_max"] = spec.part_extend_max;
  j["extra_object_rate"] = spec.extra_object_rate;
  j["proposals_per_object"] = spec.proposals_per_object;
  j["background_proposals"] = spec.background_proposals;
  j["feature_noise_sigma"] = spec.feature_noise_sigma;
  j["rng_seed"] = spec.rng_seed;
  j["feature_dim"] = spec.feature_dim;
  j["part_fraction"] = spec.part_fraction;
  j["mostly_part_overlap"] = spec.mostly_part_overlap;
  j["overlap_area_exponent"] = spec.overlap_area_exponent;
  j["prototype_scale"] = spec.prototype_scale;
  j["bait_scale"] = spec.bait_scale;
  j["jitter_full"] = spec.jitter_full;
  j["jitter_part"] = spec.jitter_part;
  j["object_min_size"] = spec.object_min_size;
  j["object_max_size"] = spec.object_max_size;
  j["bg_min_size"] = spec.bg_min_size;
  j["bg_max_size"] = spec.bg_max_size;
  return j;
}

ordered_json train_config_to_json(const boicr::TrainConfig& config) {
  ordered_json j;
  j["num_classes"] = config.model.num_classes;
  j["raw_dim"] = config.model.raw_dim;
  j["trunk_dim"] = config.model.trunk_dim;
  j["num_agents"] = config.model.num_agents;
  j["distillation"] = config.model.distillation;
  j["total_steps"] = config.total_steps;
  j["batch_size"] = config.batch_size;
  ordered_json lr = ordered_json::array();
  for (const boicr::LrStage& stage : config.lr_schedule)
    lr.push_back(ordered_json{{"from_step", stage.from_step}, {"lr", stage.lr}});
  j["lr_schedule"] = std::move(lr);
  j["momentum"] = config.momentum;
  j["weight_decay"] = config.weight_decay;
  j["adaptive_lambda"] = config.adaptive_lambda;
  j["fixed_lambda"] = config.fixed_lambda;
  j["growth_base"] = config.growth_base;
  j["lambda_max"] = config.lambda_max;
  j["ignore_enabled"] = config.ignore_enabled;
  j["rng_seed"] = config.rng_seed;
  return j;
}

int cmd_gen_data(const boicr::SceneSpec& spec, const std::string& out_flag) {
  const fs::path out_dir = resolve_out_dir(out_flag);
  fs::create_directories(out_dir);
  const boicr::GeneratedData data = boicr::generate_dataset(spec);
  boicr::save_dataset((out_dir / "train.jsonl").string(), data.train);
  boicr::save_dataset((out_dir / "test.jsonl").string(), data.test);
  write_file(out_dir / "scene_spec.json", scene_spec_to_json(spec).dump(2) + "\n");
  write_manifest(out_dir, "gen-data", spec.rng_seed, boicr::dataset_fingerprint(data.train),
                 scene_spec_to_json(spec),
                 {"train.jsonl", "test.jsonl", "scene_spec.json"});
  std::cout << "wrote " << (out_dir / "train.jsonl").string() << " ("
            << data.train.images.size() << " images) and "
            << (out_dir / "test.jsonl").string() << " (" << data.test.images.size()
            << " images)\n";
  return 0;
}

int cmd_train(const std::string& data_path, boicr::TrainConfig config,
              const std::string& out_flag) {
  const fs::path out_dir = resolve_out_dir(out_flag);
  fs::create_directories(out_dir);
  const boicr::Dataset train_set = boicr::load_dataset(data_path);
  config.model.num_classes = train_set.num_classes;
  config.model.raw_dim = train_set.feature_dim;

  const boicr::TrainResult result = boicr::train(train_set, config);
  boicr::save_checkpoint((out_dir / "checkpoint.txt").string(), result.model,
                         config.total_steps);
  write_file(out_dir / "loss_log.csv",
             boicr::loss_log_to_csv(result.log, config.model.num_agents));
  write_manifest(out_dir, "train", config.rng_seed, boicr::dataset_fingerprint(train_set),
                 train_config_to_json(config), {"checkpoint.txt", "loss_log.csv"});

  if (!result.log.empty())
    std::cout << "trained " << config.total_steps << " steps; loss " << std::fixed
              << result.log.front().loss_total << " -> " << result.log.back().loss_total
              << "\n";
  else
    std::cout << "trained 0 steps (checkpoint is the initialization)\n";
  std::cout << "checkpoint: " << (out_dir / "checkpoint.txt").string() << "\n";
  return 0;
}

int cmd_eval(const std::string& data_path, const std::string& checkpoint_path,
             const std::string& out_flag, const std::string& heads, double nms_threshold,
             const std::string& ap_mode) {
  require(ap_mode == "11point" || ap_mode == "area", "--ap must be '11point' or 'area'");
  const fs::path out_dir = resolve_out_dir(out_flag);
  fs::create_directories(out_dir);
  const boicr::Dataset dataset = boicr::load_dataset(data_path);
  const boicr::LoadedCheckpoint checkpoint = boicr::load_checkpoint(checkpoint_path);

  const std::vector<boicr::DetectionRecord> detections =
      boicr::infer_dataset(checkpoint.model, dataset, parse_heads(heads), nms_threshold);
  boicr::save_detections((out_dir / "detections.jsonl").string(), detections);
  const boicr::EvalReport report =
      boicr::evaluate(dataset, detections, 0.5, ap_mode == "area");
  write_file(out_dir / "report.csv", boicr::report_to_csv(report));

  ordered_json config;
  config["checkpoint"] = checkpoint_path;
  config["heads"] = heads;
  config["nms"] = nms_threshold;
  config["ap"] = ap_mode;
  write_manifest(out_dir, "eval", 0, boicr::dataset_fingerprint(dataset), config,
                 {"detections.jsonl", "report.csv"});

  std::cout << boicr::report_to_table(report);
  return 0;
}

int cmd_ablate(const std::string& train_path, const std::string& test_path, int num_seeds,
               boicr::TrainConfig base, uint64_t data_seed, double nms_threshold,
               const std::string& out_flag) {
  require(num_seeds >= 1, "--seeds must be >= 1");
  boicr::Dataset train_set, test_set;
  if (!train_path.empty() || !test_path.empty()) {
    require(!train_path.empty() && !test_path.empty(),
            "--train and --test must be given together");
    train_set = boicr::load_dataset(train_path);
    test_set = boicr::load_dataset(test_path);
  } else {
    boicr::SceneSpec spec;
    spec.rng_seed = data_seed;
    boicr::GeneratedData data = boicr::generate_dataset(spec);
    train_set = std::move(data.train);
    test_set = std::move(data.test);
  }
  base.model.num_classes = train_set.num_classes;
  base.model.raw_dim = train_set.feature_dim;

  boicr::AblationConfig config;
  config.base = base;
  config.nms_threshold = nms_threshold;
  config.seeds.clear();
  for (int s = 1; s <= num_seeds; ++s) config.seeds.push_back(static_cast<uint64_t>(s));

  const std::vector<boicr::ArmOutcome> outcomes =
      boicr::run_ablation(train_set, test_set, config, &std::cerr);
  const std::string table = boicr::ablation_table(outcomes);
  std::cout << table;

  if (!out_flag.empty()) {
    const fs::path out_dir = resolve_out_dir(out_flag);
    fs::create_directories(out_dir);
    std::ostringstream csv;
    csv << "id,k,lambda,ignore,distill,median_map,median_corloc";
    for (int s = 1; s <= num_seeds; ++s) csv << ",map_seed_" << s;
    for (int s = 1; s <= num_seeds; ++s) csv << ",corloc_seed_" << s;
    csv << "\n";
    for (const boicr::ArmOutcome& o : outcomes) {
      csv << o.arm.id << ',' << o.arm.num_agents << ','
          << (o.arm.adaptive_lambda ? "adaptive" : "fixed") << ','
          << (o.arm.ignore_enabled ? "on" : "off") << ','
          << (o.arm.distillation ? "on" : "off") << ',' << o.median_map << ','
          << o.median_corloc;
      for (double v : o.map_per_seed) csv << ',' << v;
      for (double v : o.corloc_per_seed) csv << ',' << v;
      csv << "\n";
    }
    write_file(out_dir / "ablation.csv", csv.str());
    write_file(out_dir / "ablation.txt", table);
    write_manifest(out_dir, "ablate", data_seed, boicr::dataset_fingerprint(train_set),
                   train_config_to_json(base), {"ablation.csv", "ablation.txt"});
  }
  return 0;
}

int cmd_schedule_dump(int total_steps, double growth_base, double lambda_max, int stride,
                      const std::string& out_flag) {
  require(stride >= 1, "--stride must be >= 1");
  const boicr::AggregationSchedule schedule =
      boicr::AggregationSchedule::adaptive(total_steps, growth_base, lambda_max);
  std::ostringstream csv;
  csv << "step,lambda,lambda_ign\n";
  char buf[96];
  for (int step = 0; step <= total_steps; step += stride) {
    std::snprintf(buf, sizeof(buf), "%d,%.12f,%.12f\n", step, schedule.lambda_at(step),
                  schedule.lambda_ign_at(step));
    csv << buf;
  }
  if (total_steps % stride != 0) {  // always include the endpoint
    std::snprintf(buf, sizeof(buf), "%d,%.12f,%.12f\n", total_steps,
                  schedule.lambda_at(total_steps), schedule.lambda_ign_at(total_steps));
    csv << buf;
  }
  if (out_flag.empty()) {
    std::cout << csv.str();
  } else {
    const fs::path out_dir = resolve_out_dir(out_flag);
    fs::create_directories(out_dir);
    write_file(out_dir / "schedule.csv", csv.str());
    std::cout << "wrote " << (out_dir / "schedule.csv").string() << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Weakly supervised detector: cascaded instance refinement with "
               "adaptive supervision mining and head distillation"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(boicr::kToolName) + " " + boicr::kVersion);

  // gen-data
  boicr::SceneSpec spec;
  std::string gen_out;
  CLI::App* gen = app.add_subcommand("gen-data", "Generate the synthetic benchmark");
  gen->add_option("--classes", spec.num_classes, "Number of object classes");
  gen->add_option("--train", spec.images_train, "Training images");
  gen->add_option("--test", spec.images_test, "Test images");
  gen->add_option("--seed", spec.rng_seed, "Generator seed");
  gen->add_option("--gain", spec.part_signal_gain, "Part-box signal gain (> 1)");
  gen->add_option("--part-evidence", spec.part_evidence,
                  "Mean class evidence of a pure part crop, in (0, 2)");
  gen->add_option("--part-evidence-spread", spec.part_evidence_spread,
                  "Linear per-class ramp around --part-evidence");
  gen->add_option("--part-evidence-jitter", spec.part_evidence_jitter,
                  "Uniform per-object wobble on the class evidence");
  gen->add_option("--extra-object-rate", spec.extra_object_rate,
                  "Share of images with more than the minimum object count");
  gen->add_option("--noise", spec.feature_noise_sigma, "Feature noise sigma");
  gen->add_option("--feature-dim", spec.feature_dim, "Raw feature width");
  gen->add_option("--ppo", spec.proposals_per_object, "Proposals per object");
  gen->add_option("--bg", spec.background_proposals, "Background proposals per image");
  gen->add_option("--out", gen_out, "Output directory")->required();

  // train
  boicr::TrainConfig train_config;
  std::string train_data, train_out, lambda_mode = "adaptive", ignore_flag = "on",
                          distill_flag = "on", lr_schedule_flag;
  CLI::App* train_cmd = app.add_subcommand("train", "Train a detector");
  train_cmd->add_option("--data", train_data, "Training dataset (jsonl)")->required();
  train_cmd->add_option("--out", train_out, "Output directory")->required();
  train_cmd->add_option("--k", train_config.model.num_agents, "Refinement agents");
  train_cmd->add_option("--steps", train_config.total_steps, "Optimizer steps");
  train_cmd->add_option("--batch", train_config.batch_size, "Batch size");
  train_cmd->add_option("--trunk-dim", train_config.model.trunk_dim, "Trunk width");
  train_cmd->add_option("--lambda", lambda_mode, "'adaptive' or 'fixed:<value>'");
  train_cmd->add_option("--ignore", ignore_flag, "Ignore band: on|off");
  train_cmd->add_option("--distill", distill_flag, "Distillation head: on|off");
  train_cmd->add_option("--lb", train_config.growth_base, "Threshold growth base");
  train_cmd->add_option("--lambda-max", train_config.lambda_max, "Ignore threshold ceiling");
  train_cmd->add_option("--seed", train_config.rng_seed, "Training seed");
  train_cmd->add_option("--lr-schedule", lr_schedule_flag,
                        "Stages as <step>:<lr>[,<step>:<lr>...]");
  train_cmd->add_option("--momentum", train_config.momentum, "SGD momentum");
  train_cmd->add_option("--wd", train_config.weight_decay, "Weight decay");

  // eval
  std::string eval_data, eval_checkpoint, eval_out, eval_heads = "agents+distill",
                         ap_mode = "11point";
  double eval_nms = 0.3;
  CLI::App* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint");
  eval_cmd->add_option("--data", eval_data, "Dataset with ground truth (jsonl)")->required();
  eval_cmd->add_option("--checkpoint", eval_checkpoint, "Checkpoint file")->required();
  eval_cmd->add_option("--out", eval_out, "Output directory")->required();
  eval_cmd->add_option("--heads", eval_heads, "'agents' or 'agents+distill'");
  eval_cmd->add_option("--nms", eval_nms, "NMS IoU threshold");
  eval_cmd->add_option("--ap", ap_mode, "'11point' or 'area'");

  // ablate
  std::string ablate_train, ablate_test, ablate_out;
  int ablate_seeds = 5;
  uint64_t ablate_data_seed = 1;
  double ablate_nms = 0.3;
  boicr::TrainConfig ablate_base;
  CLI::App* ablate_cmd =
      app.add_subcommand("ablate", "Run the five-arm supervision comparison");
  ablate_cmd->add_option("--train", ablate_train, "Training dataset (jsonl)");
  ablate_cmd->add_option("--test", ablate_test, "Test dataset (jsonl)");
  ablate_cmd->add_option("--seeds", ablate_seeds, "Number of training seeds (1..N)");
  ablate_cmd->add_option("--steps", ablate_base.total_steps, "Optimizer steps per run");
  ablate_cmd->add_option("--data-seed", ablate_data_seed,
                         "Generator seed when no dataset files are given");
  ablate_cmd->add_option("--nms", ablate_nms, "NMS IoU threshold");
  ablate_cmd->add_option("--out", ablate_out, "Output directory (optional)");

  // schedule-dump
  int dump_steps = 2000, dump_stride = 1;
  double dump_lb = 100.0, dump_lambda_max = 0.51;
  std::string dump_out;
  CLI::App* dump_cmd =
      app.add_subcommand("schedule-dump", "Export the threshold schedule as CSV");
  dump_cmd->add_option("--steps", dump_steps, "Total steps S");
  dump_cmd->add_option("--lb", dump_lb, "Growth base");
  dump_cmd->add_option("--lambda-max", dump_lambda_max, "Ignore threshold ceiling");
  dump_cmd->add_option("--stride", dump_stride, "Row stride");
  dump_cmd->add_option("--out", dump_out, "Output directory (default: stdout)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) return cmd_gen_data(spec, gen_out);
    if (train_cmd->parsed()) {
      parse_lambda_mode(lambda_mode, train_config);
      train_config.ignore_enabled = parse_on_off(ignore_flag, "--ignore");
      train_config.model.distillation = parse_on_off(distill_flag, "--distill");
      if (!lr_schedule_flag.empty())
        train_config.lr_schedule = parse_lr_schedule(lr_schedule_flag);
      return cmd_train(train_data, train_config, train_out);
    }
    if (eval_cmd->parsed())
      return cmd_eval(eval_data, eval_checkpoint, eval_out, eval_heads, eval_nms, ap_mode);
    if (ablate_cmd->parsed())
      return cmd_ablate(ablate_train, ablate_test, ablate_seeds, ablate_base,
                        ablate_data_seed, ablate_nms, ablate_out);
    if (dump_cmd->parsed())
      return cmd_schedule_dump(dump_steps, dump_lb, dump_lambda_max, dump_stride, dump_out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

#include "boicr/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

#include "boicr/rng.hpp"

namespace boicr {
namespace {

using ordered_json = nlohmann::ordered_json;

// Stream tags so prototypes and images never share an RNG stream.
constexpr uint64_t kPrototypeStream = 0x70726f746f;  // "proto"
constexpr uint64_t kImageStreamBase = 0x696d616765;  // "image"

Box clamp_to_canvas(Box b, double width, double height) {
  b.x1 = std::clamp(b.x1, 0.0, width);
  b.x2 = std::clamp(b.x2, 0.0, width);
  b.y1 = std::clamp(b.y1, 0.0, height);
  b.y2 = std::clamp(b.y2, 0.0, height);
  // Keep a minimal extent so areas and IoUs stay well-defined.
  const double min_side = 2.0;
  if (b.x2 - b.x1 < min_side) {
    if (b.x1 + min_side <= width) {
      b.x2 = b.x1 + min_side;
    } else {
      b.x1 = width - min_side;
      b.x2 = width;
    }
  }
  if (b.y2 - b.y1 < min_side) {
    if (b.y1 + min_side <= height) {
      b.y2 = b.y1 + min_side;
    } else {
      b.y1 = height - min_side;
      b.y2 = height;
    }
  }
  return b;
}

Box jitter_box(const Box& b, double relative_sigma, double width, double height, Rng& rng) {
  const double sx = relative_sigma * b.width();
  const double sy = relative_sigma * b.height();
  Box j{b.x1 + rng.normal(0.0, sx), b.y1 + rng.normal(0.0, sy), b.x2 + rng.normal(0.0, sx),
        b.y2 + rng.normal(0.0, sy)};
  if (j.x2 < j.x1) std::swap(j.x1, j.x2);
  if (j.y2 < j.y1) std::swap(j.y1, j.y2);
  return clamp_to_canvas(j, width, height);
}

Box part_strip(const Box& full, double part_fraction) {
  return Box{full.x1, full.y1, full.x2, full.y1 + part_fraction * full.height()};
}

struct SceneObject {
  int class_id = 0;
  double part_evidence = 0.0;  // per-object draw around the class value
  Box full;
  Box part;
};

ImageSample generate_image(const SceneSpec& spec, const FeaturePrototypes& prototypes,
                           const std::string& image_id, uint64_t image_index) {
  Rng rng(mix_seed(spec.rng_seed, kImageStreamBase + image_index));
  ImageSample sample;
  sample.image_id = image_id;

  int num_objects = spec.objects_min;
  if (spec.objects_max > spec.objects_min &&
      rng.uniform(0.0, 1.0) < spec.extra_object_rate)
    num_objects = rng.uniform_int(spec.objects_min + 1, spec.objects_max);
  std::vector<SceneObject> objects;
  for (int i = 0; i < num_objects; ++i) {
    SceneObject obj;
    obj.class_id = rng.uniform_int(0, spec.num_classes - 1);
    obj.part_evidence = class_part_evidence(spec, obj.class_id);
    if (spec.part_evidence_jitter > 0.0)
      obj.part_evidence = std::clamp(
          obj.part_evidence +
              rng.uniform(-spec.part_evidence_jitter, spec.part_evidence_jitter),
          1e-3, 2.0 - 1e-3);
    const double w = rng.uniform(spec.object_min_size, spec.object_max_size);
    const double h = rng.uniform(spec.object_min_size, spec.object_max_size);
    const double x1 = rng.uniform(0.0, spec.canvas_width - w);
    const double y1 = rng.uniform(0.0, spec.canvas_height - h);
    obj.full = Box{x1, y1, x1 + w, y1 + h};
    obj.part = part_strip(obj.full, spec.part_fraction);
    objects.push_back(obj);
    sample.gt.push_back(GtInstance{obj.class_id, obj.full});
  }

  std::set<int> label_set;
  for (const SceneObject& obj : objects) label_set.insert(obj.class_id);
  sample.labels.assign(label_set.begin(), label_set.end());

  for (const SceneObject& obj : objects) {
    // Fractional shares are honoured in expectation: each object rounds the
    // full-box count up or down at random.
    const double want = spec.full_proposal_share * spec.proposals_per_object;
    int full_jitters = static_cast<int>(std::floor(want));
    const double frac = want - full_jitters;
    if (frac > 0.0 && rng.uniform(0.0, 1.0) < frac) ++full_jitters;
    full_jitters = std::clamp(full_jitters, 1, spec.proposals_per_object - 1);
    const int part_jitters = spec.proposals_per_object - full_jitters;
    for (int i = 0; i < full_jitters; ++i)
      sample.proposals.push_back(
          jitter_box(obj.full, spec.jitter_full, spec.canvas_width, spec.canvas_height, rng));
    for (int i = 0; i < part_jitters; ++i) {
      Box part_box = obj.part;
      // The first part proposal stays a faithful crop; later ones drag in a
      // random slab of context below the strip.
      if (i > 0 && spec.part_extend_max > 0.0)
        part_box.y2 += rng.uniform(0.0, spec.part_extend_max) * obj.full.height();
      sample.proposals.push_back(
          jitter_box(part_box, spec.jitter_part, spec.canvas_width, spec.canvas_height, rng));
    }
  }
  for (int i = 0; i < spec.background_proposals; ++i) {
    const double w = rng.uniform(spec.bg_min_size, spec.bg_max_size);
    const double h = rng.uniform(spec.bg_min_size, spec.bg_max_size);
    const double x1 = rng.uniform(0.0, spec.canvas_width - w);
    const double y1 = rng.uniform(0.0, spec.canvas_height - h);
    sample.proposals.push_back(Box{x1, y1, x1 + w, y1 + h});
  }

  const int num_proposals = static_cast<int>(sample.proposals.size());
  sample.features = Matrix::Zero(num_proposals, spec.feature_dim);
  for (int r = 0; r < num_proposals; ++r) {
    const Box& p = sample.proposals[r];
    bool baited = false;
    for (const SceneObject& obj : objects) {
      const double body_cov = iou(p, obj.full);
      if (body_cov > 0.0)
        sample.features.row(r) += body_cov * prototypes.body.row(obj.class_id);
      const double strip_cov = overlap_fraction(p, obj.part, spec.overlap_area_exponent);
      if (strip_cov > 0.0)
        sample.features.row(r) +=
            obj.part_evidence * strip_cov * prototypes.part.row(obj.class_id);
      if (intersection_area(p, obj.part) / p.area() >= spec.mostly_part_overlap) baited = true;
    }
    if (baited)
      sample.features.row(r) += spec.part_signal_gain * prototypes.distractor.transpose();
    for (int d = 0; d < spec.feature_dim; ++d)
      sample.features(r, d) += rng.normal(0.0, spec.feature_noise_sigma);
  }
  return sample;
}

void validate_spec(const SceneSpec& spec) {
  require(spec.num_classes >= 1, "scene spec: num_classes must be >= 1");
  require(spec.images_train >= 1 && spec.images_test >= 1,
          "scene spec: image counts must be >= 1");
  require(spec.objects_min >= 1 && spec.objects_max >= spec.objects_min,
          "scene spec: invalid objects_per_image range");
  require(spec.proposals_per_object >= 2 && spec.background_proposals >= 1,
          "scene spec: proposal counts must allow both box families");
  require(spec.full_proposal_share > 0.0 && spec.full_proposal_share < 1.0,
          "scene spec: full_proposal_share must lie in (0, 1)");
  require(spec.part_signal_gain > 1.0, "scene spec: part_signal_gain must exceed 1");
  require(spec.feature_noise_sigma >= 0.0, "scene spec: feature_noise_sigma cannot be negative");
  require(spec.feature_dim >= 1, "scene spec: feature_dim must be >= 1");
  require(spec.part_fraction > 0.0 && spec.part_fraction < 1.0,
          "scene spec: part_fraction must lie in (0, 1)");
  require(spec.part_evidence > 0.0 && spec.part_evidence < 2.0,
          "scene spec: part_evidence must lie in (0, 2)");
  require(spec.part_evidence_jitter >= 0.0,
          "scene spec: part_evidence_jitter cannot be negative");
  require(spec.part_extend_max >= 0.0 && spec.part_extend_max <= 1.0,
          "scene spec: part_extend_max must lie in [0, 1]");
  require(spec.part_evidence_spread >= 0.0 &&
              spec.part_evidence - spec.part_evidence_spread > 0.0 &&
              spec.part_evidence + spec.part_evidence_spread < 2.0,
          "scene spec: per-class part evidence must stay in (0, 2)");
  require(spec.extra_object_rate >= 0.0 && spec.extra_object_rate <= 1.0,
          "scene spec: extra_object_rate must lie in [0, 1]");
  require(spec.bait_scale > 0.0, "scene spec: bait_scale must be positive");
  require(spec.overlap_area_exponent >= 0.0 && spec.overlap_area_exponent <= 1.0,
          "scene spec: overlap_area_exponent must lie in [0, 1]");
  require(spec.object_max_size <= spec.canvas_width &&
              spec.object_max_size <= spec.canvas_height,
          "scene spec: objects must fit the canvas");
}

std::string format_image_id(const char* split, int index) {
  std::ostringstream out;
  out << split << "_";
  const std::string digits = std::to_string(index);
  for (size_t i = digits.size(); i < 6; ++i) out << '0';
  out << digits;
  return out.str();
}

ordered_json box_to_json(const Box& b) { return ordered_json::array({b.x1, b.y1, b.x2, b.y2}); }

Box box_from_json(const ordered_json& j) {
  require(j.is_array() && j.size() == 4, "box must be a 4-element array");
  return Box{j[0].get<double>(), j[1].get<double>(), j[2].get<double>(), j[3].get<double>()};
}

ordered_json image_to_json(const ImageSample& sample) {
  ordered_json record;
  record["image_id"] = sample.image_id;
  ordered_json labels = ordered_json::array();
  for (int c : sample.labels) labels.push_back(c + 1);
  record["labels"] = std::move(labels);
  ordered_json proposals = ordered_json::array();
  for (const Box& b : sample.proposals) proposals.push_back(box_to_json(b));
  record["proposals"] = std::move(proposals);
  ordered_json features = ordered_json::array();
  for (Eigen::Index r = 0; r < sample.features.rows(); ++r) {
    ordered_json row = ordered_json::array();
    for (Eigen::Index d = 0; d < sample.features.cols(); ++d)
      row.push_back(sample.features(r, d));
    features.push_back(std::move(row));
  }
  record["features"] = std::move(features);
  if (!sample.gt.empty()) {
    ordered_json gt = ordered_json::array();
    for (const GtInstance& g : sample.gt) {
      ordered_json item;
      item["class"] = g.class_id + 1;
      item["box"] = box_to_json(g.box);
      gt.push_back(std::move(item));
    }
    record["gt"] = std::move(gt);
  }
  return record;
}

[[noreturn]] void parse_fail(size_t line_number, const std::string& what) {
  throw std::invalid_argument("dataset parse error at line " + std::to_string(line_number) +
                              ": " + what);
}

ImageSample image_from_json(const ordered_json& record, int num_classes, int feature_dim,
                            size_t line_number) {
  ImageSample sample;
  if (!record.contains("image_id") || !record["image_id"].is_string())
    parse_fail(line_number, "missing or non-string field 'image_id'");
  sample.image_id = record["image_id"].get<std::string>();

  if (!record.contains("labels") || !record["labels"].is_array())
    parse_fail(line_number, "missing or non-array field 'labels'");
  for (const auto& l : record["labels"]) {
    const int c = l.get<int>() - 1;
    if (c < 0 || c >= num_classes) parse_fail(line_number, "label outside [1, num_classes]");
    sample.labels.push_back(c);
  }

  if (!record.contains("proposals") || !record["proposals"].is_array())
    parse_fail(line_number, "missing or non-array field 'proposals'");
  for (const auto& p : record["proposals"]) sample.proposals.push_back(box_from_json(p));

  if (!record.contains("features") || !record["features"].is_array())
    parse_fail(line_number, "missing or non-array field 'features'");
  const auto& rows = record["features"];
  if (rows.size() != sample.proposals.size())
    parse_fail(line_number, "field 'features' length differs from 'proposals'");
  sample.features = Matrix::Zero(static_cast<Eigen::Index>(rows.size()), feature_dim);
  for (size_t r = 0; r < rows.size(); ++r) {
    if (!rows[r].is_array() || static_cast<int>(rows[r].size()) != feature_dim)
      parse_fail(line_number, "feature row " + std::to_string(r) + " has wrong width");
    for (int d = 0; d < feature_dim; ++d)
      sample.features(static_cast<Eigen::Index>(r), d) = rows[r][d].get<double>();
  }

  if (record.contains("gt")) {
    if (!record["gt"].is_array()) parse_fail(line_number, "field 'gt' must be an array");
    for (const auto& g : record["gt"]) {
      if (!g.contains("class") || !g.contains("box"))
        parse_fail(line_number, "gt entry missing 'class' or 'box'");
      GtInstance inst;
      inst.class_id = g["class"].get<int>() - 1;
      if (inst.class_id < 0 || inst.class_id >= num_classes)
        parse_fail(line_number, "gt class outside [1, num_classes]");
      inst.box = box_from_json(g["box"]);
      sample.gt.push_back(inst);
    }
  }
  return sample;
}

}  // namespace

double overlap_fraction(const Box& proposal, const Box& object, double area_exponent) {
  const double inter = intersection_area(proposal, object);
  if (inter <= 0.0) return 0.0;
  const double denom =
      std::pow(proposal.area(), area_exponent) * std::pow(object.area(), 1.0 - area_exponent);
  return denom > 0.0 ? inter / denom : 0.0;
}

double class_part_evidence(const SceneSpec& spec, int class_id) {
  if (spec.num_classes <= 1) return spec.part_evidence;
  const double t = 2.0 * class_id / (spec.num_classes - 1) - 1.0;
  return spec.part_evidence + spec.part_evidence_spread * t;
}

FeaturePrototypes class_prototypes(const SceneSpec& spec) {
  Rng rng(mix_seed(spec.rng_seed, kPrototypeStream));
  // Draw 2C+1 Gaussian directions and orthogonalize them greedily so the
  // body, part, and bait signals do not leak into each other. Directions
  // beyond what feature_dim can keep orthogonal stay as plain unit vectors.
  const int num_directions = 2 * spec.num_classes + 1;
  Matrix directions(num_directions, spec.feature_dim);
  for (int i = 0; i < num_directions; ++i) {
    for (int d = 0; d < spec.feature_dim; ++d) directions(i, d) = rng.normal(0.0, 1.0);
    Vector candidate = directions.row(i).transpose();
    Vector residual = candidate;
    for (int j = 0; j < i; ++j) {
      const Vector prior = directions.row(j).transpose();
      residual -= prior.dot(residual) / prior.squaredNorm() * prior;
    }
    if (residual.norm() > 1e-6 * candidate.norm()) candidate = residual;
    directions.row(i) = spec.prototype_scale / candidate.norm() * candidate.transpose();
  }

  FeaturePrototypes prototypes;
  prototypes.body = directions.topRows(spec.num_classes);
  prototypes.part = directions.middleRows(spec.num_classes, spec.num_classes);
  prototypes.distractor = spec.bait_scale * directions.row(num_directions - 1).transpose();
  return prototypes;
}

GeneratedData generate_dataset(const SceneSpec& spec) {
  validate_spec(spec);
  const FeaturePrototypes prototypes = class_prototypes(spec);
  GeneratedData data;
  data.train.num_classes = data.test.num_classes = spec.num_classes;
  data.train.feature_dim = data.test.feature_dim = spec.feature_dim;
  for (int i = 0; i < spec.images_train; ++i)
    data.train.images.push_back(
        generate_image(spec, prototypes, format_image_id("train", i), i));
  for (int i = 0; i < spec.images_test; ++i)
    data.test.images.push_back(generate_image(spec, prototypes, format_image_id("test", i),
                                              spec.images_train + i));
  return data;
}

std::string serialize_dataset(const Dataset& dataset) {
  ordered_json header;
  header["format"] = "boicr-dataset";
  header["version"] = 1;
  header["num_classes"] = dataset.num_classes;
  header["feature_dim"] = dataset.feature_dim;
  std::string out = header.dump();
  out.push_back('\n');
  for (const ImageSample& sample : dataset.images) {
    out += image_to_json(sample).dump();
    out.push_back('\n');
  }
  return out;
}

void save_dataset(const std::string& path, const Dataset& dataset) {
  std::ofstream file(path, std::ios::binary);
  require(file.good(), "save_dataset: cannot open " + path);
  file << serialize_dataset(dataset);
  require(file.good(), "save_dataset: write failed for " + path);
}

Dataset load_dataset(const std::string& path) {
  std::ifstream file(path, std::ios::binary);
  require(file.good(), "load_dataset: cannot open " + path);
  std::string line;
  size_t line_number = 0;

  Dataset dataset;
  if (!std::getline(file, line)) parse_fail(1, "empty file, expected header");
  ++line_number;
  ordered_json header;
  try {
    header = ordered_json::parse(line);
  } catch (const std::exception& e) {
    parse_fail(line_number, std::string("invalid JSON header: ") + e.what());
  }
  if (header.value("format", "") != std::string("boicr-dataset"))
    parse_fail(line_number, "field 'format' must be 'boicr-dataset'");
  if (!header.contains("num_classes") || !header.contains("feature_dim"))
    parse_fail(line_number, "header missing 'num_classes' or 'feature_dim'");
  dataset.num_classes = header["num_classes"].get<int>();
  dataset.feature_dim = header["feature_dim"].get<int>();

  while (std::getline(file, line)) {
    ++line_number;
    if (line.empty()) continue;
    ordered_json record;
    try {
      record = ordered_json::parse(line);
    } catch (const std::exception& e) {
      parse_fail(line_number, std::string("invalid JSON: ") + e.what());
    }
    dataset.images.push_back(
        image_from_json(record, dataset.num_classes, dataset.feature_dim, line_number));
  }
  return dataset;
}

uint64_t dataset_fingerprint(const Dataset& dataset) {
  const std::string bytes = serialize_dataset(dataset);
  return fnv1a64(bytes.data(), bytes.size());
}

void save_detections(const std::string& path, const std::vector<DetectionRecord>& records) {
  std::ofstream file(path, std::ios::binary);
  require(file.good(), "save_detections: cannot open " + path);
  for (const DetectionRecord& r : records) {
    ordered_json j;
    j["image_id"] = r.image_id;
    j["class"] = r.det.class_id + 1;
    j["box"] = box_to_json(r.det.box);
    j["score"] = r.det.score;
    file << j.dump() << '\n';
  }
  require(file.good(), "save_detections: write failed for " + path);
}

std::vector<DetectionRecord> load_detections(const std::string& path) {
  std::ifstream file(path, std::ios::binary);
  require(file.good(), "load_detections: cannot open " + path);
  std::vector<DetectionRecord> records;
  std::string line;
  size_t line_number = 0;
  while (std::getline(file, line)) {
    ++line_number;
    if (line.empty()) continue;
    ordered_json j;
    try {
      j = ordered_json::parse(line);
    } catch (const std::exception& e) {
      parse_fail(line_number, std::string("invalid JSON: ") + e.what());
    }
    if (!j.contains("image_id") || !j.contains("class") || !j.contains("box") ||
        !j.contains("score"))
      parse_fail(line_number, "detection missing one of image_id/class/box/score");
    DetectionRecord r;
    r.image_id = j["image_id"].get<std::string>();
    r.det.class_id = j["class"].get<int>() - 1;
    r.det.box = box_from_json(j["box"]);
    r.det.score = j["score"].get<double>();
    records.push_back(r);
  }
  return records;
}

}  // namespace boicr

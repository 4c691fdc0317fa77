#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "boicr/geometry.hpp"
#include "boicr/nn.hpp"

namespace boicr {

/// Ground-truth instance; read only by evaluation code, never by training.
struct GtInstance {
  int class_id = 0;  // 0-based internally; files store 1-based ids
  Box box;
};

struct ImageSample {
  std::string image_id;
  std::vector<int> labels;  // sorted 0-based present classes
  std::vector<Box> proposals;
  Matrix features;  // proposals x feature_dim
  std::vector<GtInstance> gt;
};

struct Dataset {
  int num_classes = 0;
  int feature_dim = 0;
  std::vector<ImageSample> images;
};

/// Generator knobs. Scenes place 1-3 objects on a canvas (classes drawn with
/// replacement, so images with repeated classes are common); each object
/// emits jittered copies of its full box and of a "part" strip covering the
/// top of the box, plus unrelated background boxes.
///
/// A proposal's features sum, per object, a body component (class body
/// direction, weighted by IoU with the object) and a part component (class
/// part direction, weighted by strip overlap and scaled by the class's
/// evidence factor). The part strip concentrates the discriminative texture,
/// so a tight part crop reads as comparably strong class evidence to the
/// full box that dilutes it with context; `part_evidence_spread` ramps that
/// concentration linearly across class ids, so low classes lean on the body
/// and high classes on the part. Proposals sitting mostly inside a part strip
/// additionally receive a bait component along one distractor direction
/// shared by every class: part boxes therefore carry the strongest raw
/// signal in the image and trap any selector that chases score magnitude,
/// but the bait carries no class information, so supervision that keeps
/// full boxes in play can recover them.
struct SceneSpec {
  int num_classes = 5;
  int images_train = 200;
  int images_test = 100;
  int objects_min = 1;
  int objects_max = 3;
  double canvas_width = 100.0;
  double canvas_height = 100.0;
  double part_signal_gain = 2.0;
  int proposals_per_object = 8;
  double full_proposal_share = 0.5;  // share of an object's proposals that jitter the full box
  int background_proposals = 12;
  double feature_noise_sigma = 0.3;
  uint64_t rng_seed = 1;

  int feature_dim = 32;
  double part_fraction = 0.30;        // part strip height as a share of the box
  double mostly_part_overlap = 0.70;  // share of a proposal inside the strip to earn the bait
  double part_evidence = 0.95;        // class evidence of a pure part crop vs a full box's body
  double part_evidence_spread = 0.0;  // classes ramp linearly from evidence-spread to +spread
  double part_evidence_jitter = 0.0;  // uniform per-object wobble on top of the class value
  double overlap_area_exponent = 1.0;
  double prototype_scale = 3.0;
  double bait_scale = 0.92;           // distractor norm relative to prototype_scale
  // Share of images holding more than objects_min objects; the extra count is
  // uniform over (objects_min, objects_max]. 2/3 reproduces a uniform count
  // over [1,3]; lower values favour single-object scenes.
  double extra_object_rate = 2.0 / 3.0;
  double jitter_full = 0.08;  // coordinate noise relative to box size
  double jitter_part = 0.06;
  // Part proposals beyond the first per object extend downward by up to this
  // share of the object's height, dragging in context: long extensions cross
  // the localization threshold while still leaning on the part texture.
  double part_extend_max = 0.0;
  double object_min_size = 30.0;
  double object_max_size = 55.0;
  double bg_min_size = 8.0;
  double bg_max_size = 40.0;
};

/// Share of object `o` that proposal `p` captures, normalized by a weighted
/// geometric mean of the two areas:
///
///   intersection / (area(p)^t * area(o)^(1-t)),   t = overlap_area_exponent.
///
/// Always in [0, 1] since the intersection is bounded by both areas. The
/// exponent sets how much a small box inside the object is discounted for
/// covering little of it: t=1 ignores the object's size entirely (a tiny
/// inner box scores 1), t=0 scores plain fraction-of-object-covered.
double overlap_fraction(const Box& proposal, const Box& object, double area_exponent);

/// Per-class part evidence factor: a linear ramp across class ids centred on
/// part_evidence, from -spread (class 0) to +spread (last class). With one
/// class or zero spread this is just part_evidence.
double class_part_evidence(const SceneSpec& spec, int class_id);

struct GeneratedData {
  Dataset train;
  Dataset test;
};

/// Deterministic for a given spec: prototypes come from one seeded stream and
/// each image from its own stream keyed by (seed, image index).
GeneratedData generate_dataset(const SceneSpec& spec);

/// The fixed feature directions behind a spec's seed: per-class body and
/// part directions plus the single class-neutral bait direction. Rows are
/// mutually orthogonal (while feature_dim allows); class rows have norm
/// prototype_scale, the distractor bait_scale * prototype_scale. Exposed so
/// tests can recompute features independently.
struct FeaturePrototypes {
  Matrix body;        // num_classes x feature_dim
  Matrix part;        // num_classes x feature_dim
  Vector distractor;  // feature_dim
};

FeaturePrototypes class_prototypes(const SceneSpec& spec);

/// Line-delimited JSON: a header line with counts, then one image per line.
/// Class ids are 1-based on disk.
std::string serialize_dataset(const Dataset& dataset);
void save_dataset(const std::string& path, const Dataset& dataset);
Dataset load_dataset(const std::string& path);

/// Stable content hash of the serialized form.
uint64_t dataset_fingerprint(const Dataset& dataset);

/// One detection tied to an image, for detections files.
struct DetectionRecord {
  std::string image_id;
  Detection det;
};

/// Line-delimited JSON, one detection per line, 1-based class ids on disk.
void save_detections(const std::string& path, const std::vector<DetectionRecord>& records);
std::vector<DetectionRecord> load_detections(const std::string& path);

}  // namespace boicr

#pragma once

#include <vector>

#include "boicr/nn.hpp"

namespace boicr {

/// Shared feature trunk: two affine layers with relu after each, mapping raw
/// per-proposal features (R x D_raw) to the representation every scoring head
/// consumes (R x D). Initialized He-style so relu activations keep scale.
struct TrunkParams {
  Affine layer1;
  Affine layer2;

  static TrunkParams init(int raw_dim, int trunk_dim, Rng& rng);
  void collect_params(std::vector<ParamTensor*>& out) {
    layer1.collect_params(out);
    layer2.collect_params(out);
  }
};

/// Intermediate activations kept for the backward pass; `features` is the
/// trunk output.
struct TrunkCache {
  Matrix pre1;
  Matrix act1;
  Matrix pre2;
  Matrix features;
};

TrunkCache trunk_forward(const TrunkParams& trunk, const Matrix& raw_features);

/// Accumulates parameter gradients and returns dL/d(raw_features).
Matrix trunk_backward(TrunkParams& trunk, const Matrix& raw_features, const TrunkCache& cache,
                      const Matrix& d_features);

/// Two parallel scoring streams over trunk features. Both map D -> C; the
/// classification stream is normalized across classes, the detection stream
/// across proposals, and their product ranks proposals per class.
struct MidnHeads {
  Affine cls_head;
  Affine det_head;

  static MidnHeads init(int feat_dim, int num_classes, double stddev, Rng& rng);
  void collect_params(std::vector<ParamTensor*>& out) {
    cls_head.collect_params(out);
    det_head.collect_params(out);
  }
};

/// Forward results, all score tables class-major (C x R).
struct MidnOutput {
  Matrix cls_logits;
  Matrix det_logits;
  Matrix sigma_cls;  // column-stochastic: each proposal's class distribution
  Matrix sigma_det;  // row-stochastic: each class's proposal distribution
  Matrix fused;      // sigma_cls .* sigma_det
  Vector phi;        // per-class image evidence: row sums of fused
};

MidnOutput midn_forward(const MidnHeads& heads, const Matrix& features);

/// Multi-label binary cross-entropy over image evidence, summed over classes:
///   L = -sum_c [ y_c log phi_c + (1 - y_c) log(1 - phi_c) ]
/// with phi clamped into [kLogFloor, 1 - kLogFloor] inside the logs.
double classification_loss(const Vector& phi, const std::vector<int>& present_classes);

/// dL/dphi; zero where the clamp flattens the loss.
Vector classification_loss_backward(const Vector& phi, const std::vector<int>& present_classes);

/// Accumulates head gradients from dL/d(fused) and returns dL/d(features).
Matrix midn_backward(MidnHeads& heads, const Matrix& features, const MidnOutput& out,
                     const Matrix& d_fused);

}  // namespace boicr

#include "boicr/midn.hpp"

#include <cmath>

namespace boicr {

TrunkParams TrunkParams::init(int raw_dim, int trunk_dim, Rng& rng) {
  TrunkParams trunk;
  trunk.layer1 = Affine::init_gaussian("trunk.layer1", raw_dim, trunk_dim,
                                       std::sqrt(2.0 / raw_dim), rng);
  trunk.layer2 = Affine::init_gaussian("trunk.layer2", trunk_dim, trunk_dim,
                                       std::sqrt(2.0 / trunk_dim), rng);
  return trunk;
}

TrunkCache trunk_forward(const TrunkParams& trunk, const Matrix& raw_features) {
  TrunkCache cache;
  cache.pre1 = trunk.layer1.forward(raw_features);
  cache.act1 = relu(cache.pre1);
  cache.pre2 = trunk.layer2.forward(cache.act1);
  cache.features = relu(cache.pre2);
  return cache;
}

Matrix trunk_backward(TrunkParams& trunk, const Matrix& raw_features, const TrunkCache& cache,
                      const Matrix& d_features) {
  const Matrix d_pre2 = relu_backward(cache.pre2, d_features);
  const Matrix d_act1 = trunk.layer2.backward(cache.act1, d_pre2);
  const Matrix d_pre1 = relu_backward(cache.pre1, d_act1);
  return trunk.layer1.backward(raw_features, d_pre1);
}

MidnHeads MidnHeads::init(int feat_dim, int num_classes, double stddev, Rng& rng) {
  MidnHeads heads;
  heads.cls_head = Affine::init_gaussian("midn.cls", feat_dim, num_classes, stddev, rng);
  heads.det_head = Affine::init_gaussian("midn.det", feat_dim, num_classes, stddev, rng);
  return heads;
}

MidnOutput midn_forward(const MidnHeads& heads, const Matrix& features) {
  MidnOutput out;
  out.cls_logits = heads.cls_head.forward(features).transpose();
  out.det_logits = heads.det_head.forward(features).transpose();
  out.sigma_cls = softmax_over_classes(out.cls_logits);
  out.sigma_det = softmax_over_proposals(out.det_logits);
  out.fused = out.sigma_cls.cwiseProduct(out.sigma_det);
  out.phi = out.fused.rowwise().sum();
  return out;
}

double classification_loss(const Vector& phi, const std::vector<int>& present_classes) {
  const int num_classes = static_cast<int>(phi.size());
  Eigen::VectorXi y = Eigen::VectorXi::Zero(num_classes);
  for (int c : present_classes) {
    require(c >= 0 && c < num_classes, "classification_loss: class outside [0, C)");
    y(c) = 1;
  }
  double loss = 0.0;
  for (int c = 0; c < num_classes; ++c) {
    const double p = phi(c);
    loss -= y(c) == 1 ? safe_log(p) : safe_log(1.0 - p);
  }
  return loss;
}

Vector classification_loss_backward(const Vector& phi, const std::vector<int>& present_classes) {
  const int num_classes = static_cast<int>(phi.size());
  Eigen::VectorXi y = Eigen::VectorXi::Zero(num_classes);
  for (int c : present_classes) y(c) = 1;
  Vector dphi = Vector::Zero(num_classes);
  for (int c = 0; c < num_classes; ++c) {
    if (y(c) == 1) {
      if (phi(c) >= kLogFloor) dphi(c) = -1.0 / phi(c);
    } else {
      if (1.0 - phi(c) >= kLogFloor) dphi(c) = 1.0 / (1.0 - phi(c));
    }
  }
  return dphi;
}

Matrix midn_backward(MidnHeads& heads, const Matrix& features, const MidnOutput& out,
                     const Matrix& d_fused) {
  const Matrix d_sigma_cls = d_fused.cwiseProduct(out.sigma_det);
  const Matrix d_sigma_det = d_fused.cwiseProduct(out.sigma_cls);
  const Matrix d_cls_logits = softmax_over_classes_backward(out.sigma_cls, d_sigma_cls);
  const Matrix d_det_logits = softmax_over_proposals_backward(out.sigma_det, d_sigma_det);
  Matrix d_features = heads.cls_head.backward(features, d_cls_logits.transpose());
  d_features += heads.det_head.backward(features, d_det_logits.transpose());
  return d_features;
}

}  // namespace boicr

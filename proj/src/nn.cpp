#include "boicr/nn.hpp"

#include <cmath>

namespace boicr {

Matrix softmax_over_classes_backward(const Matrix& y, const Matrix& dy) {
  require(y.rows() == dy.rows() && y.cols() == dy.cols(),
          "softmax_over_classes_backward: shape mismatch");
  const Matrix prod = y.cwiseProduct(dy);
  const Eigen::RowVectorXd col_dot = prod.colwise().sum();
  Matrix dz = dy;
  dz.rowwise() -= col_dot;
  return y.cwiseProduct(dz);
}

Matrix softmax_over_proposals_backward(const Matrix& y, const Matrix& dy) {
  require(y.rows() == dy.rows() && y.cols() == dy.cols(),
          "softmax_over_proposals_backward: shape mismatch");
  const Matrix prod = y.cwiseProduct(dy);
  const Vector row_dot = prod.rowwise().sum();
  Matrix dz = dy;
  dz.colwise() -= row_dot;
  return y.cwiseProduct(dz);
}

Matrix relu_backward(const Matrix& pre_activation, const Matrix& dy) {
  require(pre_activation.rows() == dy.rows() && pre_activation.cols() == dy.cols(),
          "relu_backward: shape mismatch");
  return (pre_activation.array() > 0.0).select(dy, Matrix::Zero(dy.rows(), dy.cols()));
}

Affine Affine::init_gaussian(const std::string& name, int in_dim, int out_dim, double stddev,
                             Rng& rng) {
  require(in_dim > 0 && out_dim > 0, "Affine: dimensions must be positive");
  Affine layer;
  layer.weight = ParamTensor::gaussian(name + ".weight", in_dim, out_dim, stddev, rng);
  layer.bias = ParamTensor::zeros(name + ".bias", out_dim, 1);
  return layer;
}

Affine Affine::zeros(const std::string& name, int in_dim, int out_dim) {
  require(in_dim > 0 && out_dim > 0, "Affine: dimensions must be positive");
  Affine layer;
  layer.weight = ParamTensor::zeros(name + ".weight", in_dim, out_dim);
  layer.bias = ParamTensor::zeros(name + ".bias", out_dim, 1);
  return layer;
}

Matrix Affine::forward(const Matrix& x) const {
  require(x.cols() == weight.value.rows(),
          "Affine::forward: input width " + std::to_string(x.cols()) + " != in_dim " +
              std::to_string(weight.value.rows()) + " for " + weight.name);
  Matrix y = x * weight.value;
  y.rowwise() += bias.value.transpose().row(0);
  return y;
}

Matrix Affine::backward(const Matrix& x, const Matrix& dy) {
  require(dy.cols() == weight.value.cols() && x.cols() == weight.value.rows() &&
              x.rows() == dy.rows(),
          "Affine::backward: shape mismatch for " + weight.name);
  weight.grad.noalias() += x.transpose() * dy;
  bias.grad += dy.colwise().sum().transpose();
  return dy * weight.value.transpose();
}

void sgd_step(std::span<ParamTensor* const> params, double lr, double momentum,
              double weight_decay) {
  for (ParamTensor* p : params) {
    require(p != nullptr, "sgd_step: null parameter");
    require(p->grad.allFinite(), "sgd_step: non-finite gradient in " + p->name);
    p->momentum = momentum * p->momentum + p->grad + weight_decay * p->value;
    p->value -= lr * p->momentum;
    p->grad.setZero();
  }
}

}  // namespace boicr

#pragma once

#include <Eigen/Dense>
#include <span>
#include <string>
#include <vector>

#include "boicr/common.hpp"
#include "boicr/rng.hpp"

namespace boicr {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Arguments of log() in every loss are clamped below at this floor.
inline constexpr double kLogFloor = 1e-12;

inline double safe_log(double x) { return std::log(x < kLogFloor ? kLogFloor : x); }

/// Value, gradient and momentum buffers; the three always share one shape.
struct ParamTensor {
  std::string name;
  Matrix value;
  Matrix grad;
  Matrix momentum;

  static ParamTensor zeros(std::string name, Eigen::Index rows, Eigen::Index cols) {
    ParamTensor p;
    p.name = std::move(name);
    p.value = Matrix::Zero(rows, cols);
    p.grad = Matrix::Zero(rows, cols);
    p.momentum = Matrix::Zero(rows, cols);
    return p;
  }

  static ParamTensor gaussian(std::string name, Eigen::Index rows, Eigen::Index cols,
                              double stddev, Rng& rng) {
    ParamTensor p = zeros(std::move(name), rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r)
      for (Eigen::Index c = 0; c < cols; ++c) p.value(r, c) = rng.normal(0.0, stddev);
    return p;
  }
};

/// Column-wise softmax on a classes-by-proposals table: every column of the
/// result is a probability distribution. Stabilized by per-column max shift.
template <typename Derived>
Matrix softmax_over_classes(const Eigen::MatrixBase<Derived>& logits) {
  Matrix z = logits;
  const Eigen::RowVectorXd shift = z.colwise().maxCoeff();
  z.rowwise() -= shift;
  z = z.array().exp().matrix();
  const Eigen::RowVectorXd norm = z.colwise().sum();
  z.array().rowwise() /= norm.array();
  return z;
}

/// Row-wise softmax: every row of the result sums to 1.
template <typename Derived>
Matrix softmax_over_proposals(const Eigen::MatrixBase<Derived>& logits) {
  Matrix z = logits;
  const Vector shift = z.rowwise().maxCoeff();
  z.colwise() -= shift;
  z = z.array().exp().matrix();
  const Vector norm = z.rowwise().sum();
  z.array().colwise() /= norm.array();
  return z;
}

/// Given y = softmax_over_classes(z) and dL/dy, returns dL/dz.
Matrix softmax_over_classes_backward(const Matrix& y, const Matrix& dy);

/// Given y = softmax_over_proposals(z) and dL/dy, returns dL/dz.
Matrix softmax_over_proposals_backward(const Matrix& y, const Matrix& dy);

template <typename Derived>
Matrix relu(const Eigen::MatrixBase<Derived>& m) {
  return m.cwiseMax(0.0);
}

/// dL/dx for y = relu(x), given the pre-activation x and dL/dy.
Matrix relu_backward(const Matrix& pre_activation, const Matrix& dy);

/// Fully connected layer. weight is in_dim x out_dim, bias is out_dim x 1;
/// inputs are row-per-sample (N x in_dim).
struct Affine {
  ParamTensor weight;
  ParamTensor bias;

  static Affine init_gaussian(const std::string& name, int in_dim, int out_dim, double stddev,
                              Rng& rng);
  static Affine zeros(const std::string& name, int in_dim, int out_dim);

  int in_dim() const { return static_cast<int>(weight.value.rows()); }
  int out_dim() const { return static_cast<int>(weight.value.cols()); }

  /// y = x * W + b. The caller keeps x for the backward pass.
  Matrix forward(const Matrix& x) const;

  /// Accumulates dW, db from (x, dy) and returns dx.
  Matrix backward(const Matrix& x, const Matrix& dy);

  void collect_params(std::vector<ParamTensor*>& out) {
    out.push_back(&weight);
    out.push_back(&bias);
  }
};

/// v <- momentum*v + grad + weight_decay*value; value <- value - lr*v;
/// gradients are zeroed afterwards. Non-finite gradients abort, naming the
/// offending parameter.
void sgd_step(std::span<ParamTensor* const> params, double lr, double momentum,
              double weight_decay);

inline void sgd_step(std::vector<ParamTensor*>& params, double lr, double momentum,
                     double weight_decay) {
  sgd_step(std::span<ParamTensor* const>(params.data(), params.size()), lr, momentum,
           weight_decay);
}

}  // namespace boicr

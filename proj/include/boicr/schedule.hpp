#pragma once

#include "boicr/common.hpp"

namespace boicr {

/// Threshold schedule that drives supervision mining. In adaptive mode the
/// positive threshold grows logarithmically from 0 to 0.5 over training,
///
///   lambda(s) = 0.5 * (log(s + b) - log b) / (log(S + b) - log b),
///
/// and the ignore threshold shrinks as lambda_ign(s) = lambda_max - lambda(s).
/// Fixed mode holds lambda constant instead.
class AggregationSchedule {
 public:
  enum class Mode { kFixed, kAdaptive };

  static AggregationSchedule fixed(double lambda, int total_steps, double lambda_max = 0.51);
  static AggregationSchedule adaptive(int total_steps, double growth_base = 100.0,
                                      double lambda_max = 0.51);

  /// Positive-band threshold at optimizer step `step`; valid for 0 <= step <= S.
  double lambda_at(int step) const;

  /// Ignore-band threshold lambda_max - lambda(step), floored at zero.
  double lambda_ign_at(int step) const;

  /// First (fractional) step at which lambda overtakes lambda_ign; adaptive
  /// mode only. Before this point every proposal lands in the positive or
  /// ignore band, after it a background band opens up.
  double crossover_step() const;

  Mode mode() const { return mode_; }
  int total_steps() const { return total_steps_; }
  double growth_base() const { return growth_base_; }
  double lambda_max() const { return lambda_max_; }

 private:
  AggregationSchedule() = default;

  Mode mode_ = Mode::kAdaptive;
  double fixed_lambda_ = 0.5;
  int total_steps_ = 0;
  double growth_base_ = 100.0;
  double lambda_max_ = 0.51;
};

}  // namespace boicr

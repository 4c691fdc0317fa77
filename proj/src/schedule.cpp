#include "boicr/schedule.hpp"

#include <cmath>
#include <string>

namespace boicr {

AggregationSchedule AggregationSchedule::fixed(double lambda, int total_steps,
                                               double lambda_max) {
  require(lambda >= 0.0 && lambda <= 1.0, "schedule: fixed lambda must lie in [0, 1]");
  require(total_steps > 0, "schedule: total_steps must be positive");
  require(lambda_max >= 0.0 && lambda_max <= 1.0, "schedule: lambda_max must lie in [0, 1]");
  AggregationSchedule s;
  s.mode_ = Mode::kFixed;
  s.fixed_lambda_ = lambda;
  s.total_steps_ = total_steps;
  s.lambda_max_ = lambda_max;
  return s;
}

AggregationSchedule AggregationSchedule::adaptive(int total_steps, double growth_base,
                                                  double lambda_max) {
  require(total_steps > 0, "schedule: total_steps must be positive");
  require(growth_base > 0.0, "schedule: growth_base must be positive");
  require(lambda_max >= 0.0 && lambda_max <= 1.0, "schedule: lambda_max must lie in [0, 1]");
  AggregationSchedule s;
  s.mode_ = Mode::kAdaptive;
  s.total_steps_ = total_steps;
  s.growth_base_ = growth_base;
  s.lambda_max_ = lambda_max;
  return s;
}

double AggregationSchedule::lambda_at(int step) const {
  require(step >= 0 && step <= total_steps_,
          "schedule: step " + std::to_string(step) + " outside [0, " +
              std::to_string(total_steps_) + "]");
  if (mode_ == Mode::kFixed) return fixed_lambda_;
  const double b = growth_base_;
  return 0.5 * (std::log(static_cast<double>(step) + b) - std::log(b)) /
         (std::log(static_cast<double>(total_steps_) + b) - std::log(b));
}

double AggregationSchedule::lambda_ign_at(int step) const {
  const double ign = lambda_max_ - lambda_at(step);
  return ign < 0.0 ? 0.0 : ign;
}

double AggregationSchedule::crossover_step() const {
  require(mode_ == Mode::kAdaptive, "schedule: crossover_step is defined for adaptive mode");
  const double b = growth_base_;
  const double s = static_cast<double>(total_steps_);
  return b * std::pow((s + b) / b, lambda_max_) - b;
}

}  // namespace boicr

#pragma once

#include <memory>

#include "safechain/env/environment.hpp"

namespace safechain::env {

/// Single-step bandit with a closed-form optimum, used to validate learners.
///
/// Observation is the constant [1]; the action a (clipped to [-1, 1]) earns
/// reward -(a - target)^2 and cost slope * (a + 1) >= 0.
class QuadraticBandit final : public Environment {
 public:
  QuadraticBandit(double target, double cost_slope) : target_(target), slope_(cost_slope) {}

  std::size_t observation_dim() const override { return 1; }
  std::size_t action_dim() const override { return 1; }
  std::size_t horizon() const override { return 1; }
  Eigen::VectorXd reset(std::uint64_t) override { return Eigen::VectorXd::Ones(1); }
  Transition step(std::span<const double> action) override;
  std::unique_ptr<Environment> clone() const override {
    return std::make_unique<QuadraticBandit>(*this);
  }

  double target() const { return target_; }
  double cost_slope() const { return slope_; }
  double cost_at(double a) const;
  /// Best action subject to cost_at(a) <= limit.
  double constrained_optimum(double limit) const;

 private:
  double target_;
  double slope_;
};

}  // namespace safechain::env

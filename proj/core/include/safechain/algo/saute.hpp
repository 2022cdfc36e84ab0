#pragma once

#include <memory>

#include "safechain/env/environment.hpp"

namespace safechain::algo {

/// Safety-budget augmentation. The observation gains the remaining normalized
/// budget z (z_0 = 1, z_{t+1} = (z_t d - cost_t) / (d gamma)); while z_t <= 0
/// the reward of step t is replaced by `penalty`. Costs pass through and
/// `raw_reward` keeps the base reward.
class SauteEnv final : public env::Environment {
 public:
  SauteEnv(std::unique_ptr<env::Environment> base, double cost_limit, double gamma, double penalty);
  SauteEnv(const SauteEnv& other);

  std::size_t observation_dim() const override { return base_->observation_dim() + 1; }
  std::size_t action_dim() const override { return base_->action_dim(); }
  std::size_t horizon() const override { return base_->horizon(); }
  Eigen::VectorXd reset(std::uint64_t seed) override;
  env::Transition step(std::span<const double> action) override;
  std::unique_ptr<env::Environment> clone() const override;

  double budget() const { return z_; }
  const env::Environment& base() const { return *base_; }

 private:
  Eigen::VectorXd augment(const Eigen::VectorXd& obs) const;

  std::unique_ptr<env::Environment> base_;
  double d_;
  double gamma_;
  double penalty_;
  double z_ = 1.0;
};

std::unique_ptr<env::Environment> saute_wrap(const env::Environment& base, double cost_limit,
                                             double gamma, double penalty);

}  // namespace safechain::algo

#include "safechain/algo/saute.hpp"

#include <cmath>
#include <stdexcept>

namespace safechain::algo {

SauteEnv::SauteEnv(std::unique_ptr<env::Environment> base, double cost_limit, double gamma,
                   double penalty)
    : base_(std::move(base)), d_(cost_limit), gamma_(gamma), penalty_(penalty) {
  if (!base_) throw std::invalid_argument("SauteEnv: null base environment");
  if (!(cost_limit > 0.0)) throw std::invalid_argument("SauteEnv: cost limit must be > 0");
  if (!(gamma > 0.0 && gamma <= 1.0)) throw std::invalid_argument("SauteEnv: gamma must lie in (0, 1]");
  if (!std::isfinite(penalty)) throw std::invalid_argument("SauteEnv: penalty must be finite");
}

SauteEnv::SauteEnv(const SauteEnv& other)
    : base_(other.base_->clone()),
      d_(other.d_),
      gamma_(other.gamma_),
      penalty_(other.penalty_),
      z_(other.z_) {}

Eigen::VectorXd SauteEnv::augment(const Eigen::VectorXd& obs) const {
  Eigen::VectorXd out(obs.size() + 1);
  out << obs, z_;
  return out;
}

Eigen::VectorXd SauteEnv::reset(std::uint64_t seed) {
  z_ = 1.0;
  return augment(base_->reset(seed));
}

env::Transition SauteEnv::step(std::span<const double> action) {
  env::Transition tr = base_->step(action);
  if (z_ <= 0.0) tr.reward = penalty_;
  z_ = (z_ * d_ - tr.cost) / (d_ * gamma_);
  tr.observation = augment(tr.observation);
  return tr;
}

std::unique_ptr<env::Environment> SauteEnv::clone() const {
  return std::make_unique<SauteEnv>(*this);
}

std::unique_ptr<env::Environment> saute_wrap(const env::Environment& base, double cost_limit,
                                             double gamma, double penalty) {
  return std::make_unique<SauteEnv>(base.clone(), cost_limit, gamma, penalty);
}

}  // namespace safechain::algo

#include "safechain/env/bandit.hpp"

#include <algorithm>
#include <stdexcept>

namespace safechain::env {

double QuadraticBandit::cost_at(double a) const {
  return slope_ * (std::clamp(a, -1.0, 1.0) + 1.0);
}

double QuadraticBandit::constrained_optimum(double limit) const {
  const double boundary = slope_ > 0.0 ? limit / slope_ - 1.0 : target_;
  return std::clamp(std::min(target_, boundary), -1.0, 1.0);
}

Transition QuadraticBandit::step(std::span<const double> action) {
  if (action.size() != 1) throw std::invalid_argument("QuadraticBandit: action must be 1-D");
  const double a = std::clamp(action[0], -1.0, 1.0);
  Transition tr;
  tr.observation = Eigen::VectorXd::Ones(1);
  tr.reward = -(a - target_) * (a - target_);
  tr.raw_reward = tr.reward;
  tr.cost = cost_at(a);
  tr.done = true;
  return tr;
}

}  // namespace safechain::env

#include "safechain/reshape/reshape.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace safechain::reshape {

void ReshapeConfig::validate() const {
  if (!(beta >= 0.0) || !std::isfinite(beta)) {
    throw std::invalid_argument("ReshapeConfig: beta must be finite and >= 0");
  }
  if (!(epsilon > 0.0 && epsilon < 1.0)) {
    throw std::invalid_argument("ReshapeConfig: epsilon must lie in (0, 1)");
  }
}

double compute_rho(double j_c_hat, double d, double p_violate, const ReshapeConfig& config) {
  if (!(p_violate >= 0.0 && p_violate <= 1.0)) {
    throw std::invalid_argument("compute_rho: p_violate must lie in [0, 1]");
  }
  config.validate();
  // Adding +0.0 turns a -0.0 product into +0.0.
  if (j_c_hat > d) return config.beta * p_violate + 0.0;
  return -config.beta * (1.0 - p_violate) + 0.0;
}

ReshapeOutcome reshape(double j_c_hat, double d, double rho, const ReshapeConfig& config) {
  if (!(d > 0.0)) throw std::invalid_argument("reshape: d must be > 0");
  config.validate();
  ReshapeOutcome out;
  out.rho = rho;
  out.multiplier = 1.0 + std::max(rho, -config.epsilon);
  out.j_c_tilde = j_c_hat * out.multiplier;
  out.d_tilde = d * out.multiplier;
  out.residual = out.multiplier * (j_c_hat - d);
  return out;
}

}  // namespace safechain::reshape

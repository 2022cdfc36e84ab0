#pragma once

namespace safechain::reshape {

struct ReshapeConfig {
  double beta = 100.0;
  double epsilon = 0.15;

  /// Throws unless beta >= 0 and 0 < epsilon < 1.
  void validate() const;
};

struct ReshapeOutcome {
  double rho = 0.0;
  double multiplier = 1.0;  // 1 + max(rho, -epsilon)
  double j_c_tilde = 0.0;
  double d_tilde = 0.0;
  /// multiplier * (J_C - d); carries the sign of the unreshaped residual.
  double residual = 0.0;
};

/// beta * p_violate when the empirical cost exceeds d, otherwise
/// -beta * (1 - p_violate). Throws if p_violate is outside [0, 1].
double compute_rho(double j_c_hat, double d, double p_violate, const ReshapeConfig& config);

/// Scales the cost estimate and the threshold by the same clipped multiplier.
/// Throws if d <= 0.
ReshapeOutcome reshape(double j_c_hat, double d, double rho, const ReshapeConfig& config);

}  // namespace safechain::reshape

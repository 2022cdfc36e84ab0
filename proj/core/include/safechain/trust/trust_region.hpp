#pragma once

#include <functional>
#include <string_view>

#include <Eigen/Dense>

namespace safechain::trust {

/// v -> H v for a symmetric positive (semi)definite H.
using Hvp = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

struct CgReport {
  Eigen::VectorXd x;
  int iterations = 0;
  double residual_norm = 0.0;
  bool converged = false;
};

/// Approximately solves H x = rhs. Stops once ||H x - rhs|| <= tol * ||rhs||
/// or after max_iters iterations. Throws std::runtime_error on NaN iterates.
CgReport conjugate_gradient(const Hvp& hvp, const Eigen::VectorXd& rhs, int max_iters = 20,
                            double tol = 1e-10);

/// min_x g'x  s.t.  c + b'x <= 0,  x'Hx <= delta
struct LinearizedProblem {
  Eigen::VectorXd g;
  Eigen::VectorXd b;
  double c = 0.0;
  double delta = 0.01;
  Hvp hvp;

  void validate() const;
};

enum class Branch { feasible_a, feasible_b, recovery };
std::string_view to_string(Branch b);

struct DualSolution {
  double lambda = 0.0;
  double nu = 0.0;
  Branch branch = Branch::feasible_b;
  double q = 0.0;  // g' H^-1 g
  double r = 0.0;  // g' H^-1 b
  double s = 0.0;  // b' H^-1 b
  Eigen::VectorXd hinv_g;  // filled by the problem overload
  Eigen::VectorXd hinv_b;
};

inline constexpr double kDegenerateS = 1e-12;
inline constexpr double kMinLambda = 1e-12;

/// Dual of the linearized problem from its scalar summaries.
DualSolution solve_dual(double q, double r, double s, double c, double delta);

/// Runs CG for H^-1 g and H^-1 b, then solves the dual.
DualSolution solve_dual(const LinearizedProblem& problem, int cg_iters = 20, double cg_tol = 1e-10);

/// Primal step for a solved dual. Feasible branches give
/// x = -(1/lambda) H^-1 (g + nu b); the recovery branch gives
/// x = -sqrt(2 delta / s) H^-1 b. Throws if lambda < kMinLambda on a
/// feasible branch.
Eigen::VectorXd compute_step(const LinearizedProblem& problem, const DualSolution& dual);

struct LineSearchOptions {
  double decay = 0.8;
  int max_backtracks = 10;
};

struct LineSearchInputs {
  Eigen::VectorXd params;
  Eigen::VectorXd direction;
  /// Reward surrogate (larger is better) at candidate parameters.
  std::function<double(const Eigen::VectorXd&)> surrogate;
  /// Mean KL(old || candidate) over the batch.
  std::function<double(const Eigen::VectorXd&)> kl;
  /// Cost surrogate at candidate parameters.
  std::function<double(const Eigen::VectorXd&)> cost;
  double delta = 0.01;
  double c = 0.0;  // constraint residual, possibly reshaped
  bool recovery = false;
  /// Unconstrained updates (plain TRPO) skip the cost checks.
  bool constrained = true;
};

struct StepResult {
  Eigen::VectorXd params;
  bool accepted = false;
  double kl = 0.0;
  double improvement = 0.0;
  double cost_change = 0.0;
  int backtracks = 0;
};

/// Backtracks over step fractions decay^j, j = 0..max_backtracks, and takes
/// the first candidate that keeps KL within delta and meets the reward / cost
/// conditions. Returns the old parameters when no candidate qualifies.
StepResult line_search(const LineSearchInputs& in, const LineSearchOptions& options = {});

}  // namespace safechain::trust

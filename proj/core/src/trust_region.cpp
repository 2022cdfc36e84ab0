#include "safechain/trust/trust_region.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace safechain::trust {

CgReport conjugate_gradient(const Hvp& hvp, const Eigen::VectorXd& rhs, int max_iters,
                            double tol) {
  if (!rhs.allFinite()) throw std::invalid_argument("conjugate_gradient: non-finite rhs");
  if (max_iters < 0) throw std::invalid_argument("conjugate_gradient: negative max_iters");
  CgReport rep;
  rep.x = Eigen::VectorXd::Zero(rhs.size());
  const double rhs_norm = rhs.norm();
  if (rhs_norm == 0.0) {
    rep.converged = true;
    return rep;
  }
  Eigen::VectorXd r = rhs;
  Eigen::VectorXd p = r;
  double rr = r.squaredNorm();
  const double stop = tol * rhs_norm;
  for (int k = 0; k < max_iters; ++k) {
    const Eigen::VectorXd hp = hvp(p);
    const double php = p.dot(hp);
    if (!std::isfinite(php)) throw std::runtime_error("conjugate_gradient: NaN in iterates");
    if (php <= 0.0) break;  // no further progress along p
    const double alpha = rr / php;
    rep.x += alpha * p;
    r -= alpha * hp;
    ++rep.iterations;
    const double rr_next = r.squaredNorm();
    if (!std::isfinite(rr_next) || !rep.x.allFinite()) {
      throw std::runtime_error("conjugate_gradient: NaN in iterates");
    }
    if (std::sqrt(rr_next) <= stop) {
      rr = rr_next;
      break;
    }
    p = r + (rr_next / rr) * p;
    rr = rr_next;
  }
  rep.residual_norm = std::sqrt(rr);
  rep.converged = rep.residual_norm <= stop;
  return rep;
}

void LinearizedProblem::validate() const {
  if (g.size() != b.size()) throw std::invalid_argument("LinearizedProblem: g and b differ in length");
  if (!(delta > 0.0)) throw std::invalid_argument("LinearizedProblem: delta must be > 0");
  if (!hvp) throw std::invalid_argument("LinearizedProblem: missing Hessian-vector product");
  if (!g.allFinite() || !b.allFinite() || !std::isfinite(c)) {
    throw std::invalid_argument("LinearizedProblem: non-finite input");
  }
}

std::string_view to_string(Branch b) {
  switch (b) {
    case Branch::feasible_a: return "feasible_a";
    case Branch::feasible_b: return "feasible_b";
    case Branch::recovery: return "recovery";
  }
  return "unknown";
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct Interval {
  double lo = 0.0;
  double hi = kInf;
  bool empty = false;
};

double project(double x, const Interval& iv) { return std::clamp(x, iv.lo, iv.hi); }

}  // namespace

DualSolution solve_dual(double q, double r, double s, double c, double delta) {
  if (!(delta > 0.0)) throw std::invalid_argument("solve_dual: delta must be > 0");
  if (!std::isfinite(q) || !std::isfinite(r) || !std::isfinite(s) || !std::isfinite(c)) {
    throw std::invalid_argument("solve_dual: non-finite input");
  }
  DualSolution sol;
  sol.q = q;
  sol.r = r;
  sol.s = s;
  q = std::max(q, 0.0);

  const auto trpo = [&] {
    sol.branch = Branch::feasible_b;
    sol.lambda = std::sqrt(q / delta);
    sol.nu = 0.0;
    return sol;
  };
  if (s <= kDegenerateS) return trpo();

  const double slack = delta - c * c / s;  // > 0 iff the trust region meets c + b'x <= 0
  if (c > 0.0 && slack <= 0.0) {
    sol.branch = Branch::recovery;
    return sol;
  }
  if (c < 0.0 && slack < 0.0) return trpo();  // whole trust region is feasible

  // Lambda_a = {lambda >= 0 : lambda c - r > 0}, Lambda_b its complement in [0, inf).
  Interval la;
  Interval lb;
  if (c > 0.0) {
    la.lo = std::max(0.0, r / c);
    lb.hi = r / c;
    lb.empty = r < 0.0;
  } else if (c < 0.0) {
    la.hi = r / c;
    la.empty = !(r / c > 0.0);
    lb.lo = std::max(0.0, r / c);
  } else {
    la.empty = !(r < 0.0);
    lb.empty = !la.empty;
  }

  const double qa = std::max(q - r * r / s, 0.0);
  const auto f_a = [&](double lam) {
    return -qa / (2.0 * lam) - 0.5 * lam * slack - r * c / s;
  };
  const auto f_b = [&](double lam) { return -0.5 * (q / lam + lam * delta); };

  double lam_a = 0.0;
  double lam_b = 0.0;
  double val_a = -kInf;
  double val_b = -kInf;
  if (!la.empty) {
    lam_a = project(std::sqrt(qa / slack), la);
    if (lam_a > 0.0) val_a = f_a(lam_a);
  }
  if (!lb.empty) {
    lam_b = project(std::sqrt(q / delta), lb);
    if (lam_b > 0.0) val_b = f_b(lam_b);
  }
  if (la.empty && lb.empty) return trpo();

  if (!la.empty && (lb.empty || val_a >= val_b)) {
    sol.branch = Branch::feasible_a;
    sol.lambda = lam_a;
  } else {
    sol.branch = Branch::feasible_b;
    sol.lambda = lam_b;
  }
  sol.nu = std::max((sol.lambda * c - r) / s, 0.0);
  return sol;
}

DualSolution solve_dual(const LinearizedProblem& problem, int cg_iters, double cg_tol) {
  problem.validate();
  Eigen::VectorXd hinv_g = conjugate_gradient(problem.hvp, problem.g, cg_iters, cg_tol).x;
  Eigen::VectorXd hinv_b = conjugate_gradient(problem.hvp, problem.b, cg_iters, cg_tol).x;
  DualSolution sol = solve_dual(problem.g.dot(hinv_g), problem.g.dot(hinv_b),
                                problem.b.dot(hinv_b), problem.c, problem.delta);
  sol.hinv_g = std::move(hinv_g);
  sol.hinv_b = std::move(hinv_b);
  return sol;
}

Eigen::VectorXd compute_step(const LinearizedProblem& problem, const DualSolution& dual) {
  problem.validate();
  const auto n = problem.g.size();
  const Eigen::VectorXd hinv_b =
      dual.hinv_b.size() == n ? dual.hinv_b : conjugate_gradient(problem.hvp, problem.b).x;
  if (dual.branch == Branch::recovery) {
    if (!(dual.s > 0.0)) throw std::runtime_error("compute_step: recovery with s <= 0");
    return -std::sqrt(2.0 * problem.delta / dual.s) * hinv_b;
  }
  if (dual.lambda < kMinLambda) {
    throw std::runtime_error("compute_step: degenerate dual (lambda below 1e-12)");
  }
  const Eigen::VectorXd hinv_g =
      dual.hinv_g.size() == n ? dual.hinv_g : conjugate_gradient(problem.hvp, problem.g).x;
  return -(hinv_g + dual.nu * hinv_b) / dual.lambda;
}

StepResult line_search(const LineSearchInputs& in, const LineSearchOptions& options) {
  if (in.params.size() != in.direction.size()) {
    throw std::invalid_argument("line_search: params and direction differ in length");
  }
  if (!in.surrogate || !in.kl || (in.constrained && !in.cost)) {
    throw std::invalid_argument("line_search: missing evaluator");
  }
  const double base_surrogate = in.surrogate(in.params);
  const double base_cost = in.constrained ? in.cost(in.params) : 0.0;
  const double cost_allowance = std::max(-in.c, 0.0);

  double frac = 1.0;
  for (int j = 0; j <= options.max_backtracks; ++j, frac *= options.decay) {
    Eigen::VectorXd candidate = in.params + frac * in.direction;
    const double kl = in.kl(candidate);
    if (!std::isfinite(kl) || kl > in.delta) continue;
    const double improvement = in.surrogate(candidate) - base_surrogate;
    if (!std::isfinite(improvement)) continue;
    double cost_change = 0.0;
    bool ok = true;
    if (!in.constrained) {
      ok = improvement >= 0.0;
    } else {
      cost_change = in.cost(candidate) - base_cost;
      if (!std::isfinite(cost_change)) continue;
      if (in.recovery) {
        ok = cost_change < 0.0;
      } else {
        ok = cost_change <= cost_allowance && (in.c >= 0.0 || improvement >= 0.0);
      }
    }
    if (!ok) continue;
    StepResult res;
    res.params = std::move(candidate);
    res.accepted = true;
    res.kl = kl;
    res.improvement = improvement;
    res.cost_change = cost_change;
    res.backtracks = j;
    return res;
  }
  StepResult res;
  res.params = in.params;
  res.backtracks = options.max_backtracks;
  return res;
}

}  // namespace safechain::trust

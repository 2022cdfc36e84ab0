#include "safechain/dist/atoms.hpp"

#include <algorithm>
#include <string>

namespace safechain::dist {

AtomGrid::AtomGrid(std::size_t n, double v_min, double v_max)
    : n_(n), v_min_(v_min), v_max_(v_max) {
  if (n < 2) throw std::invalid_argument("AtomGrid: need at least 2 atoms");
  if (!(std::isfinite(v_min) && std::isfinite(v_max) && v_min < v_max)) {
    throw std::invalid_argument("AtomGrid: require finite v_min < v_max");
  }
}

double AtomGrid::atom(std::size_t i) const {
  if (i >= n_) throw std::out_of_range("AtomGrid: atom index");
  if (i + 1 == n_) return v_max_;
  return v_min_ + static_cast<double>(i) * spacing();
}

Eigen::VectorXd AtomGrid::atoms() const {
  Eigen::VectorXd z(static_cast<Eigen::Index>(n_));
  for (std::size_t i = 0; i < n_; ++i) z[static_cast<Eigen::Index>(i)] = atom(i);
  return z;
}

void AtomicDistribution::validate() const {
  if (static_cast<std::size_t>(probs.size()) != grid.size()) {
    throw std::invalid_argument("AtomicDistribution: probs length != atom count");
  }
  if ((probs.array() < 0.0).any() || !probs.allFinite()) {
    throw std::invalid_argument("AtomicDistribution: probabilities must be finite and >= 0");
  }
  if (std::abs(probs.sum() - 1.0) > 1e-6) {
    throw std::invalid_argument("AtomicDistribution: probabilities do not sum to 1");
  }
}

Moments dist_mean_var(const AtomicDistribution& d) {
  const Eigen::VectorXd z = d.grid.atoms();
  Moments m;
  m.mean = d.probs.dot(z);
  m.variance = std::max(d.probs.dot((z.array() - m.mean).square().matrix()), kVarianceFloor);
  return m;
}

double prob_below(const AtomicDistribution& d, double threshold) {
  const std::size_t n = d.grid.size();
  if (threshold < d.grid.v_min()) return 0.0;
  if (threshold >= d.grid.v_max()) return 1.0;
  const double pos = (threshold - d.grid.v_min()) / d.grid.spacing();
  auto i = static_cast<std::size_t>(std::floor(pos));
  i = std::min(i, n - 2);
  double cdf = 0.0;
  for (std::size_t j = 0; j <= i; ++j) cdf += d.probs[static_cast<Eigen::Index>(j)];
  const double frac = std::clamp(pos - static_cast<double>(i), 0.0, 1.0);
  cdf += frac * d.probs[static_cast<Eigen::Index>(i + 1)];
  return std::clamp(cdf, 0.0, 1.0);
}

double prob_exceeds(const AtomicDistribution& d, double threshold) {
  return 1.0 - prob_below(d, threshold);
}

double entropy(const AtomicDistribution& d) {
  double h = 0.0;
  for (Eigen::Index i = 0; i < d.probs.size(); ++i) {
    const double p = d.probs[i];
    if (p > 0.0) h -= p * std::log(p);
  }
  return h;
}

ValueHead ValueHead::create(std::size_t obs_dim, std::vector<std::size_t> hidden, AtomGrid grid,
                            HeadRole role, std::mt19937_64& rng) {
  ValueHead h;
  h.spec.input_dim = obs_dim;
  h.spec.hidden_dims = std::move(hidden);
  h.spec.output_dim = grid.size();
  h.spec.validate();
  // Small output gain keeps the initial distribution close to uniform.
  h.params = nn::init_params(h.spec, rng, 0.01);
  h.grid = grid;
  h.role = role;
  return h;
}

Eigen::MatrixXd dist_forward_batch(const ValueHead& head, const Eigen::MatrixXd& observations) {
  if (head.spec.output_dim != head.grid.size()) {
    throw std::invalid_argument("dist_forward: head output does not match grid");
  }
  Eigen::MatrixXd logits = nn::forward_batch<double>(
      head.spec, {head.params.data(), static_cast<std::size_t>(head.params.size())}, observations);
  for (Eigen::Index i = 0; i < logits.cols(); ++i) {
    auto col = logits.col(i);
    col.array() = (col.array() - col.maxCoeff()).exp();
    col /= col.sum();
  }
  return logits;
}

AtomicDistribution dist_forward(const ValueHead& head, const Eigen::VectorXd& observation) {
  AtomicDistribution d{head.grid, dist_forward_batch(head, observation).col(0)};
  return d;
}

Eigen::VectorXd dist_means(const ValueHead& head, const Eigen::MatrixXd& observations) {
  return dist_forward_batch(head, observations).transpose() * head.grid.atoms();
}

nn::GradientTape nll_loss(const ValueHead& head, const Eigen::MatrixXd& states,
                          const Eigen::VectorXd& targets) {
  if (!targets.allFinite()) throw std::invalid_argument("nll_loss: non-finite targets");
  const Eigen::VectorXd atoms = head.grid.atoms();
  const nn::MlpSpec spec = head.spec;
  return nn::GradientTape::record(head.params, [spec, atoms, states, targets](auto p, auto g) {
    using S = typename decltype(g)::element_type;
    return nll_objective<S>(spec, atoms, p, g, states, targets);
  });
}

}  // namespace safechain::dist

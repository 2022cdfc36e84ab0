#include "safechain/algo/critic.hpp"

#include <algorithm>
#include <stdexcept>

namespace safechain::algo {

namespace {

std::span<const double> cspan(const Eigen::VectorXd& v) {
  return {v.data(), static_cast<std::size_t>(v.size())};
}
std::span<double> mspan(Eigen::VectorXd& v) {
  return {v.data(), static_cast<std::size_t>(v.size())};
}

/// Column indices for one optimisation step.
std::vector<Eigen::Index> draw_minibatch(Eigen::Index n, std::size_t size, std::mt19937_64& rng) {
  std::vector<Eigen::Index> idx;
  if (size == 0 || static_cast<Eigen::Index>(size) >= n) {
    idx.resize(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) idx[static_cast<std::size_t>(i)] = i;
    return idx;
  }
  std::uniform_int_distribution<Eigen::Index> pick(0, n - 1);
  idx.resize(size);
  for (auto& i : idx) i = pick(rng);
  return idx;
}

void check_batch(const Eigen::MatrixXd& states, const Eigen::VectorXd& targets) {
  if (states.cols() == 0 || states.cols() != targets.size()) {
    throw std::invalid_argument("critic: states and targets differ in count");
  }
  if (!targets.allFinite()) throw std::invalid_argument("critic: non-finite targets");
}

double mse_objective(const nn::MlpSpec& spec, std::span<const double> params, std::span<double> grad,
                     const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
  nn::MlpTrace<double> trace;
  const Eigen::MatrixXd out =
      nn::forward_batch<double>(spec, params, x, grad.empty() ? nullptr : &trace);
  const Eigen::RowVectorXd err = out.row(0) - y.transpose();
  const auto n = static_cast<double>(x.cols());
  if (!grad.empty()) {
    const Eigen::MatrixXd d_out = err / n;
    nn::backward_batch<double>(spec, params, trace, d_out, grad);
  }
  return 0.5 * err.squaredNorm() / n;
}

}  // namespace

void TargetRange::observe(const Eigen::VectorXd& targets, std::size_t warmup_epochs) {
  if (seen_ >= warmup_epochs && seen_ > 0) return;
  if (targets.size() == 0) return;
  if (seen_ == 0) {
    lo_ = targets.minCoeff();
    hi_ = targets.maxCoeff();
  } else {
    lo_ = std::min(lo_, targets.minCoeff());
    hi_ = std::max(hi_, targets.maxCoeff());
  }
  ++seen_;
}

std::pair<double, double> TargetRange::bounds(double margin) const {
  double lo = lo_;
  double hi = hi_;
  if (hi - lo < 1e-8) {
    lo -= 1.0;
    hi += 1.0;
  }
  const double pad = margin * (hi - lo);
  return {lo - pad, hi + pad};
}

ScalarCritic::ScalarCritic(std::size_t obs_dim, std::vector<std::size_t> hidden,
                           CriticOptions options, std::mt19937_64& rng)
    : adam_(options.learning_rate), options_(options) {
  spec_.input_dim = obs_dim;
  spec_.hidden_dims = std::move(hidden);
  spec_.output_dim = 1;
  spec_.validate();
  params_ = nn::init_params(spec_, rng, 1.0);
}

double ScalarCritic::fit(const Eigen::MatrixXd& states, const Eigen::VectorXd& targets,
                         std::mt19937_64& rng) {
  check_batch(states, targets);
  range_.observe(targets, options_.warmup_epochs);
  const auto [lo, hi] = range_.bounds(options_.range_margin);
  offset_ = 0.5 * (lo + hi);
  scale_ = 0.5 * (hi - lo);
  const Eigen::VectorXd scaled = (targets.array() - offset_) / scale_;

  Eigen::VectorXd grad(params_.size());
  for (std::size_t k = 0; k < options_.steps; ++k) {
    const auto idx = draw_minibatch(states.cols(), options_.minibatch, rng);
    const Eigen::MatrixXd x = states(Eigen::all, idx);
    const Eigen::VectorXd y = scaled(idx);
    grad.setZero();
    mse_objective(spec_, cspan(params_), mspan(grad), x, y);
    adam_.step(params_, grad);
  }
  return loss(states, targets);
}

Eigen::VectorXd ScalarCritic::values(const Eigen::MatrixXd& states) const {
  const Eigen::MatrixXd out = nn::forward_batch<double>(spec_, cspan(params_), states);
  return (out.row(0).transpose().array() * scale_ + offset_).matrix();
}

double ScalarCritic::loss(const Eigen::MatrixXd& states, const Eigen::VectorXd& targets) const {
  check_batch(states, targets);
  const Eigen::VectorXd scaled = (targets.array() - offset_) / scale_;
  return mse_objective(spec_, cspan(params_), {}, states, scaled);
}

DistributionalCritic::DistributionalCritic(std::size_t obs_dim, std::vector<std::size_t> hidden,
                                           std::size_t num_atoms, dist::HeadRole role,
                                           CriticOptions options, std::mt19937_64& rng)
    : adam_(options.learning_rate), options_(options) {
  head_ = dist::ValueHead::create(obs_dim, std::move(hidden), dist::AtomGrid(num_atoms, -1.0, 1.0),
                                  role, rng);
}

double DistributionalCritic::fit(const Eigen::MatrixXd& states, const Eigen::VectorXd& targets,
                                 std::mt19937_64& rng) {
  check_batch(states, targets);
  range_.observe(targets, options_.warmup_epochs);
  const auto [lo, hi] = range_.bounds(options_.range_margin);
  head_.grid = dist::AtomGrid(head_.grid.size(), lo, hi);
  const Eigen::VectorXd atoms = head_.grid.atoms();
  // Targets outside the frozen support are projected onto its end atoms.
  const Eigen::VectorXd clipped = targets.cwiseMax(lo).cwiseMin(hi);

  Eigen::VectorXd grad(head_.params.size());
  for (std::size_t k = 0; k < options_.steps; ++k) {
    const auto idx = draw_minibatch(states.cols(), options_.minibatch, rng);
    const Eigen::MatrixXd x = states(Eigen::all, idx);
    const Eigen::VectorXd y = clipped(idx);
    grad.setZero();
    dist::nll_objective<double>(head_.spec, atoms, cspan(head_.params), mspan(grad), x, y);
    adam_.step(head_.params, grad);
  }
  return loss(states, targets);
}

Eigen::VectorXd DistributionalCritic::values(const Eigen::MatrixXd& states) const {
  return dist::dist_means(head_, states);
}

double DistributionalCritic::loss(const Eigen::MatrixXd& states,
                                  const Eigen::VectorXd& targets) const {
  check_batch(states, targets);
  return dist::nll_objective<double>(head_.spec, head_.grid.atoms(), cspan(head_.params), {},
                                     states, targets);
}

dist::AtomicDistribution DistributionalCritic::distribution(const Eigen::VectorXd& observation) const {
  return dist::dist_forward(head_, observation);
}

}  // namespace safechain::algo

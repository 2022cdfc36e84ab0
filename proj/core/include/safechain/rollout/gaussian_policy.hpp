#pragma once

#include <cmath>
#include <numbers>
#include <random>
#include <span>
#include <stdexcept>

#include "safechain/nn/mlp.hpp"

namespace safechain::rollout {

/// Diagonal Gaussian policy: an MLP gives the mean, a state-independent
/// log-std vector gives the spread. Flat parameters are the MLP weights
/// followed by the log-std entries.
struct GaussianPolicy {
  nn::MlpSpec spec;
  nn::FlatParams params;
  double action_low = -1.0;
  double action_high = 1.0;

  static GaussianPolicy create(std::size_t obs_dim, std::size_t action_dim,
                               std::vector<std::size_t> hidden, double init_log_std,
                               std::mt19937_64& rng);

  std::size_t action_dim() const { return spec.output_dim; }
  std::size_t net_params() const { return spec.num_params(); }
  std::size_t num_params() const { return spec.num_params() + spec.output_dim; }

  Eigen::VectorXd log_std() const {
    return params.tail(static_cast<Eigen::Index>(action_dim()));
  }
  Eigen::VectorXd mean(const Eigen::VectorXd& obs) const;
  Eigen::MatrixXd mean_batch(const Eigen::MatrixXd& obs) const;
  double log_prob(const Eigen::VectorXd& obs, const Eigen::VectorXd& action) const;
  /// Differential entropy of the action distribution (state independent).
  double entropy() const;
  /// Raw (unclipped) sample; pass to `clip` before stepping an environment.
  Eigen::VectorXd sample(const Eigen::VectorXd& obs, std::mt19937_64& rng) const;
  Eigen::VectorXd clip(const Eigen::VectorXd& raw) const {
    return raw.cwiseMax(action_low).cwiseMin(action_high);
  }
};

inline double gaussian_log_prob(const Eigen::VectorXd& mean, const Eigen::VectorXd& log_std,
                                const Eigen::VectorXd& action) {
  double lp = 0.0;
  for (Eigen::Index j = 0; j < mean.size(); ++j) {
    const double z = (action[j] - mean[j]) * std::exp(-log_std[j]);
    lp += -0.5 * z * z - log_std[j] - 0.5 * std::log(2.0 * std::numbers::pi);
  }
  return lp;
}

namespace detail {

inline void check_policy_params(const nn::MlpSpec& spec, std::size_t n) {
  if (n != spec.num_params() + spec.output_dim) {
    throw std::invalid_argument("policy: parameter length mismatch");
  }
}

}  // namespace detail

/// Mean over samples of KL(old || new) for diagonal Gaussians; `grad` may be
/// empty for a value-only evaluation. Instantiable for double and nn::Dual.
template <class S>
S mean_kl(const nn::MlpSpec& spec, std::span<const S> params, std::span<S> grad,
          const Eigen::MatrixXd& obs, const Eigen::MatrixXd& old_mean,
          const Eigen::VectorXd& old_log_std) {
  detail::check_policy_params(spec, params.size());
  const std::size_t net = spec.num_params();
  const auto act = static_cast<Eigen::Index>(spec.output_dim);
  const Eigen::Index n = obs.cols();
  if (n == 0) throw std::invalid_argument("mean_kl: empty batch");

  const auto net_params = params.first(net);
  nn::MlpTrace<S> trace;
  const nn::Mat<S> x = obs.cast<S>();
  const nn::Mat<S> mu = nn::forward_batch<S>(spec, net_params, x, grad.empty() ? nullptr : &trace);

  using std::exp;
  using std::log;
  S total(0.0);
  nn::Mat<S> d_mu(act, n);
  std::vector<S> d_log_std(static_cast<std::size_t>(act), S(0.0));
  for (Eigen::Index j = 0; j < act; ++j) {
    const S ls = params[net + static_cast<std::size_t>(j)];
    const S inv_var = exp(S(-2.0) * ls);
    const double var_old = std::exp(2.0 * old_log_std[j]);
    for (Eigen::Index i = 0; i < n; ++i) {
      const S diff = mu(j, i) - old_mean(j, i);
      const S num = S(var_old) + diff * diff;
      total += ls - old_log_std[j] + S(0.5) * num * inv_var - S(0.5);
      d_mu(j, i) = diff * inv_var / static_cast<double>(n);
      d_log_std[static_cast<std::size_t>(j)] += S(1.0) - num * inv_var;
    }
  }
  if (!grad.empty()) {
    nn::backward_batch<S>(spec, net_params, trace, d_mu, grad.first(net));
    for (Eigen::Index j = 0; j < act; ++j) {
      grad[net + static_cast<std::size_t>(j)] +=
          d_log_std[static_cast<std::size_t>(j)] / static_cast<double>(n);
    }
  }
  return total / static_cast<double>(n);
}

/// Importance-weighted surrogate (1/N) sum_i w_i exp(logp_theta(a_i|s_i) - old_logp_i).
/// `grad` may be empty for a value-only evaluation.
template <class S>
S weighted_surrogate(const nn::MlpSpec& spec, std::span<const S> params, std::span<S> grad,
                     const Eigen::MatrixXd& obs, const Eigen::MatrixXd& actions,
                     const Eigen::VectorXd& old_log_probs, const Eigen::VectorXd& weights) {
  detail::check_policy_params(spec, params.size());
  const std::size_t net = spec.num_params();
  const auto act = static_cast<Eigen::Index>(spec.output_dim);
  const Eigen::Index n = obs.cols();
  if (n == 0 || actions.cols() != n || old_log_probs.size() != n || weights.size() != n) {
    throw std::invalid_argument("weighted_surrogate: batch shape mismatch");
  }

  const auto net_params = params.first(net);
  nn::MlpTrace<S> trace;
  const nn::Mat<S> x = obs.cast<S>();
  const nn::Mat<S> mu = nn::forward_batch<S>(spec, net_params, x, grad.empty() ? nullptr : &trace);

  using std::exp;
  std::vector<S> inv_std(static_cast<std::size_t>(act));
  S log_norm(0.0);
  for (Eigen::Index j = 0; j < act; ++j) {
    const S ls = params[net + static_cast<std::size_t>(j)];
    inv_std[static_cast<std::size_t>(j)] = exp(-ls);
    log_norm += ls;
  }
  const double half_log_2pi = 0.5 * std::log(2.0 * std::numbers::pi);

  S total(0.0);
  nn::Mat<S> d_mu(act, n);
  std::vector<S> d_log_std(static_cast<std::size_t>(act), S(0.0));
  for (Eigen::Index i = 0; i < n; ++i) {
    S lp = -log_norm - S(half_log_2pi * static_cast<double>(act));
    for (Eigen::Index j = 0; j < act; ++j) {
      const S z = (S(actions(j, i)) - mu(j, i)) * inv_std[static_cast<std::size_t>(j)];
      lp -= S(0.5) * z * z;
    }
    const S ratio = exp(lp - S(old_log_probs[i]));
    const S term = ratio * weights[i];
    total += term;
    if (!grad.empty()) {
      for (Eigen::Index j = 0; j < act; ++j) {
        const S isd = inv_std[static_cast<std::size_t>(j)];
        const S z = (S(actions(j, i)) - mu(j, i)) * isd;
        d_mu(j, i) = term * z * isd / static_cast<double>(n);
        d_log_std[static_cast<std::size_t>(j)] += term * (z * z - S(1.0));
      }
    }
  }
  if (!grad.empty()) {
    nn::backward_batch<S>(spec, net_params, trace, d_mu, grad.first(net));
    for (Eigen::Index j = 0; j < act; ++j) {
      grad[net + static_cast<std::size_t>(j)] +=
          d_log_std[static_cast<std::size_t>(j)] / static_cast<double>(n);
    }
  }
  return total / static_cast<double>(n);
}

}  // namespace safechain::rollout

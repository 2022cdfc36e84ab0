#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "safechain/env/environment.hpp"
#include "safechain/rollout/gaussian_policy.hpp"

namespace safechain::rollout {

struct Trajectory {
  Eigen::MatrixXd observations;  // obs_dim x T, observation before each action
  Eigen::MatrixXd actions;       // act_dim x T, raw (unclipped) samples
  Eigen::VectorXd log_probs;
  Eigen::VectorXd rewards;       // training signal
  Eigen::VectorXd raw_rewards;   // underlying task reward
  Eigen::VectorXd costs;
  std::vector<bool> dones;
  double discounted_return = 0.0;
  double discounted_raw_return = 0.0;
  double discounted_cost = 0.0;

  std::size_t size() const { return static_cast<std::size_t>(rewards.size()); }
};

struct CollectOptions {
  std::size_t num_episodes = 20;
  std::uint64_t seed = 0;
  double gamma = 0.99;
  bool deterministic = false;  // act with the policy mean
  std::size_t threads = 1;
};

/// Rolls `num_episodes` full episodes. Episode e uses environment seed and
/// noise stream derived from (seed, e) only, so the batch does not depend on
/// the worker count.
std::vector<Trajectory> collect_batch(const GaussianPolicy& policy,
                                      const env::Environment& prototype,
                                      const CollectOptions& options);

/// sum_t gamma^t v_t
double discounted_sum(std::span<const double> values, double gamma);

/// Discounted suffix sums: out_t = sum_{l>=0} gamma^l v_{t+l}.
Eigen::VectorXd rewards_to_go(const Eigen::VectorXd& values, double gamma);

/// Generalized advantage estimates. `values` carries one trailing bootstrap
/// entry (0 at a terminal state).
Eigen::VectorXd gae(const Eigen::VectorXd& rewards, const Eigen::VectorXd& values, double gamma,
                    double lambda);

/// Zero-mean, unit-variance copy (population variance).
Eigen::VectorXd normalize(const Eigen::VectorXd& x);

struct AdvantageBatch {
  Eigen::VectorXd reward_advantages;  // normalized
  Eigen::VectorXd cost_advantages;    // raw level
  Eigen::VectorXd reward_targets;     // discounted reward-to-go
  Eigen::VectorXd cost_targets;       // discounted cost-to-go
  Eigen::VectorXd discount_weights;   // gamma^t of each step within its episode
};

/// Concatenates per-episode GAE for both channels in episode order.
/// `reward_values[e]` and `cost_values[e]` have length T_e + 1.
AdvantageBatch build_advantages(const std::vector<Trajectory>& batch,
                                const std::vector<Eigen::VectorXd>& reward_values,
                                const std::vector<Eigen::VectorXd>& cost_values, double gamma,
                                double lambda);

/// Column-stacked observations / actions and concatenated log-probs.
struct StackedBatch {
  Eigen::MatrixXd observations;
  Eigen::MatrixXd actions;
  Eigen::VectorXd log_probs;
  std::vector<Eigen::Index> episode_starts;
};
StackedBatch stack(const std::vector<Trajectory>& batch);

}  // namespace safechain::rollout

#include <cmath>
#include <stdexcept>
#include <thread>

#include "safechain/rollout/gaussian_policy.hpp"
#include "safechain/rollout/trajectory.hpp"
#include "safechain/seeding.hpp"

namespace safechain::rollout {

GaussianPolicy GaussianPolicy::create(std::size_t obs_dim, std::size_t action_dim,
                                      std::vector<std::size_t> hidden, double init_log_std,
                                      std::mt19937_64& rng) {
  GaussianPolicy p;
  p.spec.input_dim = obs_dim;
  p.spec.hidden_dims = std::move(hidden);
  p.spec.output_dim = action_dim;
  p.spec.validate();
  const nn::FlatParams net = nn::init_params(p.spec, rng, 0.01);
  p.params.resize(static_cast<Eigen::Index>(p.num_params()));
  p.params.head(net.size()) = net;
  p.params.tail(static_cast<Eigen::Index>(action_dim)).setConstant(init_log_std);
  return p;
}

Eigen::VectorXd GaussianPolicy::mean(const Eigen::VectorXd& obs) const {
  return mean_batch(obs).col(0);
}

Eigen::MatrixXd GaussianPolicy::mean_batch(const Eigen::MatrixXd& obs) const {
  detail::check_policy_params(spec, static_cast<std::size_t>(params.size()));
  return nn::forward_batch<double>(spec, {params.data(), net_params()}, obs);
}

double GaussianPolicy::log_prob(const Eigen::VectorXd& obs, const Eigen::VectorXd& action) const {
  return gaussian_log_prob(mean(obs), log_std(), action);
}

double GaussianPolicy::entropy() const {
  const auto ls = log_std();
  return ls.sum() + 0.5 * static_cast<double>(ls.size()) *
                        (1.0 + std::log(2.0 * std::numbers::pi));
}

Eigen::VectorXd GaussianPolicy::sample(const Eigen::VectorXd& obs, std::mt19937_64& rng) const {
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::VectorXd a = mean(obs);
  const auto ls = log_std();
  for (Eigen::Index j = 0; j < a.size(); ++j) a[j] += std::exp(ls[j]) * normal(rng);
  return a;
}

namespace {

Trajectory run_episode(const GaussianPolicy& policy, const env::Environment& prototype,
                       const CollectOptions& opt, std::size_t episode) {
  auto env = prototype.clone();
  std::mt19937_64 noise(derive_seed(opt.seed, episode, 1));
  const std::size_t horizon = env->horizon();
  const auto obs_dim = static_cast<Eigen::Index>(env->observation_dim());
  const auto act_dim = static_cast<Eigen::Index>(env->action_dim());
  if (static_cast<std::size_t>(act_dim) != policy.action_dim() ||
      policy.spec.input_dim != static_cast<std::size_t>(obs_dim)) {
    throw std::invalid_argument("collect_batch: policy does not match environment");
  }

  Trajectory tr;
  tr.observations.resize(obs_dim, static_cast<Eigen::Index>(horizon));
  tr.actions.resize(act_dim, static_cast<Eigen::Index>(horizon));
  tr.log_probs.resize(static_cast<Eigen::Index>(horizon));
  tr.rewards.resize(static_cast<Eigen::Index>(horizon));
  tr.raw_rewards.resize(static_cast<Eigen::Index>(horizon));
  tr.costs.resize(static_cast<Eigen::Index>(horizon));

  Eigen::VectorXd obs = env->reset(derive_seed(opt.seed, episode, 0));
  const Eigen::VectorXd log_std = policy.log_std();
  Eigen::Index t = 0;
  for (; t < static_cast<Eigen::Index>(horizon); ++t) {
    const Eigen::VectorXd mu = policy.mean(obs);
    Eigen::VectorXd raw = mu;
    if (!opt.deterministic) {
      std::normal_distribution<double> normal(0.0, 1.0);
      for (Eigen::Index j = 0; j < raw.size(); ++j) raw[j] += std::exp(log_std[j]) * normal(noise);
    }
    const Eigen::VectorXd applied = policy.clip(raw);
    tr.observations.col(t) = obs;
    tr.actions.col(t) = raw;
    tr.log_probs[t] = gaussian_log_prob(mu, log_std, raw);
    const env::Transition step = env->step({applied.data(), static_cast<std::size_t>(applied.size())});
    tr.rewards[t] = step.reward;
    tr.raw_rewards[t] = step.raw_reward;
    tr.costs[t] = step.cost;
    tr.dones.push_back(step.done);
    obs = step.observation;
    if (step.done) {
      ++t;
      break;
    }
  }
  tr.observations.conservativeResize(Eigen::NoChange, t);
  tr.actions.conservativeResize(Eigen::NoChange, t);
  tr.log_probs.conservativeResize(t);
  tr.rewards.conservativeResize(t);
  tr.raw_rewards.conservativeResize(t);
  tr.costs.conservativeResize(t);
  tr.discounted_return = discounted_sum({tr.rewards.data(), tr.size()}, opt.gamma);
  tr.discounted_raw_return = discounted_sum({tr.raw_rewards.data(), tr.size()}, opt.gamma);
  tr.discounted_cost = discounted_sum({tr.costs.data(), tr.size()}, opt.gamma);
  return tr;
}

}  // namespace

std::vector<Trajectory> collect_batch(const GaussianPolicy& policy,
                                      const env::Environment& prototype,
                                      const CollectOptions& options) {
  if (options.num_episodes == 0) throw std::invalid_argument("collect_batch: num_episodes must be >= 1");
  std::vector<Trajectory> batch(options.num_episodes);
  const std::size_t workers = std::max<std::size_t>(1, std::min(options.threads, options.num_episodes));
  if (workers == 1) {
    for (std::size_t e = 0; e < options.num_episodes; ++e) {
      batch[e] = run_episode(policy, prototype, options, e);
    }
    return batch;
  }
  std::vector<std::exception_ptr> errors(workers);
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t e = w; e < options.num_episodes; e += workers) {
          batch[e] = run_episode(policy, prototype, options, e);
        }
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& err : errors) {
    if (err) std::rethrow_exception(err);
  }
  return batch;
}

double discounted_sum(std::span<const double> values, double gamma) {
  double total = 0.0;
  double w = 1.0;
  for (double v : values) {
    total += w * v;
    w *= gamma;
  }
  return total;
}

Eigen::VectorXd rewards_to_go(const Eigen::VectorXd& values, double gamma) {
  Eigen::VectorXd out(values.size());
  double acc = 0.0;
  for (Eigen::Index t = values.size(); t-- > 0;) {
    acc = values[t] + gamma * acc;
    out[t] = acc;
  }
  return out;
}

Eigen::VectorXd gae(const Eigen::VectorXd& rewards, const Eigen::VectorXd& values, double gamma,
                    double lambda) {
  if (values.size() != rewards.size() + 1) {
    throw std::invalid_argument("gae: values must have one more entry than rewards");
  }
  Eigen::VectorXd adv(rewards.size());
  double acc = 0.0;
  for (Eigen::Index t = rewards.size(); t-- > 0;) {
    const double delta = rewards[t] + gamma * values[t + 1] - values[t];
    acc = delta + gamma * lambda * acc;
    adv[t] = acc;
  }
  return adv;
}

Eigen::VectorXd normalize(const Eigen::VectorXd& x) {
  if (x.size() == 0) return x;
  const double mean = x.mean();
  const Eigen::VectorXd centered = x.array() - mean;
  const double var = centered.squaredNorm() / static_cast<double>(x.size());
  return centered / (std::sqrt(var) + 1e-12);
}

AdvantageBatch build_advantages(const std::vector<Trajectory>& batch,
                                const std::vector<Eigen::VectorXd>& reward_values,
                                const std::vector<Eigen::VectorXd>& cost_values, double gamma,
                                double lambda) {
  if (reward_values.size() != batch.size() || cost_values.size() != batch.size()) {
    throw std::invalid_argument("build_advantages: one value vector per trajectory required");
  }
  Eigen::Index total = 0;
  for (const auto& tr : batch) total += static_cast<Eigen::Index>(tr.size());
  AdvantageBatch out;
  Eigen::VectorXd raw_adv(total);
  out.cost_advantages.resize(total);
  out.reward_targets.resize(total);
  out.cost_targets.resize(total);
  out.discount_weights.resize(total);
  Eigen::Index k = 0;
  for (std::size_t e = 0; e < batch.size(); ++e) {
    const auto& tr = batch[e];
    const auto n = static_cast<Eigen::Index>(tr.size());
    raw_adv.segment(k, n) = gae(tr.rewards, reward_values[e], gamma, lambda);
    out.cost_advantages.segment(k, n) = gae(tr.costs, cost_values[e], gamma, lambda);
    out.reward_targets.segment(k, n) = rewards_to_go(tr.rewards, gamma);
    out.cost_targets.segment(k, n) = rewards_to_go(tr.costs, gamma);
    double w = 1.0;
    for (Eigen::Index t = 0; t < n; ++t) {
      out.discount_weights[k + t] = w;
      w *= gamma;
    }
    k += n;
  }
  out.reward_advantages = normalize(raw_adv);
  return out;
}

StackedBatch stack(const std::vector<Trajectory>& batch) {
  StackedBatch s;
  if (batch.empty()) return s;
  Eigen::Index total = 0;
  for (const auto& tr : batch) total += static_cast<Eigen::Index>(tr.size());
  s.observations.resize(batch.front().observations.rows(), total);
  s.actions.resize(batch.front().actions.rows(), total);
  s.log_probs.resize(total);
  Eigen::Index k = 0;
  for (const auto& tr : batch) {
    const auto n = static_cast<Eigen::Index>(tr.size());
    s.episode_starts.push_back(k);
    s.observations.middleCols(k, n) = tr.observations;
    s.actions.middleCols(k, n) = tr.actions;
    s.log_probs.segment(k, n) = tr.log_probs;
    k += n;
  }
  return s;
}

}  // namespace safechain::rollout

#include <gtest/gtest.h>

#include "safechain/env/bandit.hpp"
#include "safechain/env/supply_chain.hpp"
#include "safechain/nn/tape.hpp"
#include "safechain/rollout/trajectory.hpp"
#include "test_support.hpp"

using namespace safechain;
using safechain::testing::fd_gradient;
using safechain::testing::random_matrix;
using safechain::testing::random_vector;
using safechain::testing::rel_error;

namespace {

rollout::GaussianPolicy make_policy(std::size_t obs, std::size_t act, std::mt19937_64& rng) {
  auto p = rollout::GaussianPolicy::create(obs, act, {6, 5}, -0.3, rng);
  // Perturb away from the near-zero output init so gradients are generic.
  p.params += 0.3 * random_vector(p.params.size(), rng);
  return p;
}

std::span<const double> cs(const Eigen::VectorXd& v) {
  return {v.data(), static_cast<std::size_t>(v.size())};
}

env::SupplyChainConfig small_chain() {
  env::SupplyChainConfig c;
  c.num_stages = 3;
  c.horizon = 12;
  c.lead_times = {1, 2};
  c.unit_price = {2.0, 1.5, 1.0};
  c.procurement_cost = {1.5, 1.0, 0.5};
  c.unfulfilled_penalty = {0.1, 0.05, 0.02};
  c.holding_cost = {0.1, 0.05};
  c.capacity = {20.0, 20.0};
  c.demand.mean = 15.0;
  c.init_inventory = {40.0, 40.0};
  c.max_order = {40.0, 40.0};
  return c;
}

}  // namespace

TEST(Gae, MatchesDoubleLoopDefinition) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const Eigen::Index n = 1 + static_cast<Eigen::Index>(rng() % 40);
    const Eigen::VectorXd r = random_vector(n, rng);
    const Eigen::VectorXd v = random_vector(n + 1, rng);
    const double gamma = 0.9 + 0.1 * (trial % 3) / 3.0;
    const double lambda = 0.5 + 0.05 * trial;
    const Eigen::VectorXd adv = rollout::gae(r, v, gamma, std::min(lambda, 1.0));
    for (Eigen::Index t = 0; t < n; ++t) {
      double expected = 0.0;
      double w = 1.0;
      for (Eigen::Index l = t; l < n; ++l) {
        expected += w * (r[l] + gamma * v[l + 1] - v[l]);
        w *= gamma * std::min(lambda, 1.0);
      }
      ASSERT_NEAR(adv[t], expected, 1e-10);
    }
  }
}

TEST(Gae, LambdaOneWithZeroValuesIsRewardToGo) {
  Eigen::VectorXd r(4);
  r << 1, 2, 3, 4;
  const Eigen::VectorXd adv = rollout::gae(r, Eigen::VectorXd::Zero(5), 0.5, 1.0);
  const Eigen::VectorXd rtg = rollout::rewards_to_go(r, 0.5);
  EXPECT_NEAR(rtg[0], 1 + 0.5 * 2 + 0.25 * 3 + 0.125 * 4, 1e-14);
  EXPECT_LT((adv - rtg).norm(), 1e-14);
  EXPECT_THROW(rollout::gae(r, Eigen::VectorXd::Zero(4), 0.5, 1.0), std::invalid_argument);
}

TEST(Normalize, ZeroMeanUnitVariance) {
  std::mt19937_64 rng(12);
  const Eigen::VectorXd x = 5.0 + 3.0 * random_vector(200, rng).array();
  const Eigen::VectorXd z = rollout::normalize(x);
  EXPECT_NEAR(z.mean(), 0.0, 1e-12);
  EXPECT_NEAR(z.squaredNorm() / 200.0, 1.0, 1e-6);
}

TEST(GaussianPolicy, LogProbMatchesClosedForm) {
  std::mt19937_64 rng(13);
  const auto p = make_policy(3, 2, rng);
  const Eigen::VectorXd obs = random_vector(3, rng);
  const Eigen::VectorXd a = random_vector(2, rng);
  const Eigen::VectorXd mu = p.mean(obs);
  const Eigen::VectorXd ls = p.log_std();
  double expected = 0.0;
  for (int j = 0; j < 2; ++j) {
    const double sd = std::exp(ls[j]);
    expected += std::log(1.0 / (sd * std::sqrt(2 * M_PI)) * std::exp(-0.5 * std::pow((a[j] - mu[j]) / sd, 2)));
  }
  EXPECT_NEAR(p.log_prob(obs, a), expected, 1e-12);
}

TEST(GaussianPolicy, SurrogateGradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(14);
  const auto p = make_policy(3, 2, rng);
  const Eigen::MatrixXd obs = random_matrix(3, 9, rng);
  const Eigen::MatrixXd act = random_matrix(2, 9, rng);
  Eigen::VectorXd old_lp(9);
  for (int i = 0; i < 9; ++i) old_lp[i] = p.log_prob(obs.col(i), act.col(i)) + 0.1 * i / 9.0;
  const Eigen::VectorXd w = random_vector(9, rng);
  Eigen::VectorXd g = Eigen::VectorXd::Zero(p.params.size());
  rollout::weighted_surrogate<double>(p.spec, cs(p.params), {g.data(), static_cast<std::size_t>(g.size())},
                                      obs, act, old_lp, w);
  const auto fd = fd_gradient(
      [&](const Eigen::VectorXd& th) {
        return rollout::weighted_surrogate<double>(p.spec, cs(th), {}, obs, act, old_lp, w);
      },
      p.params);
  EXPECT_LT(rel_error(g, fd), 1e-4);
}

TEST(GaussianPolicy, KlIsZeroAtOldParamsAndGradientMatches) {
  std::mt19937_64 rng(15);
  const auto p = make_policy(4, 3, rng);
  const Eigen::MatrixXd obs = random_matrix(4, 11, rng);
  const Eigen::MatrixXd old_mean = p.mean_batch(obs);
  const Eigen::VectorXd old_ls = p.log_std();
  EXPECT_NEAR(rollout::mean_kl<double>(p.spec, cs(p.params), {}, obs, old_mean, old_ls), 0.0, 1e-14);

  const Eigen::VectorXd theta = p.params + 0.2 * random_vector(p.params.size(), rng);
  Eigen::VectorXd g = Eigen::VectorXd::Zero(theta.size());
  const double kl = rollout::mean_kl<double>(p.spec, cs(theta), {g.data(), static_cast<std::size_t>(g.size())},
                                             obs, old_mean, old_ls);
  EXPECT_GT(kl, 0.0);
  const auto fd = fd_gradient(
      [&](const Eigen::VectorXd& th) {
        return rollout::mean_kl<double>(p.spec, cs(th), {}, obs, old_mean, old_ls);
      },
      theta);
  EXPECT_LT(rel_error(g, fd), 1e-4);
}

TEST(GaussianPolicy, FisherVectorProductMatchesKlGradientDifferences) {
  std::mt19937_64 rng(16);
  const auto p = make_policy(4, 2, rng);
  const Eigen::MatrixXd obs = random_matrix(4, 13, rng);
  const Eigen::MatrixXd old_mean = p.mean_batch(obs);
  const Eigen::VectorXd old_ls = p.log_std();
  const auto kl_at = [&](const Eigen::VectorXd& th) {
    return nn::GradientTape::record(th, [&](auto q, auto g) {
      using S = typename decltype(g)::element_type;
      return rollout::mean_kl<S>(p.spec, q, g, obs, old_mean, old_ls);
    });
  };
  const auto tape = kl_at(p.params);
  for (int k = 0; k < 3; ++k) {
    const Eigen::VectorXd v = random_vector(p.params.size(), rng);
    const Eigen::VectorXd fvp = nn::hessian_vector_product(tape, v);
    const double h = 1e-5;
    const Eigen::VectorXd fd =
        (nn::scalar_grad(kl_at(p.params + h * v)) - nn::scalar_grad(kl_at(p.params - h * v))) / (2 * h);
    EXPECT_LT(rel_error(fvp, fd), 1e-4);
    EXPECT_GE(v.dot(fvp), -1e-12);  // Fisher is PSD
  }
}

TEST(CollectBatch, IndependentOfWorkerCount) {
  std::mt19937_64 rng(17);
  env::SupplyChainEnv e(small_chain());
  const auto p = rollout::GaussianPolicy::create(e.observation_dim(), e.action_dim(), {8}, -0.5, rng);
  rollout::CollectOptions opt;
  opt.num_episodes = 7;
  opt.seed = 99;
  const auto a = rollout::collect_batch(p, e, opt);
  opt.threads = 3;
  const auto b = rollout::collect_batch(p, e, opt);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].size(), 12u);
    EXPECT_EQ(a[i].actions, b[i].actions);
    EXPECT_EQ(a[i].rewards, b[i].rewards);
    EXPECT_EQ(a[i].costs, b[i].costs);
    EXPECT_DOUBLE_EQ(a[i].discounted_cost, rollout::discounted_sum(cs(a[i].costs), 0.99));
  }
}

TEST(CollectBatch, DeterministicModeActsWithMean) {
  std::mt19937_64 rng(18);
  env::QuadraticBandit bandit(0.8, 10.0);
  auto p = rollout::GaussianPolicy::create(1, 1, {4}, 0.0, rng);
  rollout::CollectOptions opt;
  opt.num_episodes = 3;
  opt.deterministic = true;
  const auto batch = rollout::collect_batch(p, bandit, opt);
  const double mean = p.mean(Eigen::VectorXd::Ones(1))[0];
  for (const auto& tr : batch) EXPECT_DOUBLE_EQ(tr.actions(0, 0), mean);
}

TEST(BuildAdvantages, ShapesAndDiscountWeights) {
  std::mt19937_64 rng(19);
  env::SupplyChainEnv e(small_chain());
  const auto p = rollout::GaussianPolicy::create(e.observation_dim(), e.action_dim(), {8}, -0.5, rng);
  rollout::CollectOptions opt;
  opt.num_episodes = 4;
  const auto batch = rollout::collect_batch(p, e, opt);
  std::vector<Eigen::VectorXd> zeros(batch.size(), Eigen::VectorXd::Zero(13));
  const auto adv = rollout::build_advantages(batch, zeros, zeros, 0.9, 1.0);
  ASSERT_EQ(adv.reward_advantages.size(), 48);
  EXPECT_NEAR(adv.reward_advantages.mean(), 0.0, 1e-12);
  EXPECT_NEAR(adv.discount_weights[12], 1.0, 0.0);
  EXPECT_NEAR(adv.discount_weights[13], 0.9, 1e-15);
  // With zero values and lambda = 1 the cost advantages are the cost-to-go.
  EXPECT_LT((adv.cost_advantages.head(12) - rollout::rewards_to_go(batch[0].costs, 0.9)).norm(), 1e-12);
}

TEST(DiscountedSum, SmallExamples) {
  const std::vector<double> ones{1.0, 1.0, 1.0};
  EXPECT_DOUBLE_EQ(rollout::discounted_sum(ones, 0.5), 1.75);
  EXPECT_DOUBLE_EQ(rollout::discounted_sum(std::vector<double>{4.0, 9.0, 9.0}, 0.0), 4.0);
  EXPECT_DOUBLE_EQ(rollout::discounted_sum(std::vector<double>{0.0, 0.0}, 0.9), 0.0);
  EXPECT_DOUBLE_EQ(rollout::discounted_sum(std::vector<double>{}, 0.9), 0.0);
}

TEST(Gae, LambdaZeroIsOneStepTdError) {
  std::mt19937_64 rng(23);
  const Eigen::VectorXd r = random_vector(9, rng);
  const Eigen::VectorXd v = random_vector(10, rng);
  const Eigen::VectorXd adv = rollout::gae(r, v, 0.95, 0.0);
  for (Eigen::Index t = 0; t < 9; ++t) EXPECT_NEAR(adv[t], r[t] + 0.95 * v[t + 1] - v[t], 1e-14);
}

TEST(GaussianPolicy, MonteCarloLogProbMatchesNegativeEntropy) {
  std::mt19937_64 rng(24);
  const auto p = make_policy(3, 2, rng);
  const Eigen::VectorXd obs = random_vector(3, rng);
  const int n = 200000;
  double sum = 0.0;
  double sq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double lp = p.log_prob(obs, p.sample(obs, rng));
    sum += lp;
    sq += lp * lp;
  }
  const double mean = sum / n;
  const double se = std::sqrt((sq / n - mean * mean) / n);
  EXPECT_LT(std::abs(mean + p.entropy()), 4.0 * se);
}

TEST(CollectBatch, EpisodeTotalsAgreeWithPerStepChannels) {
  std::mt19937_64 rng(25);
  env::SupplyChainEnv e(small_chain());
  const auto p = rollout::GaussianPolicy::create(e.observation_dim(), e.action_dim(), {8}, -0.5, rng);
  rollout::CollectOptions opt;
  opt.num_episodes = 1;
  opt.gamma = 0.93;
  const auto batch = rollout::collect_batch(p, e, opt);
  ASSERT_EQ(batch.size(), 1u);
  const auto& tr = batch[0];
  EXPECT_EQ(tr.size(), 12u);
  EXPECT_EQ(tr.observations.cols(), 12);
  EXPECT_EQ(tr.dones.size(), 12u);
  EXPECT_TRUE(tr.dones.back());
  EXPECT_DOUBLE_EQ(tr.discounted_return, rollout::discounted_sum(cs(tr.rewards), 0.93));
  EXPECT_DOUBLE_EQ(tr.discounted_raw_return, rollout::discounted_sum(cs(tr.raw_rewards), 0.93));
  EXPECT_DOUBLE_EQ(tr.discounted_cost, rollout::discounted_sum(cs(tr.costs), 0.93));
  for (Eigen::Index t = 0; t < tr.log_probs.size(); ++t) {
    EXPECT_NEAR(tr.log_probs[t], p.log_prob(tr.observations.col(t), tr.actions.col(t)), 1e-12);
  }
}

TEST(CollectBatch, ConstantDemandDeterministicPolicyRepeats) {
  std::mt19937_64 rng(26);
  auto c = small_chain();
  c.demand.model = env::DemandModel::constant;
  c.demand.value = 15.0;
  env::SupplyChainEnv e(c);
  const auto p = rollout::GaussianPolicy::create(e.observation_dim(), e.action_dim(), {8}, -0.5, rng);
  rollout::CollectOptions opt;
  opt.num_episodes = 3;
  opt.deterministic = true;
  const auto batch = rollout::collect_batch(p, e, opt);
  opt.seed = 1234;
  const auto other = rollout::collect_batch(p, e, opt);
  for (const auto* b : {&batch, &other}) {
    for (const auto& tr : *b) {
      EXPECT_EQ(tr.actions, batch[0].actions);
      EXPECT_EQ(tr.rewards, batch[0].rewards);
      EXPECT_EQ(tr.costs, batch[0].costs);
    }
  }
}

TEST(BuildAdvantages, ChannelsDoNotLeak) {
  std::mt19937_64 rng(27);
  env::SupplyChainEnv e(small_chain());
  const auto p = rollout::GaussianPolicy::create(e.observation_dim(), e.action_dim(), {8}, -0.5, rng);
  rollout::CollectOptions opt;
  opt.num_episodes = 3;
  const auto batch = rollout::collect_batch(p, e, opt);
  std::vector<Eigen::VectorXd> zeros(batch.size(), Eigen::VectorXd::Zero(13));
  std::vector<Eigen::VectorXd> sentinel(batch.size(), Eigen::VectorXd::Constant(13, 1e6));
  const auto base = rollout::build_advantages(batch, zeros, zeros, 0.9, 0.95);
  const auto poisoned_reward = rollout::build_advantages(batch, sentinel, zeros, 0.9, 0.95);
  const auto poisoned_cost = rollout::build_advantages(batch, zeros, sentinel, 0.9, 0.95);
  EXPECT_EQ(base.cost_advantages, poisoned_reward.cost_advantages);
  EXPECT_EQ(base.cost_targets, poisoned_reward.cost_targets);
  EXPECT_EQ(base.reward_advantages, poisoned_cost.reward_advantages);
  EXPECT_EQ(base.reward_targets, poisoned_cost.reward_targets);
}

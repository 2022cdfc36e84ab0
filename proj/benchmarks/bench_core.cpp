#include <benchmark/benchmark.h>

#include <random>

#include "safechain/dist/atoms.hpp"
#include "safechain/env/supply_chain.hpp"
#include "safechain/nn/mlp.hpp"
#include "safechain/nn/tape.hpp"
#include "safechain/rollout/gaussian_policy.hpp"
#include "safechain/trust/trust_region.hpp"

using namespace safechain;

namespace {

Eigen::MatrixXd random_matrix(Eigen::Index r, Eigen::Index c, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::MatrixXd m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
  return m;
}

std::span<const double> cs(const Eigen::VectorXd& v) {
  return {v.data(), static_cast<std::size_t>(v.size())};
}

env::SupplyChainConfig bench_chain() {
  env::SupplyChainConfig c;
  c.num_stages = 4;
  c.horizon = 30;
  c.lead_times = {3, 5, 10};
  c.unit_price = {2.0, 1.5, 1.0, 0.75};
  c.procurement_cost = {1.5, 1.0, 0.75, 0.5};
  c.unfulfilled_penalty = {0.1, 0.075, 0.05, 0.025};
  c.holding_cost = {0.15, 0.1, 0.05};
  c.capacity = {20.0, 20.0, 20.0};
  c.demand.mean = 25.0;
  c.init_inventory = {100.0, 100.0, 200.0};
  c.max_order = {50.0, 50.0, 50.0};
  return c;
}

}  // namespace

// Batched forward pass of the 64x64 policy trunk.
static void BM_PolicyForward(benchmark::State& state) {
  std::mt19937_64 rng(1);
  const auto p = rollout::GaussianPolicy::create(20, 3, {64, 64}, -0.5, rng);
  const Eigen::MatrixXd obs = random_matrix(20, state.range(0), rng);
  for (auto _ : state) benchmark::DoNotOptimize(p.mean_batch(obs));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_PolicyForward)->Arg(30)->Arg(600);

static void BM_SurrogateGradient(benchmark::State& state) {
  std::mt19937_64 rng(2);
  const auto p = rollout::GaussianPolicy::create(20, 3, {64, 64}, -0.5, rng);
  const auto n = state.range(0);
  const Eigen::MatrixXd obs = random_matrix(20, n, rng);
  const Eigen::MatrixXd act = random_matrix(3, n, rng);
  const Eigen::VectorXd old_lp = Eigen::VectorXd::Constant(n, -3.0);
  const Eigen::VectorXd w = random_matrix(n, 1, rng);
  Eigen::VectorXd g(p.params.size());
  for (auto _ : state) {
    g.setZero();
    benchmark::DoNotOptimize(rollout::weighted_surrogate<double>(
        p.spec, cs(p.params), {g.data(), static_cast<std::size_t>(g.size())}, obs, act, old_lp, w));
  }
  state.SetItemsProcessed(state.iterations() * n);
}
BENCHMARK(BM_SurrogateGradient)->Arg(600);

// Fisher-vector product through the forward-over-reverse tape.
static void BM_FisherVectorProduct(benchmark::State& state) {
  std::mt19937_64 rng(3);
  const auto p = rollout::GaussianPolicy::create(20, 3, {64, 64}, -0.5, rng);
  const Eigen::MatrixXd obs = random_matrix(20, state.range(0), rng);
  const Eigen::MatrixXd old_mean = p.mean_batch(obs);
  const Eigen::VectorXd old_ls = p.log_std();
  const auto tape = nn::GradientTape::record(p.params, [&](auto q, auto g) {
    using S = typename decltype(g)::element_type;
    return rollout::mean_kl<S>(p.spec, q, g, obs, old_mean, old_ls);
  });
  const Eigen::VectorXd v = random_matrix(p.params.size(), 1, rng);
  for (auto _ : state) benchmark::DoNotOptimize(nn::hessian_vector_product(tape, v, 0.1));
}
BENCHMARK(BM_FisherVectorProduct)->Arg(600);

static void BM_ConjugateGradientDense(benchmark::State& state) {
  std::mt19937_64 rng(4);
  const auto n = state.range(0);
  const Eigen::MatrixXd a = random_matrix(n, n, rng);
  const Eigen::MatrixXd h = a * a.transpose() / static_cast<double>(n) + 0.1 * Eigen::MatrixXd::Identity(n, n);
  const Eigen::VectorXd rhs = random_matrix(n, 1, rng);
  const trust::Hvp hvp = [&h](const Eigen::VectorXd& v) { return Eigen::VectorXd(h * v); };
  for (auto _ : state) benchmark::DoNotOptimize(trust::conjugate_gradient(hvp, rhs, 20, 1e-10));
}
BENCHMARK(BM_ConjugateGradientDense)->Arg(50)->Arg(500);

static void BM_NllLossGradient(benchmark::State& state) {
  std::mt19937_64 rng(5);
  const auto head = dist::ValueHead::create(20, {64, 64}, dist::AtomGrid(102, -100.0, 500.0),
                                            dist::HeadRole::reward, rng);
  const Eigen::MatrixXd x = random_matrix(20, state.range(0), rng);
  const Eigen::VectorXd y = Eigen::VectorXd::Constant(state.range(0), 200.0);
  for (auto _ : state) benchmark::DoNotOptimize(nn::scalar_grad(dist::nll_loss(head, x, y)));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_NllLossGradient)->Arg(128);

static void BM_EnvironmentStep(benchmark::State& state) {
  env::SupplyChainEnv e(bench_chain());
  const std::vector<double> action{0.1, -0.2, 0.3};
  std::uint64_t seed = 0;
  e.reset(seed);
  for (auto _ : state) {
    auto tr = e.step(action);
    if (tr.done) e.reset(++seed);
    benchmark::DoNotOptimize(tr);
  }
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_EnvironmentStep);

BENCHMARK_MAIN();

// Acceptance suite: one PASS/FAIL line per criterion. Criteria 6-8 read the
// artifacts of full desk-scale training runs written under --out.

#include <chrono>
#include <cstring>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>

#include "oracles.hpp"
#include "safechain/algo/agent.hpp"
#include "safechain/dist/atoms.hpp"
#include "safechain/env/bandit.hpp"
#include "safechain/harness/experiment.hpp"
#include "safechain/nn/tape.hpp"
#include "safechain/reshape/reshape.hpp"
#include "safechain/rollout/trajectory.hpp"
#include "safechain/trust/trust_region.hpp"
#include "test_support.hpp"

using namespace safechain;
using namespace safechain::testing;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::string fmt(double x) {
  std::ostringstream ss;
  ss.precision(4);
  ss << x;
  return ss.str();
}

trust::Hvp dense_hvp(const Eigen::MatrixXd& h) {
  return [h](const Eigen::VectorXd& v) { return Eigen::VectorXd(h * v); };
}

std::span<const double> cs(const Eigen::VectorXd& v) {
  return {v.data(), static_cast<std::size_t>(v.size())};
}

// ---------------------------------------------------------------------------

Verdict sign_preservation() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(101);
  std::uniform_real_distribution<double> f_dist(1e-3, 100.0), p_dist(-1.0, 1.0), beta_dist(0.0, 200.0),
      eps_dist(1e-6, 1.0 - 1e-6);
  int bad = 0;
  const int n = 10000;
  for (int k = 0; k < n; ++k) {
    const double f = f_dist(rng);
    const double d = k % 10 == 0 ? f : f_dist(rng);
    const reshape::ReshapeConfig cfg{beta_dist(rng), eps_dist(rng)};
    const auto out = reshape::reshape(f, d, cfg.beta * p_dist(rng), cfg);
    const auto sgn = [](double x) { return (x > 0.0) - (x < 0.0); };
    if (sgn(out.j_c_tilde - out.d_tilde) != sgn(f - d) || sgn(out.residual) != sgn(f - d)) ++bad;
    if (!(out.multiplier >= 1.0 - cfg.epsilon)) ++bad;
  }
  const double secs = seconds_since(t0);
  return {bad == 0 && secs < 1.0, std::to_string(n - bad) + "/" + std::to_string(n) +
                                       " sign-preserving, " + fmt(secs) + " s"};
}

Verdict kkt_oracle() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(102);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  double worst_gap = 0.0;
  double worst_cs = 0.0;
  bool ok = true;
  int feasible = 0;
  for (int k = 0; k < 100; ++k) {
    const Eigen::MatrixXd h = random_spd(6, rng);
    trust::LinearizedProblem p{random_vector(6, rng), random_vector(6, rng), 0.0, 0.01, dense_hvp(h)};
    const Eigen::VectorXd hb = h.ldlt().solve(p.b);
    const Eigen::VectorXd hg = h.ldlt().solve(p.g);
    const double s = p.b.dot(hb);
    p.c = 2.0 * u(rng) * std::sqrt(p.delta * s);
    const auto sol = trust::solve_dual(p, 50);
    ok = ok && sol.lambda >= 0.0 && sol.nu >= 0.0;
    if (sol.branch == trust::Branch::recovery) {
      ok = ok && p.c * p.c / s > p.delta;
      continue;
    }
    ++feasible;
    const Eigen::VectorXd x = trust::compute_step(p, sol);
    const double slack = p.c + p.b.dot(x);
    ok = ok && slack <= 1e-6 && x.dot(h * x) <= p.delta * (1.0 + 1e-6);
    worst_cs = std::max(worst_cs, std::abs(sol.nu * slack));
    const double oracle = dual_optimum(p.g.dot(hg), p.g.dot(hb), s, p.c, p.delta);
    worst_gap = std::max(worst_gap, std::abs(p.g.dot(x) - oracle) / std::abs(oracle));
  }
  const double secs = seconds_since(t0);
  ok = ok && worst_gap <= 1e-4 && worst_cs <= 1e-6 && secs < 10.0;
  return {ok, std::to_string(feasible) + " feasible of 100, max rel gap " + fmt(worst_gap) +
                  ", max |nu*(c+b'x)| " + fmt(worst_cs) + ", " + fmt(secs) + " s"};
}

Verdict slack_reduction() {
  std::mt19937_64 rng(103);
  double worst = 0.0;
  bool nu_zero = true;
  for (int k = 0; k < 20; ++k) {
    const Eigen::MatrixXd h = random_spd(8, rng);
    trust::LinearizedProblem p{random_vector(8, rng), random_vector(8, rng), -1e3, 0.01, dense_hvp(h)};
    const auto sol = trust::solve_dual(p, 100, 1e-14);
    nu_zero = nu_zero && sol.nu == 0.0;
    const Eigen::VectorXd x = trust::compute_step(p, sol);
    const Eigen::VectorXd hg = h.ldlt().solve(p.g);
    const Eigen::VectorXd trpo = -std::sqrt(p.delta / p.g.dot(hg)) * hg;
    worst = std::max(worst, (x - trpo).norm() / trpo.norm());
  }
  return {nu_zero && worst <= 1e-8, "nu* = 0 in all 20, max rel deviation from TRPO step " + fmt(worst)};
}

Verdict numerics() {
  std::mt19937_64 rng(104);
  double pg = 0.0;
  double nll = 0.0;
  double fvp = 0.0;
  double cg = 0.0;
  for (int k = 0; k < 5; ++k) {
    auto policy = rollout::GaussianPolicy::create(5, 3, {12, 12}, -0.4, rng);
    policy.params += 0.3 * random_vector(policy.params.size(), rng);
    const Eigen::MatrixXd obs = random_matrix(5, 16, rng);
    const Eigen::MatrixXd act = random_matrix(3, 16, rng);
    Eigen::VectorXd old_lp(16);
    for (int i = 0; i < 16; ++i) old_lp[i] = policy.log_prob(obs.col(i), act.col(i)) - 0.05;
    const Eigen::VectorXd w = random_vector(16, rng);
    Eigen::VectorXd g = Eigen::VectorXd::Zero(policy.params.size());
    rollout::weighted_surrogate<double>(policy.spec, cs(policy.params),
                                        {g.data(), static_cast<std::size_t>(g.size())}, obs, act, old_lp, w);
    pg = std::max(pg, rel_error(g, fd_gradient(
                                       [&](const Eigen::VectorXd& th) {
                                         return rollout::weighted_surrogate<double>(policy.spec, cs(th), {}, obs,
                                                                                    act, old_lp, w);
                                       },
                                       policy.params)));

    const Eigen::MatrixXd old_mean = policy.mean_batch(obs);
    const Eigen::VectorXd old_ls = policy.log_std();
    const auto kl_tape = [&](const Eigen::VectorXd& th) {
      return nn::GradientTape::record(th, [&](auto p, auto gr) {
        using S = typename decltype(gr)::element_type;
        return rollout::mean_kl<S>(policy.spec, p, gr, obs, old_mean, old_ls);
      });
    };
    const Eigen::VectorXd theta = policy.params + 0.05 * random_vector(policy.params.size(), rng);
    const Eigen::VectorXd v = random_vector(theta.size(), rng);
    const double h = 1e-5;
    const Eigen::VectorXd fd = (nn::scalar_grad(kl_tape(theta + h * v)) - nn::scalar_grad(kl_tape(theta - h * v))) /
                               (2.0 * h);
    fvp = std::max(fvp, rel_error(nn::hessian_vector_product(kl_tape(theta), v), fd));

    auto head = dist::ValueHead::create(5, {12}, dist::AtomGrid(31, -10.0, 40.0), dist::HeadRole::cost, rng);
    head.params += 0.5 * random_vector(head.params.size(), rng);
    const Eigen::VectorXd y = 15.0 + 8.0 * random_vector(16, rng).array();
    const auto atoms = head.grid.atoms();
    nll = std::max(nll, rel_error(nn::scalar_grad(dist::nll_loss(head, obs, y)),
                                  fd_gradient(
                                      [&](const Eigen::VectorXd& p) {
                                        return dist::nll_objective<double>(head.spec, atoms, cs(p), {}, obs, y);
                                      },
                                      head.params)));
  }
  for (int n : {2, 6, 17, 33, 50}) {
    const Eigen::MatrixXd m = random_spd(n, rng);
    const Eigen::VectorXd rhs = random_vector(n, rng);
    const Eigen::VectorXd exact = m.ldlt().solve(rhs);
    const auto rep = trust::conjugate_gradient(dense_hvp(m), rhs, 4 * n, 1e-14);
    cg = std::max(cg, (rep.x - exact).norm() / exact.norm());
  }
  const bool ok = pg < 1e-4 && nll < 1e-4 && fvp < 1e-4 && cg < 1e-6;
  return {ok, "policy grad " + fmt(pg) + ", NLL grad " + fmt(nll) + ", FVP " + fmt(fvp) + ", CG " + fmt(cg)};
}

Verdict environment() {
  std::mt19937_64 rng(105);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::size_t steps = 0;
  std::size_t failures = 0;
  std::string first;
  while (steps < 100000) {
    const auto c = random_chain_config(rng);
    auto s = env::env_reset(c, rng());
    while (s.t < c.horizon && steps < 100000) {
      std::vector<double> orders;
      for (double mo : c.max_order) orders.push_back(-5.0 + 1.5 * mo * u(rng));
      const auto o = env::env_step(s, orders, c);
      auto err = check_transition(s, orders, o, c);
      if (err.empty() && env::violation_count(s, orders, c) != o.cost) err = "violation_count";
      if (!err.empty()) {
        if (first.empty()) first = err;
        ++failures;
      }
      s = o.next_state;
      ++steps;
    }
  }
  auto c = random_chain_config(rng);
  c.horizon = 30;
  std::vector<std::vector<double>> orders(30);
  for (auto& o : orders) {
    for (double mo : c.max_order) o.push_back(mo * u(rng));
  }
  std::ostringstream a;
  std::ostringstream b;
  env::write_replay_csv(a, c, env::replay_episode(c, 77, orders));
  env::write_replay_csv(b, c, env::replay_episode(c, 77, orders));
  const bool replay = a.str() == b.str();
  return {failures == 0 && replay, std::to_string(steps) + " fuzzed steps, " + std::to_string(failures) +
                                       " invariant failures" + (first.empty() ? "" : " (first: " + first + ")") +
                                       ", replay " + (replay ? "bit-identical" : "differs")};
}

// ---------------------------------------------------------------------------
// Full runs

struct Runs {
  fs::path main_dir;   // trpo, cpo, dcpo x 3 seeds
  fs::path extra_dir;  // dcpo_ablation, saute_trpo x 1 seed
  harness::ExperimentSpec main;
  harness::ExperimentSpec extra;
  double main_seconds = 0.0;
  std::vector<harness::SeedOutcome> outcomes;
};

bool complete(const harness::ExperimentSpec& spec) {
  for (auto v : spec.variants) {
    for (auto s : spec.seeds) {
      if (!fs::exists(spec.out_dir / std::string(algo::to_string(v)) / ("seed_" + std::to_string(s)) / "eval.csv")) {
        return false;
      }
    }
  }
  return true;
}

Runs full_runs(const fs::path& out, bool reuse) {
  Runs r;
  const auto base = harness::load_experiment(fs::path(SAFECHAIN_SOURCE_DIR) / "configs" / "default.json");
  r.main = base;
  r.main.variants = {algo::Variant::trpo, algo::Variant::cpo, algo::Variant::dcpo};
  r.main.seeds = {0, 1, 2};
  r.main.out_dir = out / "main";
  r.extra = base;
  r.extra.variants = {algo::Variant::dcpo_ablation, algo::Variant::saute_trpo};
  r.extra.seeds = {0};
  r.extra.out_dir = out / "extra";

  const fs::path timing = r.main.out_dir / "wall_seconds.txt";
  if (reuse && complete(r.main) && fs::exists(timing)) {
    std::ifstream(timing) >> r.main_seconds;
    std::cerr << "reusing " << r.main.out_dir << '\n';
  } else {
    fs::remove_all(r.main.out_dir);
    std::cerr << "training trpo/cpo/dcpo on seeds 0,1,2 ...\n";
    const auto t0 = Clock::now();
    auto o = harness::run(r.main);
    r.main_seconds = seconds_since(t0);
    std::ofstream(timing) << r.main_seconds << '\n';
    r.outcomes.insert(r.outcomes.end(), o.begin(), o.end());
    harness::report(r.main.out_dir);
  }
  if (reuse && complete(r.extra)) {
    std::cerr << "reusing " << r.extra.out_dir << '\n';
  } else {
    fs::remove_all(r.extra.out_dir);
    std::cerr << "training dcpo_ablation/saute_trpo on seed 0 ...\n";
    auto o = harness::run(r.extra);
    r.outcomes.insert(r.outcomes.end(), o.begin(), o.end());
  }
  return r;
}

fs::path seed_dir(const harness::ExperimentSpec& spec, algo::Variant v, std::uint64_t seed) {
  return spec.out_dir / std::string(algo::to_string(v)) / ("seed_" + std::to_string(seed));
}

Verdict distribution_heads(const Runs& runs) {
  std::mt19937_64 rng(106);
  double worst_mass = 0.0;
  for (int k = 0; k < 20; ++k) {
    auto head = dist::ValueHead::create(8, {32, 32}, dist::AtomGrid(102, -50.0, 400.0), dist::HeadRole::reward, rng);
    head.params += 1.5 * random_vector(head.params.size(), rng);
    const Eigen::MatrixXd p = dist::dist_forward_batch(head, 2.0 * random_matrix(8, 50, rng));
    for (Eigen::Index i = 0; i < p.cols(); ++i) worst_mass = std::max(worst_mass, std::abs(p.col(i).sum() - 1.0));
  }

  std::uniform_real_distribution<double> u(0.0, 1.0);
  int bad = 0;
  for (int k = 0; k < 1000; ++k) {
    const double lo = -50.0 + 100.0 * u(rng);
    dist::AtomicDistribution d{dist::AtomGrid(51, lo, lo + 1.0 + 99.0 * u(rng)), Eigen::VectorXd(51)};
    for (Eigen::Index i = 0; i < 51; ++i) d.probs[i] = u(rng) < 0.3 ? 0.0 : std::pow(u(rng), 3);
    d.probs[0] += 1e-12;
    d.probs /= d.probs.sum();
    double prev = 1.0;
    for (int s = 0; s <= 100; ++s) {
      const double t = d.grid.v_min() - 1.0 + (d.grid.v_max() - d.grid.v_min() + 2.0) * s / 100.0;
      const double pe = dist::prob_exceeds(d, t);
      if (std::abs(pe + dist::prob_below(d, t) - 1.0) > 1e-12 || pe > prev + 1e-12 || pe < 0.0 || pe > 1.0) ++bad;
      prev = pe;
    }
  }

  // Entropy of the s0 reward distribution at the first, middle and last epoch.
  const auto table = harness::read_csv_file(seed_dir(runs.main, algo::Variant::dcpo, 0) / "quantiles.csv");
  std::map<long, double> entropy;
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    if (table.rows[i][table.column("head")] != "reward") continue;
    const double p = table.number(i, "prob");
    double& h = entropy[static_cast<long>(table.number(i, "epoch"))];
    if (p > 0.0) h -= p * std::log(p);
  }
  const long epochs = static_cast<long>(runs.main.agent.epochs);
  const long checkpoints[3] = {1, epochs / 2, epochs};
  bool have = true;
  for (long e : checkpoints) have = have && entropy.contains(e);
  const bool decreasing = have && entropy[checkpoints[0]] > entropy[checkpoints[1]] &&
                          entropy[checkpoints[1]] > entropy[checkpoints[2]];
  std::string h = have ? fmt(entropy[checkpoints[0]]) + " > " + fmt(entropy[checkpoints[1]]) + " > " +
                             fmt(entropy[checkpoints[2]])
                       : "missing snapshots";
  return {worst_mass <= 1e-6 && bad == 0 && decreasing,
          "max |sum p - 1| " + fmt(worst_mass) + ", " + std::to_string(bad) +
              " complementarity/monotonicity failures, s0 entropy (epochs 1/" + std::to_string(epochs / 2) + "/" +
              std::to_string(epochs) + ") " + h};
}

Verdict trust_region_guarantee(const Runs& runs) {
  std::size_t accepted = 0;
  std::size_t violations = 0;
  std::size_t missing = 0;
  std::size_t rows = 0;
  for (const auto* spec : {&runs.main, &runs.extra}) {
    for (auto v : spec->variants) {
      for (auto s : spec->seeds) {
        const auto dir = seed_dir(*spec, v, s);
        if (!fs::exists(dir / "eval.csv")) {
          ++missing;
          continue;
        }
        const auto t = harness::read_csv_file(dir / "metrics.csv");
        rows += t.rows.size();
        if (t.rows.size() != spec->agent.epochs) ++missing;
        for (std::size_t i = 0; i < t.rows.size(); ++i) {
          if (t.number(i, "accepted") != 1.0) continue;
          ++accepted;
          if (!(t.number(i, "kl") <= spec->agent.delta)) ++violations;
        }
      }
    }
  }
  return {missing == 0 && violations == 0 && accepted > 0,
          std::to_string(accepted) + " accepted updates over " + std::to_string(rows) + " epochs, " +
              std::to_string(violations) + " with KL > delta, " + std::to_string(missing) + " incomplete runs"};
}

struct EvalSummary {
  double return_mean = 0.0;       // mean over seeds of per-seed mean return
  double return_seed_std = 0.0;   // population std over seeds of per-seed mean return
  double cost_mean = 0.0;         // mean over seeds of per-seed mean cost
  double cost_within_std = 0.0;   // mean over seeds of the per-seed episode std of cost
};

EvalSummary summarize_eval(const harness::ExperimentSpec& spec, algo::Variant v) {
  std::vector<double> rets;
  std::vector<double> costs;
  std::vector<double> within;
  for (auto s : spec.seeds) {
    const auto t = harness::read_csv_file(seed_dir(spec, v, s) / "eval.csv");
    double r = 0.0;
    double c = 0.0;
    double c2 = 0.0;
    const auto n = static_cast<double>(t.rows.size());
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
      r += t.number(i, "return");
      c += t.number(i, "cost");
      c2 += t.number(i, "cost") * t.number(i, "cost");
    }
    rets.push_back(r / n);
    costs.push_back(c / n);
    within.push_back(std::sqrt(std::max(c2 / n - (c / n) * (c / n), 0.0)));
  }
  const auto mean = [](const std::vector<double>& x) {
    double m = 0.0;
    for (double v : x) m += v;
    return m / static_cast<double>(x.size());
  };
  EvalSummary out;
  out.return_mean = mean(rets);
  out.cost_mean = mean(costs);
  out.cost_within_std = mean(within);
  double var = 0.0;
  for (double r : rets) var += (r - out.return_mean) * (r - out.return_mean);
  out.return_seed_std = std::sqrt(var / static_cast<double>(rets.size()));
  return out;
}

Verdict directional(const Runs& runs) {
  const double d = runs.main.agent.cost_limit;
  const auto trpo = summarize_eval(runs.main, algo::Variant::trpo);
  const auto cpo = summarize_eval(runs.main, algo::Variant::cpo);
  const auto dcpo = summarize_eval(runs.main, algo::Variant::dcpo);
  const bool a = trpo.cost_mean > d && trpo.return_mean > dcpo.return_mean;
  const bool b = dcpo.cost_mean <= d + dcpo.cost_within_std;
  const bool c = dcpo.return_seed_std < cpo.return_seed_std;
  const bool budget = runs.main_seconds <= 1800.0;
  std::string detail = std::string("(a) ") + (a ? "ok" : "no") + ": TRPO cost " + fmt(trpo.cost_mean) + " vs d " +
                       fmt(d) + ", TRPO return " + fmt(trpo.return_mean) + " vs DCPO " + fmt(dcpo.return_mean) +
                       "; (b) " + (b ? "ok" : "no") + ": DCPO cost " + fmt(dcpo.cost_mean) + " <= " +
                       fmt(d + dcpo.cost_within_std) + "; (c) " + (c ? "ok" : "no") +
                       ": across-seed return std DCPO " + fmt(dcpo.return_seed_std) + " vs CPO " +
                       fmt(cpo.return_seed_std) + "; 9 runs in " + fmt(runs.main_seconds / 60.0) + " min";
  return {a && b && c && budget, detail};
}

bool same_record(const algo::EpochRecord& a, const algo::EpochRecord& b) {
  const auto eq = [](double x, double y) { return std::memcmp(&x, &y, sizeof x) == 0; };
  return a.epoch == b.epoch && eq(a.return_mean, b.return_mean) && eq(a.return_std, b.return_std) &&
         eq(a.cost_mean, b.cost_mean) && eq(a.cost_std, b.cost_std) && eq(a.kl, b.kl) &&
         eq(a.lambda, b.lambda) && eq(a.nu, b.nu) && eq(a.rho, b.rho) && eq(a.multiplier, b.multiplier) &&
         eq(a.p_violate, b.p_violate) && eq(a.residual, b.residual) && a.branch == b.branch &&
         a.backtracks == b.backtracks && a.accepted == b.accepted &&
         eq(a.reward_value_loss, b.reward_value_loss) && eq(a.cost_value_loss, b.cost_value_loss) &&
         eq(a.policy_entropy, b.policy_entropy);
}

Verdict zero_beta_equivalence() {
  const auto base = harness::load_experiment(fs::path(SAFECHAIN_SOURCE_DIR) / "configs" / "default.json");
  auto cfg = base.agent;
  cfg.reshape.beta = 0.0;
  cfg.seed = 7;
  cfg.variant = algo::Variant::dcpo;
  auto ablation = cfg;
  ablation.variant = algo::Variant::dcpo_ablation;
  const env::SupplyChainEnv e(base.environment);
  algo::Agent a(cfg, e);
  algo::Agent b(ablation, e);
  int identical = 0;
  for (int k = 0; k < 10; ++k) identical += same_record(a.train_epoch(), b.train_epoch()) ? 1 : 0;
  const bool params = a.policy().params == b.policy().params;
  return {identical == 10 && params, std::to_string(identical) + "/10 epoch records bitwise identical, policy " +
                                         (params ? "identical" : "differs")};
}

Verdict constrained_bandit() {
  const env::QuadraticBandit bandit(0.8, 10.0);
  const double d = 15.0;
  const double optimum = bandit.constrained_optimum(d);
  algo::AgentConfig cfg;
  cfg.variant = algo::Variant::dcpo;
  cfg.cost_limit = d;
  cfg.episodes_per_epoch = 100;
  cfg.epochs = 200;
  cfg.seed = 0;
  algo::Agent agent(cfg, bandit);
  double tail_cost = 0.0;
  const std::size_t tail = 20;
  for (std::size_t k = 1; k <= cfg.epochs; ++k) {
    const auto r = agent.train_epoch();
    if (k > cfg.epochs - tail) tail_cost += r.cost_mean;
  }
  tail_cost /= static_cast<double>(tail);
  const double action = agent.policy().mean(Eigen::VectorXd::Ones(1))[0];
  const bool ok = std::abs(tail_cost - d) <= 0.1 && std::abs(action - optimum) <= 0.05;
  return {ok, "after 200 epochs: mean cost (last 20 epochs) " + fmt(tail_cost) + " vs d " + fmt(d) +
                  ", action mean " + fmt(action) + " vs optimum " + fmt(optimum)};
}

}  // namespace

int main(int argc, char** argv) {
  fs::path out = "acceptance_runs";
  bool reuse = false;
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--out" && i + 1 < argc) {
      out = argv[++i];
    } else if (arg == "--reuse") {
      reuse = true;
    } else {
      std::cerr << "usage: safechain_acceptance [--out DIR] [--reuse]\n";
      return 2;
    }
  }

  int failed = 0;
  const auto report = [&](int id, const char* name, const std::function<Verdict()>& check) {
    Verdict v;
    try {
      v = check();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    failed += v.pass ? 0 : 1;
    std::cout << (v.pass ? "PASS" : "FAIL") << " [" << id << "] " << name << ": " << v.detail << std::endl;
  };

  report(1, "reshaping sign preservation", sign_preservation);
  report(2, "dual solver vs KKT oracle", kkt_oracle);
  report(3, "slack constraint reduces to TRPO", slack_reduction);
  report(4, "gradient, FVP and CG numerics", numerics);
  report(5, "environment invariants and replay", environment);

  std::optional<Runs> runs;
  try {
    runs = full_runs(out, reuse);
    for (const auto& o : runs->outcomes) {
      if (!o.ok) std::cerr << algo::to_string(o.variant) << " seed " << o.seed << " failed: " << o.error << '\n';
    }
  } catch (const std::exception& e) {
    std::cerr << "training runs failed: " << e.what() << '\n';
  }
  const auto need_runs = [&](const std::function<Verdict(const Runs&)>& f) {
    return [&runs, f]() -> Verdict {
      if (!runs) return {false, "training runs unavailable"};
      return f(*runs);
    };
  };
  report(6, "distribution heads", need_runs(distribution_heads));
  report(7, "trust region over full runs", need_runs(trust_region_guarantee));
  report(8, "directional reproduction", need_runs(directional));
  report(9, "beta = 0 equivalence", zero_beta_equivalence);
  report(10, "constrained bandit", constrained_bandit);

  std::cout << (failed == 0 ? "all criteria passed" : std::to_string(failed) + " criteria failed") << std::endl;
  return failed == 0 ? 0 : 1;
}

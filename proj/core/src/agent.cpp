#include "safechain/algo/agent.hpp"

#include <cmath>
#include <set>

#include "safechain/algo/saute.hpp"
#include "safechain/env/supply_chain.hpp"
#include "safechain/nn/checkpoint.hpp"
#include "safechain/nn/tape.hpp"
#include "safechain/rollout/trajectory.hpp"
#include "safechain/seeding.hpp"

namespace safechain::algo {

std::string_view to_string(Variant v) {
  switch (v) {
    case Variant::trpo: return "trpo";
    case Variant::cpo: return "cpo";
    case Variant::dcpo: return "dcpo";
    case Variant::dcpo_ablation: return "dcpo_ablation";
    case Variant::saute_trpo: return "saute_trpo";
  }
  return "unknown";
}

Variant variant_from_string(std::string_view name) {
  for (Variant v : {Variant::trpo, Variant::cpo, Variant::dcpo, Variant::dcpo_ablation,
                    Variant::saute_trpo}) {
    if (to_string(v) == name) return v;
  }
  throw std::invalid_argument("unknown variant '" + std::string(name) + "'");
}

bool uses_distributional_heads(Variant v) {
  return v == Variant::dcpo || v == Variant::dcpo_ablation;
}

bool is_constrained(Variant v) {
  return v == Variant::cpo || v == Variant::dcpo || v == Variant::dcpo_ablation;
}

namespace {

using env::ConfigError;

void require(bool ok, const std::string& key, const std::string& what) {
  if (!ok) throw ConfigError("agent." + key, what);
}

template <class T>
void read_optional(const nlohmann::json& j, const std::string& key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("agent." + key, std::string("wrong type (") + e.what() + ")");
  }
}

std::span<const double> cspan(const Eigen::VectorXd& v) {
  return {v.data(), static_cast<std::size_t>(v.size())};
}
std::span<double> mspan(Eigen::VectorXd& v) {
  return {v.data(), static_cast<std::size_t>(v.size())};
}

std::pair<double, double> mean_std(const std::vector<double>& xs) {
  if (xs.empty()) return {0.0, 0.0};
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= static_cast<double>(xs.size());
  double var = 0.0;
  for (double x : xs) var += (x - mean) * (x - mean);
  var /= static_cast<double>(xs.size());
  return {mean, std::sqrt(var)};
}

}  // namespace

void AgentConfig::validate() const {
  require(delta > 0.0, "delta", "must be > 0");
  require(gamma > 0.0 && gamma <= 1.0, "gamma", "must lie in (0, 1]");
  require(gae_lambda >= 0.0 && gae_lambda <= 1.0, "gae_lambda", "must lie in [0, 1]");
  require(episodes_per_epoch >= 1, "episodes_per_epoch", "must be >= 1");
  require(epochs >= 1, "epochs", "must be >= 1");
  require(cost_limit > 0.0, "cost_limit", "must be > 0");
  require(reshape.beta >= 0.0 && std::isfinite(reshape.beta), "beta", "must be finite and >= 0");
  require(reshape.epsilon > 0.0 && reshape.epsilon < 1.0, "epsilon", "must lie in (0, 1)");
  require(!policy_hidden.empty(), "policy_hidden", "needs at least one layer");
  require(!value_hidden.empty(), "value_hidden", "needs at least one layer");
  for (auto h : policy_hidden) require(h > 0, "policy_hidden", "widths must be > 0");
  for (auto h : value_hidden) require(h > 0, "value_hidden", "widths must be > 0");
  require(std::isfinite(init_log_std), "init_log_std", "must be finite");
  require(critic.learning_rate > 0.0, "value_lr", "must be > 0");
  require(critic.steps >= 1, "value_steps", "must be >= 1");
  require(critic.warmup_epochs >= 1, "range_warmup_epochs", "must be >= 1");
  require(critic.range_margin >= 0.0, "range_margin", "must be >= 0");
  require(num_atoms >= 2, "num_atoms", "must be >= 2");
  require(cg_iters >= 1, "cg_iters", "must be >= 1");
  require(cg_tol > 0.0, "cg_tol", "must be > 0");
  require(damping >= 0.0, "damping", "must be >= 0");
  require(max_backtracks >= 0, "max_backtracks", "must be >= 0");
  require(backtrack_decay > 0.0 && backtrack_decay < 1.0, "backtrack_decay", "must lie in (0, 1)");
  require(std::isfinite(saute_penalty), "saute_penalty", "must be finite");
  require(threads >= 1, "threads", "must be >= 1");
}

AgentConfig agent_config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("agent", "expected a JSON object");
  static const std::set<std::string> allowed{
      "variant",       "delta",        "gamma",           "gae_lambda",     "episodes_per_epoch",
      "epochs",        "cost_limit",   "beta",            "epsilon",        "policy_hidden",
      "value_hidden",  "init_log_std", "value_lr",        "value_steps",    "value_minibatch",
      "range_warmup_epochs", "range_margin", "num_atoms", "cg_iters",       "cg_tol",
      "damping",       "max_backtracks", "backtrack_decay", "saute_penalty"};
  for (const auto& [key, value] : j.items()) {
    if (!allowed.contains(key)) throw ConfigError("agent." + key, "unknown key");
  }
  AgentConfig c;
  if (j.contains("variant")) {
    std::string name;
    read_optional(j, "variant", name);
    try {
      c.variant = variant_from_string(name);
    } catch (const std::invalid_argument& e) {
      throw ConfigError("agent.variant", e.what());
    }
  }
  read_optional(j, "delta", c.delta);
  read_optional(j, "gamma", c.gamma);
  read_optional(j, "gae_lambda", c.gae_lambda);
  read_optional(j, "episodes_per_epoch", c.episodes_per_epoch);
  read_optional(j, "epochs", c.epochs);
  read_optional(j, "cost_limit", c.cost_limit);
  read_optional(j, "beta", c.reshape.beta);
  read_optional(j, "epsilon", c.reshape.epsilon);
  read_optional(j, "policy_hidden", c.policy_hidden);
  read_optional(j, "value_hidden", c.value_hidden);
  read_optional(j, "init_log_std", c.init_log_std);
  read_optional(j, "value_lr", c.critic.learning_rate);
  read_optional(j, "value_steps", c.critic.steps);
  read_optional(j, "value_minibatch", c.critic.minibatch);
  read_optional(j, "range_warmup_epochs", c.critic.warmup_epochs);
  read_optional(j, "range_margin", c.critic.range_margin);
  read_optional(j, "num_atoms", c.num_atoms);
  read_optional(j, "cg_iters", c.cg_iters);
  read_optional(j, "cg_tol", c.cg_tol);
  read_optional(j, "damping", c.damping);
  read_optional(j, "max_backtracks", c.max_backtracks);
  read_optional(j, "backtrack_decay", c.backtrack_decay);
  read_optional(j, "saute_penalty", c.saute_penalty);
  c.validate();
  return c;
}

nlohmann::json to_json(const AgentConfig& c) {
  return {{"variant", std::string(to_string(c.variant))},
          {"delta", c.delta},
          {"gamma", c.gamma},
          {"gae_lambda", c.gae_lambda},
          {"episodes_per_epoch", c.episodes_per_epoch},
          {"epochs", c.epochs},
          {"cost_limit", c.cost_limit},
          {"beta", c.reshape.beta},
          {"epsilon", c.reshape.epsilon},
          {"policy_hidden", c.policy_hidden},
          {"value_hidden", c.value_hidden},
          {"init_log_std", c.init_log_std},
          {"value_lr", c.critic.learning_rate},
          {"value_steps", c.critic.steps},
          {"value_minibatch", c.critic.minibatch},
          {"range_warmup_epochs", c.critic.warmup_epochs},
          {"range_margin", c.critic.range_margin},
          {"num_atoms", c.num_atoms},
          {"cg_iters", c.cg_iters},
          {"cg_tol", c.cg_tol},
          {"damping", c.damping},
          {"max_backtracks", c.max_backtracks},
          {"backtrack_decay", c.backtrack_decay},
          {"saute_penalty", c.saute_penalty}};
}

Agent::Agent(AgentConfig config, const env::Environment& environment)
    : config_(std::move(config)), rng_(derive_seed(config_.seed, 0, 3)) {
  config_.validate();
  env_ = config_.variant == Variant::saute_trpo
             ? saute_wrap(environment, config_.cost_limit, config_.gamma, config_.saute_penalty)
             : environment.clone();
  const std::size_t obs_dim = env_->observation_dim();
  policy_ = rollout::GaussianPolicy::create(obs_dim, env_->action_dim(), config_.policy_hidden,
                                            config_.init_log_std, rng_);
  if (uses_distributional_heads(config_.variant)) {
    dist_reward_.emplace(obs_dim, config_.value_hidden, config_.num_atoms, dist::HeadRole::reward,
                         config_.critic, rng_);
    dist_cost_.emplace(obs_dim, config_.value_hidden, config_.num_atoms, dist::HeadRole::cost,
                       config_.critic, rng_);
  } else {
    scalar_reward_.emplace(obs_dim, config_.value_hidden, config_.critic, rng_);
    scalar_cost_.emplace(obs_dim, config_.value_hidden, config_.critic, rng_);
  }
}

Eigen::VectorXd Agent::initial_observation() const {
  auto probe = env_->clone();
  return probe->reset(derive_seed(config_.seed, 0, 0));
}

std::pair<Eigen::VectorXd, Eigen::VectorXd> Agent::fit_and_value(
    const Eigen::MatrixXd& states, const Eigen::VectorXd& reward_targets,
    const Eigen::VectorXd& cost_targets, EpochRecord& rec) {
  if (dist_reward_) {
    rec.reward_value_loss = dist_reward_->fit(states, reward_targets, rng_);
    rec.cost_value_loss = dist_cost_->fit(states, cost_targets, rng_);
    return {dist_reward_->values(states), dist_cost_->values(states)};
  }
  rec.reward_value_loss = scalar_reward_->fit(states, reward_targets, rng_);
  rec.cost_value_loss = scalar_cost_->fit(states, cost_targets, rng_);
  return {scalar_reward_->values(states), scalar_cost_->values(states)};
}

EpochRecord Agent::train_epoch() {
  const auto t0 = std::chrono::steady_clock::now();
  EpochRecord rec;
  rec.epoch = epoch_ + 1;
  const double d = config_.cost_limit;

  rollout::CollectOptions opt;
  opt.num_episodes = config_.episodes_per_epoch;
  opt.seed = derive_seed(config_.seed, rec.epoch, 2);
  opt.gamma = config_.gamma;
  opt.threads = config_.threads;
  const auto batch = rollout::collect_batch(policy_, *env_, opt);
  const auto stacked = rollout::stack(batch);
  const Eigen::Index total = stacked.observations.cols();
  const auto episodes = static_cast<double>(batch.size());

  std::vector<double> returns;
  std::vector<double> costs;
  Eigen::VectorXd reward_targets(total);
  Eigen::VectorXd cost_targets(total);
  for (std::size_t e = 0; e < batch.size(); ++e) {
    const auto& tr = batch[e];
    returns.push_back(tr.discounted_raw_return);
    costs.push_back(tr.discounted_cost);
    const auto n = static_cast<Eigen::Index>(tr.size());
    reward_targets.segment(stacked.episode_starts[e], n) = rollout::rewards_to_go(tr.rewards, config_.gamma);
    cost_targets.segment(stacked.episode_starts[e], n) = rollout::rewards_to_go(tr.costs, config_.gamma);
  }
  std::tie(rec.return_mean, rec.return_std) = mean_std(returns);
  std::tie(rec.cost_mean, rec.cost_std) = mean_std(costs);

  const auto [reward_values, cost_values] =
      fit_and_value(stacked.observations, reward_targets, cost_targets, rec);
  std::vector<Eigen::VectorXd> rv(batch.size());
  std::vector<Eigen::VectorXd> cv(batch.size());
  for (std::size_t e = 0; e < batch.size(); ++e) {
    const auto n = static_cast<Eigen::Index>(batch[e].size());
    // Episodes end at the horizon, so the bootstrap value is zero.
    rv[e] = Eigen::VectorXd::Zero(n + 1);
    cv[e] = Eigen::VectorXd::Zero(n + 1);
    rv[e].head(n) = reward_values.segment(stacked.episode_starts[e], n);
    cv[e].head(n) = cost_values.segment(stacked.episode_starts[e], n);
  }
  const auto adv = rollout::build_advantages(batch, rv, cv, config_.gamma, config_.gae_lambda);

  const double j_c = rec.cost_mean;
  double c = j_c - d;
  if (dist_cost_) {
    double p = 0.0;
    for (const auto& tr : batch) {
      p += dist::prob_exceeds(dist_cost_->distribution(tr.observations.col(0)), d);
    }
    rec.p_violate = p / episodes;
  }
  if (config_.variant == Variant::dcpo) {
    rec.rho = reshape::compute_rho(j_c, d, rec.p_violate, config_.reshape);
    const auto shaped = reshape::reshape(j_c, d, rec.rho, config_.reshape);
    rec.multiplier = shaped.multiplier;
    c = shaped.residual;
  }
  rec.residual = c;

  const auto& spec = policy_.spec;
  const Eigen::MatrixXd& obs = stacked.observations;
  const Eigen::MatrixXd& actions = stacked.actions;
  const Eigen::VectorXd& old_logp = stacked.log_probs;
  const Eigen::VectorXd reward_w = adv.reward_advantages;
  const Eigen::VectorXd cost_w = (adv.discount_weights.array() * adv.cost_advantages.array() *
                                  (static_cast<double>(total) / episodes))
                                     .matrix();
  const Eigen::MatrixXd old_mean = policy_.mean_batch(obs);
  const Eigen::VectorXd old_log_std = policy_.log_std();
  const Eigen::VectorXd theta = policy_.params;

  const auto surrogate = [&](const Eigen::VectorXd& p) {
    return rollout::weighted_surrogate<double>(spec, cspan(p), {}, obs, actions, old_logp, reward_w);
  };
  const auto cost_surrogate = [&](const Eigen::VectorXd& p) {
    return rollout::weighted_surrogate<double>(spec, cspan(p), {}, obs, actions, old_logp, cost_w);
  };
  const auto kl = [&](const Eigen::VectorXd& p) {
    return rollout::mean_kl<double>(spec, cspan(p), {}, obs, old_mean, old_log_std);
  };

  Eigen::VectorXd g = Eigen::VectorXd::Zero(theta.size());
  rollout::weighted_surrogate<double>(spec, cspan(theta), mspan(g), obs, actions, old_logp, reward_w);
  g = -g;  // the trust-region problem minimizes
  Eigen::VectorXd b = Eigen::VectorXd::Zero(theta.size());
  rollout::weighted_surrogate<double>(spec, cspan(theta), mspan(b), obs, actions, old_logp, cost_w);

  const auto kl_tape = nn::GradientTape::record(theta, [&spec, &obs, &old_mean, &old_log_std](auto p, auto grad) {
    using S = typename decltype(grad)::element_type;
    return rollout::mean_kl<S>(spec, p, grad, obs, old_mean, old_log_std);
  });
  const double damping = config_.damping;
  const trust::Hvp hvp = [&kl_tape, damping](const Eigen::VectorXd& v) {
    return nn::hessian_vector_product(kl_tape, v, damping);
  };

  trust::LineSearchInputs ls;
  ls.params = theta;
  ls.surrogate = surrogate;
  ls.kl = kl;
  ls.delta = config_.delta;
  trust::LineSearchOptions ls_opt{config_.backtrack_decay, config_.max_backtracks};

  try {
    bool have_step = false;
    if (!is_constrained(config_.variant)) {
      const auto cg = trust::conjugate_gradient(hvp, g, config_.cg_iters, config_.cg_tol);
      const double q = g.dot(cg.x);
      rec.branch = "unconstrained";
      if (q > 0.0 && std::sqrt(q / config_.delta) >= trust::kMinLambda) {
        rec.lambda = std::sqrt(q / config_.delta);
        ls.direction = -cg.x / rec.lambda;
        ls.constrained = false;
        have_step = true;
      }
    } else {
      trust::LinearizedProblem prob{g, b, c, config_.delta, hvp};
      const auto dual = trust::solve_dual(prob, config_.cg_iters, config_.cg_tol);
      rec.branch = std::string(trust::to_string(dual.branch));
      rec.lambda = dual.lambda;
      rec.nu = dual.nu;
      const bool recovery = dual.branch == trust::Branch::recovery;
      if (recovery || dual.lambda >= trust::kMinLambda) {
        ls.direction = trust::compute_step(prob, dual);
        ls.cost = cost_surrogate;
        ls.c = c;
        ls.recovery = recovery;
        have_step = true;
      }
    }
    if (have_step) {
      const auto step = trust::line_search(ls, ls_opt);
      rec.backtracks = step.backtracks;
      rec.accepted = step.accepted;
      if (step.accepted) {
        if (!(step.kl <= config_.delta)) {
          throw TrainingError("accepted update exceeds the KL radius", rec);
        }
        rec.kl = step.kl;
        policy_.params = step.params;
      }
    }
  } catch (const TrainingError&) {
    throw;
  } catch (const std::exception& e) {
    rec.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    throw TrainingError(std::string("epoch ") + std::to_string(rec.epoch) + ": " + e.what(), rec);
  }

  rec.policy_entropy = policy_.entropy();
  ++epoch_;
  rec.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return rec;
}

void Agent::save_policy(const std::filesystem::path& stem, nlohmann::json extra) const {
  nlohmann::json side = std::move(extra);
  if (side.is_null()) side = nlohmann::json::object();
  side["variant"] = std::string(to_string(config_.variant));
  side["epoch"] = epoch_;
  side["agent"] = to_json(config_);
  side["action_dim"] = policy_.action_dim();
  nn::save_checkpoint(stem, policy_.spec, policy_.params, side);
}

std::vector<EvalRow> evaluate(const rollout::GaussianPolicy& policy,
                              const env::Environment& environment, std::size_t episodes,
                              std::uint64_t seed, double gamma, double return_divisor,
                              double cost_divisor) {
  if (episodes == 0) throw std::invalid_argument("evaluate: episodes must be >= 1");
  if (!(return_divisor != 0.0 && cost_divisor != 0.0)) {
    throw std::invalid_argument("evaluate: divisors must be non-zero");
  }
  rollout::CollectOptions opt;
  opt.num_episodes = episodes;
  opt.seed = seed;
  opt.gamma = gamma;
  opt.deterministic = true;
  const auto batch = rollout::collect_batch(policy, environment, opt);
  std::vector<EvalRow> rows;
  rows.reserve(batch.size());
  for (std::size_t e = 0; e < batch.size(); ++e) {
    EvalRow r;
    r.episode = e;
    r.episode_return = batch[e].discounted_raw_return;
    r.episode_cost = batch[e].discounted_cost;
    r.normalized_return = r.episode_return / return_divisor;
    r.normalized_cost = r.episode_cost / cost_divisor;
    rows.push_back(r);
  }
  return rows;
}

}  // namespace safechain::algo

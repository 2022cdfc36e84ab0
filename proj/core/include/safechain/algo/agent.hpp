#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "safechain/algo/critic.hpp"
#include "safechain/env/environment.hpp"
#include "safechain/reshape/reshape.hpp"
#include "safechain/rollout/gaussian_policy.hpp"
#include "safechain/trust/trust_region.hpp"

namespace safechain::algo {

enum class Variant { trpo, cpo, dcpo, dcpo_ablation, saute_trpo };

std::string_view to_string(Variant v);
/// Throws std::invalid_argument for unknown names.
Variant variant_from_string(std::string_view name);

bool uses_distributional_heads(Variant v);
bool is_constrained(Variant v);

struct AgentConfig {
  Variant variant = Variant::dcpo;
  double delta = 0.01;
  double gamma = 0.99;
  double gae_lambda = 0.95;
  std::size_t episodes_per_epoch = 20;
  std::size_t epochs = 150;
  double cost_limit = 15.0;
  std::uint64_t seed = 0;
  reshape::ReshapeConfig reshape;

  std::vector<std::size_t> policy_hidden{64, 64};
  std::vector<std::size_t> value_hidden{64, 64};
  double init_log_std = -0.5;
  CriticOptions critic;
  std::size_t num_atoms = 102;

  int cg_iters = 20;
  double cg_tol = 1e-10;
  double damping = 0.1;
  int max_backtracks = 10;
  double backtrack_decay = 0.8;

  double saute_penalty = -50.0;
  std::size_t threads = 1;

  void validate() const;
};

/// Strict parse: unknown keys raise env::ConfigError naming "agent.<key>".
/// Keys that are absent keep their defaults.
AgentConfig agent_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const AgentConfig& config);

struct EpochRecord {
  std::size_t epoch = 0;
  double return_mean = 0.0;  // discounted task return per episode
  double return_std = 0.0;
  double cost_mean = 0.0;  // discounted cost per episode
  double cost_std = 0.0;
  double kl = 0.0;
  double lambda = 0.0;
  double nu = 0.0;
  double rho = 0.0;
  double multiplier = 1.0;
  double p_violate = 0.0;
  double residual = 0.0;  // constraint residual handed to the dual solver
  std::string branch = "none";
  int backtracks = 0;
  bool accepted = false;
  double reward_value_loss = 0.0;
  double cost_value_loss = 0.0;
  double policy_entropy = 0.0;
  double wall_seconds = 0.0;  // not part of the deterministic record
};

/// Raised when an update cannot be completed; `record()` holds what was
/// computed for the failing epoch.
class TrainingError : public std::runtime_error {
 public:
  TrainingError(const std::string& what, EpochRecord record)
      : std::runtime_error(what), record_(std::move(record)) {}
  const EpochRecord& record() const { return record_; }

 private:
  EpochRecord record_;
};

/// One learner: policy, value heads and the update rule of its variant.
class Agent {
 public:
  /// `environment` is the task; saute_trpo wraps it internally.
  Agent(AgentConfig config, const env::Environment& environment);

  EpochRecord train_epoch();

  const AgentConfig& config() const { return config_; }
  const rollout::GaussianPolicy& policy() const { return policy_; }
  /// Environment the policy acts in (wrapped for saute_trpo).
  const env::Environment& environment() const { return *env_; }
  std::size_t epochs_done() const { return epoch_; }

  /// Observation at the start of an episode.
  Eigen::VectorXd initial_observation() const;
  const DistributionalCritic* reward_distribution() const { return dist_reward_ ? &*dist_reward_ : nullptr; }
  const DistributionalCritic* cost_distribution() const { return dist_cost_ ? &*dist_cost_ : nullptr; }

  /// Writes the policy as `<stem>.bin` + `<stem>.json`; `extra` is merged into
  /// the sidecar.
  void save_policy(const std::filesystem::path& stem, nlohmann::json extra = {}) const;

 private:
  std::pair<Eigen::VectorXd, Eigen::VectorXd> fit_and_value(const Eigen::MatrixXd& states,
                                                            const Eigen::VectorXd& reward_targets,
                                                            const Eigen::VectorXd& cost_targets,
                                                            EpochRecord& rec);

  AgentConfig config_;
  std::unique_ptr<env::Environment> env_;
  rollout::GaussianPolicy policy_;
  std::mt19937_64 rng_;
  std::optional<ScalarCritic> scalar_reward_;
  std::optional<ScalarCritic> scalar_cost_;
  std::optional<DistributionalCritic> dist_reward_;
  std::optional<DistributionalCritic> dist_cost_;
  std::size_t epoch_ = 0;
};

struct EvalRow {
  std::size_t episode = 0;
  double episode_return = 0.0;  // discounted task return
  double episode_cost = 0.0;    // discounted cost
  double normalized_return = 0.0;
  double normalized_cost = 0.0;
};

inline constexpr double kReturnDivisor = 329.5;
inline constexpr double kCostDivisor = 15.0;

/// Rolls the policy mean (no exploration noise) for `episodes` episodes.
std::vector<EvalRow> evaluate(const rollout::GaussianPolicy& policy,
                              const env::Environment& environment, std::size_t episodes,
                              std::uint64_t seed, double gamma = 0.99,
                              double return_divisor = kReturnDivisor,
                              double cost_divisor = kCostDivisor);

}  // namespace safechain::algo

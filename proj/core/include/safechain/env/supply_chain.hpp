#pragma once

#include <cstdint>
#include <deque>
#include <iosfwd>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "safechain/env/environment.hpp"

namespace safechain::env {

/// Thrown for malformed or inconsistent configuration; `key()` names the
/// offending field.
class ConfigError : public std::invalid_argument {
 public:
  ConfigError(std::string key, const std::string& what)
      : std::invalid_argument(key + ": " + what), key_(std::move(key)) {}
  const std::string& key() const { return key_; }

 private:
  std::string key_;
};

enum class DemandModel { poisson, uniform, constant };

struct DemandSpec {
  DemandModel model = DemandModel::poisson;
  double mean = 20.0;  // poisson
  double low = 0.0;    // uniform
  double high = 0.0;   // uniform
  double value = 0.0;  // constant

  double expected() const;
  double variance() const;
};

/// Serial supply chain with M stages: stage 0 is the retailer, stage M-1 the
/// raw-material source (unlimited stock, finite capacity). Stages 0..M-2
/// reorder from their upstream neighbour.
///
/// Per-stage arrays:
///   unit_price, procurement_cost, unfulfilled_penalty: M entries
///   holding_cost, init_inventory, lead_times, max_order: M-1 entries (stages 0..M-2)
///   capacity: M-1 entries, capacity[j] belongs to supplying stage j+1
struct SupplyChainConfig {
  int num_stages = 4;
  int horizon = 30;
  std::vector<int> lead_times;
  std::vector<double> unit_price;
  std::vector<double> procurement_cost;
  std::vector<double> unfulfilled_penalty;
  std::vector<double> holding_cost;
  std::vector<double> capacity;
  double discount = 0.97;
  DemandSpec demand;
  std::vector<double> init_inventory;
  bool backlog = true;
  double cost_limit = 15.0;
  std::vector<double> max_order;
  double observation_scale = 0.01;

  int reordering_stages() const { return num_stages - 1; }
  void validate() const;
};

SupplyChainConfig supply_chain_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const SupplyChainConfig& config);

struct SupplyChainState {
  int t = 0;
  std::vector<double> on_hand;                // stages 0..M-2
  std::vector<std::deque<double>> pipeline;   // per reordering stage, front arrives next
  double backlog = 0.0;                       // retailer backlog B_{t-1}
  double last_demand = 0.0;                   // D_{t-1}
  std::shared_ptr<const std::vector<double>> demand;  // D_0 .. D_{T-1}

  double pipeline_total(std::size_t stage) const;
};

struct StepOutcome {
  SupplyChainState next_state;
  double reward = 0.0;
  int cost = 0;
  bool done = false;
  std::vector<double> sales;        // S_t^m, m = 0..M-1
  std::vector<double> unfulfilled;  // U_t^m, m = 0..M-1
  std::vector<double> requested;    // R_t^m after clipping negatives, m = 0..M-2
  std::vector<double> arrivals;     // R_{t-L_m}^m, m = 0..M-2
  double demand = 0.0;              // D_t
};

SupplyChainState env_reset(const SupplyChainConfig& config, std::uint64_t seed);

/// Advances one period. `orders` are in units, one per reordering stage.
StepOutcome env_step(const SupplyChainState& state, std::span<const double> orders,
                     const SupplyChainConfig& config);

/// Number of capacity and supplier-stock inequalities the orders violate.
int violation_count(const SupplyChainState& state, std::span<const double> orders,
                    const SupplyChainConfig& config);

/// Learner-facing adapter: normalized actions in [-1, 1] map linearly onto
/// [0, max_order]; observations are scaled quantities plus t/T.
class SupplyChainEnv final : public Environment {
 public:
  explicit SupplyChainEnv(SupplyChainConfig config);

  std::size_t observation_dim() const override;
  std::size_t action_dim() const override;
  std::size_t horizon() const override;
  Eigen::VectorXd reset(std::uint64_t seed) override;
  Transition step(std::span<const double> action) override;
  std::unique_ptr<Environment> clone() const override;

  std::vector<double> to_orders(std::span<const double> action) const;
  Eigen::VectorXd observe(const SupplyChainState& state) const;
  const SupplyChainState& state() const { return state_; }
  const SupplyChainConfig& config() const { return config_; }
  const StepOutcome* last_outcome() const { return has_last_ ? &last_ : nullptr; }

 private:
  SupplyChainConfig config_;
  SupplyChainState state_;
  StepOutcome last_;
  bool has_last_ = false;
};

struct ReplayStep {
  SupplyChainState before;
  std::vector<double> orders;
  StepOutcome outcome;
};

/// Runs an episode from `env_reset(config, seed)` with the given order vectors.
std::vector<ReplayStep> replay_episode(const SupplyChainConfig& config, std::uint64_t seed,
                                       const std::vector<std::vector<double>>& orders);

/// CSV with columns t,m,I,T,R,S,U,B,D,reward,cost; one row per stage per period.
/// I and T are the levels at the start of the period.
void write_replay_csv(std::ostream& out, const SupplyChainConfig& config,
                      std::span<const ReplayStep> steps);

}  // namespace safechain::env

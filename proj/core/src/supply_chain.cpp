#include "safechain/env/supply_chain.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <random>
#include <set>

#include "safechain/csv.hpp"

namespace safechain::env {

namespace {

void require(bool ok, const std::string& key, const std::string& what) {
  if (!ok) throw ConfigError(key, what);
}

void check_length(std::size_t got, std::size_t want, const std::string& key) {
  require(got == want, key,
          "expected " + std::to_string(want) + " entries, got " + std::to_string(got));
}

void check_nonneg(const std::vector<double>& v, const std::string& key) {
  for (double x : v) require(std::isfinite(x) && x >= 0.0, key, "entries must be finite and >= 0");
}

void reject_unknown(const nlohmann::json& j, const std::set<std::string>& allowed,
                    const std::string& prefix) {
  require(j.is_object(), prefix.empty() ? "environment" : prefix, "expected a JSON object");
  for (const auto& [key, _] : j.items()) {
    if (!allowed.count(key)) {
      throw ConfigError(prefix.empty() ? key : prefix + "." + key, "unknown key");
    }
  }
}

template <class T>
T get_required(const nlohmann::json& j, const std::string& key, const std::string& prefix) {
  const std::string full = prefix.empty() ? key : prefix + "." + key;
  if (!j.contains(key)) throw ConfigError(full, "missing required key");
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(full, std::string("wrong type (") + e.what() + ")");
  }
}

}  // namespace

double DemandSpec::expected() const {
  switch (model) {
    case DemandModel::poisson: return mean;
    case DemandModel::uniform: return 0.5 * (low + high);
    case DemandModel::constant: return value;
  }
  return 0.0;
}

double DemandSpec::variance() const {
  switch (model) {
    case DemandModel::poisson: return mean;
    case DemandModel::uniform: return (high - low) * (high - low) / 12.0;
    case DemandModel::constant: return 0.0;
  }
  return 0.0;
}

void SupplyChainConfig::validate() const {
  require(num_stages >= 2, "num_stages", "must be >= 2");
  require(horizon >= 1, "horizon", "must be >= 1");
  const auto m = static_cast<std::size_t>(num_stages);
  check_length(lead_times.size(), m - 1, "lead_times");
  for (int l : lead_times) require(l >= 0, "lead_times", "entries must be >= 0");
  check_length(unit_price.size(), m, "unit_price");
  check_length(procurement_cost.size(), m, "procurement_cost");
  check_length(unfulfilled_penalty.size(), m, "unfulfilled_penalty");
  check_length(holding_cost.size(), m - 1, "holding_cost");
  check_length(capacity.size(), m - 1, "capacity");
  check_length(init_inventory.size(), m - 1, "init_inventory");
  check_length(max_order.size(), m - 1, "max_order");
  check_nonneg(unit_price, "unit_price");
  check_nonneg(procurement_cost, "procurement_cost");
  check_nonneg(unfulfilled_penalty, "unfulfilled_penalty");
  check_nonneg(holding_cost, "holding_cost");
  check_nonneg(init_inventory, "init_inventory");
  for (double c : capacity) require(std::isfinite(c) && c > 0.0, "capacity", "entries must be > 0");
  for (double c : max_order) require(std::isfinite(c) && c > 0.0, "max_order", "entries must be > 0");
  require(discount > 0.0 && discount <= 1.0, "discount", "must lie in (0, 1]");
  require(std::isfinite(cost_limit) && cost_limit >= 0.0, "cost_limit", "must be >= 0");
  require(std::isfinite(observation_scale) && observation_scale > 0.0, "observation_scale",
          "must be > 0");
  switch (demand.model) {
    case DemandModel::poisson:
      require(std::isfinite(demand.mean) && demand.mean >= 0.0, "demand.mean", "must be >= 0");
      break;
    case DemandModel::uniform:
      require(std::isfinite(demand.low) && demand.low >= 0.0 && demand.high >= demand.low,
              "demand", "uniform requires 0 <= low <= high");
      break;
    case DemandModel::constant:
      require(std::isfinite(demand.value) && demand.value >= 0.0, "demand.value", "must be >= 0");
      break;
  }
}

SupplyChainConfig supply_chain_config_from_json(const nlohmann::json& j) {
  reject_unknown(j,
                 {"num_stages", "horizon", "lead_times", "unit_price", "procurement_cost",
                  "unfulfilled_penalty", "holding_cost", "capacity", "discount", "demand",
                  "init_inventory", "backlog", "cost_limit", "max_order", "observation_scale"},
                 "environment");
  const std::string p = "environment";
  SupplyChainConfig c;
  c.num_stages = get_required<int>(j, "num_stages", p);
  c.horizon = get_required<int>(j, "horizon", p);
  c.lead_times = get_required<std::vector<int>>(j, "lead_times", p);
  c.unit_price = get_required<std::vector<double>>(j, "unit_price", p);
  c.procurement_cost = get_required<std::vector<double>>(j, "procurement_cost", p);
  c.unfulfilled_penalty = get_required<std::vector<double>>(j, "unfulfilled_penalty", p);
  c.holding_cost = get_required<std::vector<double>>(j, "holding_cost", p);
  c.capacity = get_required<std::vector<double>>(j, "capacity", p);
  c.discount = get_required<double>(j, "discount", p);
  c.init_inventory = get_required<std::vector<double>>(j, "init_inventory", p);
  c.backlog = get_required<bool>(j, "backlog", p);
  c.cost_limit = get_required<double>(j, "cost_limit", p);
  c.max_order = get_required<std::vector<double>>(j, "max_order", p);
  c.observation_scale = get_required<double>(j, "observation_scale", p);

  if (!j.contains("demand")) throw ConfigError("environment.demand", "missing required key");
  const auto& d = j.at("demand");
  const std::string dp = "environment.demand";
  const auto model = get_required<std::string>(d, "model", dp);
  if (model == "poisson") {
    reject_unknown(d, {"model", "mean"}, dp);
    c.demand.model = DemandModel::poisson;
    c.demand.mean = get_required<double>(d, "mean", dp);
  } else if (model == "uniform") {
    reject_unknown(d, {"model", "low", "high"}, dp);
    c.demand.model = DemandModel::uniform;
    c.demand.low = get_required<double>(d, "low", dp);
    c.demand.high = get_required<double>(d, "high", dp);
  } else if (model == "constant") {
    reject_unknown(d, {"model", "value"}, dp);
    c.demand.model = DemandModel::constant;
    c.demand.value = get_required<double>(d, "value", dp);
  } else {
    throw ConfigError(dp + ".model", "unknown demand model '" + model + "'");
  }
  try {
    c.validate();
  } catch (const ConfigError& e) {
    throw ConfigError("environment." + e.key(), std::string(e.what()).substr(e.key().size() + 2));
  }
  return c;
}

nlohmann::json to_json(const SupplyChainConfig& c) {
  nlohmann::json demand;
  switch (c.demand.model) {
    case DemandModel::poisson: demand = {{"model", "poisson"}, {"mean", c.demand.mean}}; break;
    case DemandModel::uniform:
      demand = {{"model", "uniform"}, {"low", c.demand.low}, {"high", c.demand.high}};
      break;
    case DemandModel::constant: demand = {{"model", "constant"}, {"value", c.demand.value}}; break;
  }
  return {{"num_stages", c.num_stages},
          {"horizon", c.horizon},
          {"lead_times", c.lead_times},
          {"unit_price", c.unit_price},
          {"procurement_cost", c.procurement_cost},
          {"unfulfilled_penalty", c.unfulfilled_penalty},
          {"holding_cost", c.holding_cost},
          {"capacity", c.capacity},
          {"discount", c.discount},
          {"demand", demand},
          {"init_inventory", c.init_inventory},
          {"backlog", c.backlog},
          {"cost_limit", c.cost_limit},
          {"max_order", c.max_order},
          {"observation_scale", c.observation_scale}};
}

double SupplyChainState::pipeline_total(std::size_t stage) const {
  double total = 0.0;
  for (double q : pipeline.at(stage)) total += q;
  return total;
}

SupplyChainState env_reset(const SupplyChainConfig& config, std::uint64_t seed) {
  config.validate();
  SupplyChainState s;
  s.t = 0;
  s.on_hand = config.init_inventory;
  const auto stages = static_cast<std::size_t>(config.reordering_stages());
  s.pipeline.resize(stages);
  for (std::size_t m = 0; m < stages; ++m) {
    s.pipeline[m].assign(static_cast<std::size_t>(config.lead_times[m]), 0.0);
  }
  s.backlog = 0.0;
  s.last_demand = 0.0;

  auto demand = std::make_shared<std::vector<double>>(static_cast<std::size_t>(config.horizon));
  std::mt19937_64 rng(seed);
  switch (config.demand.model) {
    case DemandModel::poisson: {
      std::poisson_distribution<long> dist(config.demand.mean);
      for (auto& d : *demand) d = static_cast<double>(config.demand.mean > 0 ? dist(rng) : 0);
      break;
    }
    case DemandModel::uniform: {
      std::uniform_real_distribution<double> dist(config.demand.low, config.demand.high);
      for (auto& d : *demand) d = config.demand.high > config.demand.low ? dist(rng) : config.demand.low;
      break;
    }
    case DemandModel::constant:
      std::fill(demand->begin(), demand->end(), config.demand.value);
      break;
  }
  s.demand = std::move(demand);
  return s;
}

int violation_count(const SupplyChainState& state, std::span<const double> orders,
                    const SupplyChainConfig& config) {
  const auto stages = static_cast<std::size_t>(config.reordering_stages());
  if (orders.size() != stages) {
    throw std::invalid_argument("violation_count: expected " + std::to_string(stages) +
                                " orders, got " + std::to_string(orders.size()));
  }
  int count = 0;
  for (std::size_t m = 0; m < stages; ++m) {
    const double r = std::max(orders[m], 0.0);
    if (r > config.capacity[m]) ++count;
    // The raw-material source (stage M-1) holds unlimited stock.
    if (m + 1 < stages && r > state.on_hand[m + 1]) ++count;
  }
  return count;
}

StepOutcome env_step(const SupplyChainState& state, std::span<const double> orders,
                     const SupplyChainConfig& config) {
  const auto stages = static_cast<std::size_t>(config.reordering_stages());
  const auto m_total = static_cast<std::size_t>(config.num_stages);
  if (orders.size() != stages) {
    throw std::invalid_argument("env_step: expected " + std::to_string(stages) +
                                " orders, got " + std::to_string(orders.size()));
  }
  if (state.t >= config.horizon) throw std::logic_error("env_step: episode already finished");
  if (!state.demand || state.demand->size() != static_cast<std::size_t>(config.horizon)) {
    throw std::logic_error("env_step: state was not produced by env_reset for this config");
  }

  StepOutcome out;
  out.requested.resize(stages);
  for (std::size_t m = 0; m < stages; ++m) {
    if (!std::isfinite(orders[m])) throw std::invalid_argument("env_step: non-finite order");
    out.requested[m] = std::max(orders[m], 0.0);
  }
  out.cost = violation_count(state, out.requested, config);

  // 1. Orders are filled from supplier capacity and on-hand stock.
  out.sales.assign(m_total, 0.0);
  out.unfulfilled.assign(m_total, 0.0);
  for (std::size_t m = 0; m < stages; ++m) {
    const std::size_t supplier = m + 1;
    const double stock = supplier < stages ? state.on_hand[supplier]
                                           : std::numeric_limits<double>::infinity();
    out.sales[supplier] = std::min({out.requested[m], config.capacity[m], stock});
    out.unfulfilled[supplier] = out.requested[m] - out.sales[supplier];
  }

  // 2. Shipments enter the pipeline; those whose lead time has elapsed arrive.
  SupplyChainState next = state;
  out.arrivals.resize(stages);
  for (std::size_t m = 0; m < stages; ++m) {
    auto& pipe = next.pipeline[m];
    pipe.push_back(out.sales[m + 1]);
    out.arrivals[m] = pipe.front();
    pipe.pop_front();
  }

  // 3-4. Retail demand plus backlog is served from stock on hand and arrivals.
  out.demand = (*state.demand)[static_cast<std::size_t>(state.t)];
  const double owed = out.demand + state.backlog;
  out.sales[0] = std::min(state.on_hand[0] + out.arrivals[0], owed);
  out.unfulfilled[0] = owed - out.sales[0];
  next.backlog = config.backlog ? out.unfulfilled[0] : 0.0;

  for (std::size_t m = 0; m < stages; ++m) {
    next.on_hand[m] = state.on_hand[m] + out.arrivals[m] - out.sales[m];
  }

  // 5. Profit, discounted by alpha^t. Procurement is paid on what is shipped;
  // the source pays for the raw material it sells.
  double profit = 0.0;
  for (std::size_t m = 0; m < m_total; ++m) {
    const double bought = m < stages ? out.sales[m + 1] : out.sales[m];
    const double held = m < stages ? next.on_hand[m] : 0.0;
    const double holding = m < stages ? config.holding_cost[m] : 0.0;
    profit += config.unit_price[m] * out.sales[m] - config.procurement_cost[m] * bought -
              config.unfulfilled_penalty[m] * out.unfulfilled[m] - holding * held;
  }
  out.reward = std::pow(config.discount, state.t) * profit;

  next.last_demand = out.demand;
  next.t = state.t + 1;
  out.done = next.t == config.horizon;
  out.next_state = std::move(next);
  return out;
}

SupplyChainEnv::SupplyChainEnv(SupplyChainConfig config) : config_(std::move(config)) {
  config_.validate();
  state_ = env_reset(config_, 0);
}

std::size_t SupplyChainEnv::observation_dim() const {
  std::size_t slots = 0;
  for (int l : config_.lead_times) slots += static_cast<std::size_t>(l);
  return static_cast<std::size_t>(config_.reordering_stages()) + slots + 2;
}

std::size_t SupplyChainEnv::action_dim() const {
  return static_cast<std::size_t>(config_.reordering_stages());
}

std::size_t SupplyChainEnv::horizon() const { return static_cast<std::size_t>(config_.horizon); }

Eigen::VectorXd SupplyChainEnv::reset(std::uint64_t seed) {
  state_ = env_reset(config_, seed);
  has_last_ = false;
  return observe(state_);
}

std::vector<double> SupplyChainEnv::to_orders(std::span<const double> action) const {
  if (action.size() != action_dim()) throw std::invalid_argument("SupplyChainEnv: bad action size");
  std::vector<double> orders(action.size());
  for (std::size_t m = 0; m < action.size(); ++m) {
    const double a = std::clamp(action[m], -1.0, 1.0);
    orders[m] = 0.5 * (a + 1.0) * config_.max_order[m];
  }
  return orders;
}

Eigen::VectorXd SupplyChainEnv::observe(const SupplyChainState& s) const {
  Eigen::VectorXd obs(static_cast<Eigen::Index>(observation_dim()));
  Eigen::Index i = 0;
  const double k = config_.observation_scale;
  for (double x : s.on_hand) obs[i++] = k * x;
  for (const auto& pipe : s.pipeline) {
    for (double q : pipe) obs[i++] = k * q;
  }
  obs[i++] = k * s.backlog;
  obs[i++] = static_cast<double>(s.t) / static_cast<double>(config_.horizon);
  return obs;
}

Transition SupplyChainEnv::step(std::span<const double> action) {
  const auto orders = to_orders(action);
  last_ = env_step(state_, orders, config_);
  has_last_ = true;
  state_ = last_.next_state;
  Transition tr;
  tr.observation = observe(state_);
  tr.reward = last_.reward;
  tr.raw_reward = last_.reward;
  tr.cost = static_cast<double>(last_.cost);
  tr.done = last_.done;
  return tr;
}

std::unique_ptr<Environment> SupplyChainEnv::clone() const {
  return std::make_unique<SupplyChainEnv>(*this);
}

std::vector<ReplayStep> replay_episode(const SupplyChainConfig& config, std::uint64_t seed,
                                       const std::vector<std::vector<double>>& orders) {
  std::vector<ReplayStep> steps;
  SupplyChainState s = env_reset(config, seed);
  for (const auto& o : orders) {
    if (s.t >= config.horizon) break;
    ReplayStep step{s, o, env_step(s, o, config)};
    s = step.outcome.next_state;
    steps.push_back(std::move(step));
  }
  return steps;
}

void write_replay_csv(std::ostream& out, const SupplyChainConfig& config,
                      std::span<const ReplayStep> steps) {
  out << "t,m,I,T,R,S,U,B,D,reward,cost\n";
  const auto stages = static_cast<std::size_t>(config.reordering_stages());
  for (const auto& st : steps) {
    for (std::size_t m = 0; m <= stages; ++m) {
      const double inv = m < stages ? st.before.on_hand[m] : 0.0;
      const double pipe = m < stages ? st.before.pipeline_total(m) : 0.0;
      const double req = m < stages ? st.outcome.requested[m] : st.outcome.sales[m];
      const double backlog = m == 0 ? st.outcome.next_state.backlog : 0.0;
      out << st.before.t << ',' << m << ',' << format_number(inv) << ',' << format_number(pipe)
          << ',' << format_number(req) << ',' << format_number(st.outcome.sales[m]) << ','
          << format_number(st.outcome.unfulfilled[m]) << ',' << format_number(backlog) << ','
          << format_number(st.outcome.demand) << ',' << format_number(st.outcome.reward) << ','
          << st.outcome.cost << '\n';
    }
  }
}

}  // namespace safechain::env

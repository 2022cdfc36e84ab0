#include "safechain/harness/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "safechain/algo/saute.hpp"
#include "safechain/harness/svg.hpp"
#include "safechain/nn/checkpoint.hpp"
#include "safechain/seeding.hpp"

namespace safechain::harness {

namespace fs = std::filesystem;
using env::ConfigError;

const std::vector<std::string> kMetricsColumns{
    "epoch",    "return_mean", "return_std", "cost_mean",  "cost_std",
    "kl",       "lambda",      "nu",         "rho",        "multiplier",
    "p_violate", "residual",   "branch",     "backtracks", "accepted",
    "reward_value_loss", "cost_value_loss", "policy_entropy"};
const std::vector<std::string> kTimingColumns{"epoch", "wall_seconds"};
const std::vector<std::string> kQuantileColumns{"epoch", "head", "atom", "value", "prob"};
const std::vector<std::string> kEvalColumns{"episode", "return", "cost", "normalized_return",
                                            "normalized_cost"};
const std::vector<std::string> kAggregateColumns{"epoch", "seeds", "return_mean", "return_std",
                                                 "cost_mean", "cost_std"};

namespace {

void write_header(std::ostream& out, const std::vector<std::string>& cols) {
  for (std::size_t i = 0; i < cols.size(); ++i) out << (i ? "," : "") << cols[i];
  out << '\n';
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

void write_text(const fs::path& path, const std::string& text) {
  auto out = open_out(path);
  out << text;
}

std::pair<double, double> mean_pstd(const std::vector<double>& xs) {
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= static_cast<double>(xs.size());
  double var = 0.0;
  for (double x : xs) var += (x - mean) * (x - mean);
  return {mean, std::sqrt(var / static_cast<double>(xs.size()))};
}

std::string seed_dir_name(std::uint64_t seed) { return "seed_" + std::to_string(seed); }

std::vector<std::size_t> snapshot_epochs(std::size_t epochs, std::size_t every) {
  std::set<std::size_t> s{1, std::max<std::size_t>(1, epochs / 2), epochs};
  if (every > 0) {
    for (std::size_t e = every; e <= epochs; e += every) s.insert(e);
  }
  return {s.begin(), s.end()};
}

void write_quantiles(std::ostream& out, std::size_t epoch, const char* head,
                     const dist::AtomicDistribution& d) {
  for (std::size_t i = 0; i < d.grid.size(); ++i) {
    out << epoch << ',' << head << ',' << i << ',' << format_number(d.grid.atom(i)) << ','
        << format_number(d.probs[static_cast<Eigen::Index>(i)]) << '\n';
  }
}

std::unique_ptr<env::Environment> make_env(const env::SupplyChainConfig& ec,
                                           const algo::AgentConfig& ac) {
  env::SupplyChainEnv base(ec);
  if (ac.variant == algo::Variant::saute_trpo) {
    return algo::saute_wrap(base, ac.cost_limit, ac.gamma, ac.saute_penalty);
  }
  return base.clone();
}

std::uint64_t eval_seed_for(std::uint64_t seed) { return derive_seed(seed, 0, 5); }

}  // namespace

ExperimentSpec experiment_from_json(const nlohmann::json& config) {
  if (!config.is_object()) throw ConfigError("config", "expected a JSON object");
  static const std::set<std::string> allowed{"environment", "agent", "variants", "eval_episodes",
                                             "checkpoint_every"};
  for (const auto& [key, value] : config.items()) {
    if (!allowed.contains(key)) throw ConfigError(key, "unknown key");
  }
  ExperimentSpec spec;
  if (!config.contains("environment")) throw ConfigError("environment", "missing required key");
  spec.environment = env::supply_chain_config_from_json(config.at("environment"));
  spec.agent = algo::agent_config_from_json(config.value("agent", nlohmann::json::object()));
  if (config.contains("agent") && config.at("agent").contains("cost_limit")) {
    if (spec.agent.cost_limit != spec.environment.cost_limit) {
      throw ConfigError("agent.cost_limit", "disagrees with environment.cost_limit");
    }
  }
  spec.agent.cost_limit = spec.environment.cost_limit;
  if (!(spec.agent.cost_limit > 0.0)) {
    throw ConfigError("environment.cost_limit", "must be > 0 for training");
  }

  if (!config.contains("variants")) throw ConfigError("variants", "missing required key");
  const auto& vs = config.at("variants");
  if (!vs.is_array() || vs.empty()) throw ConfigError("variants", "expected a non-empty array");
  for (const auto& v : vs) {
    if (!v.is_string()) throw ConfigError("variants", "entries must be strings");
    algo::Variant variant{};
    try {
      variant = algo::variant_from_string(v.get<std::string>());
    } catch (const std::invalid_argument& e) {
      throw ConfigError("variants", e.what());
    }
    if (std::find(spec.variants.begin(), spec.variants.end(), variant) != spec.variants.end()) {
      throw ConfigError("variants", "duplicate variant");
    }
    spec.variants.push_back(variant);
  }
  const auto read_count = [&](const char* key, std::size_t& out, std::size_t min) {
    if (!config.contains(key)) return;
    const auto& v = config.at(key);
    if (!v.is_number_integer() || v.get<long long>() < static_cast<long long>(min)) {
      throw ConfigError(key, "expected an integer >= " + std::to_string(min));
    }
    out = v.get<std::size_t>();
  };
  read_count("eval_episodes", spec.eval_episodes, 1);
  read_count("checkpoint_every", spec.checkpoint_every, 0);
  return spec;
}

ExperimentSpec load_experiment(const fs::path& config_path) {
  std::ifstream in(config_path);
  if (!in) throw MissingInput("cannot read config " + config_path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("config", std::string("invalid JSON: ") + e.what());
  }
  return experiment_from_json(j);
}

nlohmann::json to_json(const ExperimentSpec& spec) {
  nlohmann::json variants = nlohmann::json::array();
  for (auto v : spec.variants) variants.push_back(std::string(algo::to_string(v)));
  nlohmann::json agent = algo::to_json(spec.agent);
  agent.erase("variant");
  return {{"environment", env::to_json(spec.environment)},
          {"agent", agent},
          {"variants", variants},
          {"eval_episodes", spec.eval_episodes},
          {"checkpoint_every", spec.checkpoint_every}};
}

std::vector<std::uint64_t> parse_seed_list(const std::string& text) {
  std::vector<std::uint64_t> seeds;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto b = item.find_first_not_of(" \t");
    const auto e = item.find_last_not_of(" \t");
    if (b == std::string::npos) throw ConfigError("seeds", "empty entry");
    item = item.substr(b, e - b + 1);
    std::uint64_t v = 0;
    const auto res = std::from_chars(item.data(), item.data() + item.size(), v);
    if (res.ec != std::errc() || res.ptr != item.data() + item.size()) {
      throw ConfigError("seeds", "not a non-negative integer: '" + item + "'");
    }
    if (std::find(seeds.begin(), seeds.end(), v) != seeds.end()) {
      throw ConfigError("seeds", "duplicate seed " + item);
    }
    seeds.push_back(v);
  }
  if (seeds.empty()) throw ConfigError("seeds", "at least one seed is required");
  return seeds;
}

std::size_t threads_from_env() {
  const char* raw = std::getenv("SAFE_CHAIN_THREADS");
  if (!raw || !*raw) return 1;
  std::size_t n = 0;
  const std::string s(raw);
  const auto res = std::from_chars(s.data(), s.data() + s.size(), n);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size() || n == 0) {
    throw ConfigError("SAFE_CHAIN_THREADS", "expected a positive integer");
  }
  return n;
}

void write_metrics_header(std::ostream& out) { write_header(out, kMetricsColumns); }

void write_metrics_row(std::ostream& out, const algo::EpochRecord& r) {
  out << r.epoch << ',' << format_number(r.return_mean) << ',' << format_number(r.return_std) << ','
      << format_number(r.cost_mean) << ',' << format_number(r.cost_std) << ','
      << format_number(r.kl) << ',' << format_number(r.lambda) << ',' << format_number(r.nu) << ','
      << format_number(r.rho) << ',' << format_number(r.multiplier) << ','
      << format_number(r.p_violate) << ',' << format_number(r.residual) << ',' << r.branch << ','
      << r.backtracks << ',' << (r.accepted ? 1 : 0) << ',' << format_number(r.reward_value_loss)
      << ',' << format_number(r.cost_value_loss) << ',' << format_number(r.policy_entropy) << '\n';
}

CsvTable aggregate_metrics(const std::vector<CsvTable>& per_seed) {
  if (per_seed.empty()) throw std::invalid_argument("aggregate_metrics: no tables");
  const std::size_t rows = per_seed.front().rows.size();
  for (const auto& t : per_seed) {
    if (t.rows.size() != rows) throw std::invalid_argument("aggregate_metrics: epoch counts differ");
  }
  CsvTable out;
  out.header = kAggregateColumns;
  for (std::size_t i = 0; i < rows; ++i) {
    const double epoch = per_seed.front().number(i, "epoch");
    std::vector<double> ret;
    std::vector<double> cost;
    for (const auto& t : per_seed) {
      if (t.number(i, "epoch") != epoch) throw std::invalid_argument("aggregate_metrics: epochs differ");
      ret.push_back(t.number(i, "return_mean"));
      cost.push_back(t.number(i, "cost_mean"));
    }
    const auto [rm, rs] = mean_pstd(ret);
    const auto [cm, cs] = mean_pstd(cost);
    out.rows.push_back({format_number(epoch), std::to_string(per_seed.size()), format_number(rm),
                        format_number(rs), format_number(cm), format_number(cs)});
  }
  return out;
}

void write_eval_csv(std::ostream& out, const std::vector<algo::EvalRow>& rows) {
  write_header(out, kEvalColumns);
  for (const auto& r : rows) {
    out << r.episode << ',' << format_number(r.episode_return) << ','
        << format_number(r.episode_cost) << ',' << format_number(r.normalized_return) << ','
        << format_number(r.normalized_cost) << '\n';
  }
}

CsvTable read_csv_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw MissingInput("missing " + path.string());
  return read_csv(in);
}

SeedOutcome run_seed(const ExperimentSpec& spec, algo::Variant variant, std::uint64_t seed,
                     const fs::path& dir, std::ostream* log) {
  SeedOutcome outcome{variant, seed, dir, false, {}};
  fs::create_directories(dir / "checkpoints");
  algo::AgentConfig ac = spec.agent;
  ac.variant = variant;
  ac.seed = seed;
  ac.threads = spec.threads;

  auto metrics = open_out(dir / "metrics.csv");
  auto timing = open_out(dir / "timing.csv");
  write_metrics_header(metrics);
  write_header(timing, kTimingColumns);
  std::ofstream quantiles;
  if (algo::uses_distributional_heads(variant)) {
    quantiles = open_out(dir / "quantiles.csv");
    write_header(quantiles, kQuantileColumns);
  }
  const nlohmann::json extra{{"environment", env::to_json(spec.environment)}, {"seed", seed}};
  const auto snapshots = snapshot_epochs(ac.epochs, spec.checkpoint_every);

  try {
    algo::Agent agent(ac, env::SupplyChainEnv(spec.environment));
    const Eigen::VectorXd s0 = agent.initial_observation();
    for (std::size_t e = 1; e <= ac.epochs; ++e) {
      const auto rec = agent.train_epoch();
      write_metrics_row(metrics, rec);
      timing << rec.epoch << ',' << format_number(rec.wall_seconds) << '\n';
      const bool snap = std::binary_search(snapshots.begin(), snapshots.end(), e);
      if (snap && agent.reward_distribution()) {
        write_quantiles(quantiles, e, "reward", agent.reward_distribution()->distribution(s0));
        write_quantiles(quantiles, e, "cost", agent.cost_distribution()->distribution(s0));
      }
      if ((spec.checkpoint_every > 0 && e % spec.checkpoint_every == 0) || e == ac.epochs) {
        agent.save_policy(dir / "checkpoints" / ("epoch_" + std::to_string(e)), extra);
      }
      if (log) {
        *log << algo::to_string(variant) << " seed " << seed << " epoch " << e << " return "
             << format_number(rec.return_mean) << " cost " << format_number(rec.cost_mean) << '\n';
      }
    }
    const auto rows = algo::evaluate(agent.policy(), agent.environment(), spec.eval_episodes,
                                     eval_seed_for(seed), ac.gamma);
    auto eval = open_out(dir / "eval.csv");
    write_eval_csv(eval, rows);
    outcome.ok = true;
  } catch (const algo::TrainingError& e) {
    metrics.flush();
    outcome.error = e.what();
    std::ostringstream row;
    write_metrics_row(row, e.record());
    write_text(dir / "error.log", "variant " + std::string(algo::to_string(variant)) + " seed " +
                                      std::to_string(seed) + ": " + e.what() + "\nlast record: " +
                                      row.str());
  } catch (const std::exception& e) {
    outcome.error = e.what();
    write_text(dir / "error.log", "variant " + std::string(algo::to_string(variant)) + " seed " +
                                      std::to_string(seed) + ": " + e.what() + "\n");
  }
  return outcome;
}

std::vector<SeedOutcome> run(const ExperimentSpec& spec, std::ostream* log) {
  if (spec.seeds.empty()) throw ConfigError("seeds", "at least one seed is required");
  if (spec.variants.empty()) throw ConfigError("variants", "at least one variant is required");
  fs::create_directories(spec.out_dir);
  write_text(spec.out_dir / "config.json", to_json(spec).dump(2) + "\n");

  std::vector<SeedOutcome> outcomes;
  for (auto variant : spec.variants) {
    const fs::path vdir = spec.out_dir / std::string(algo::to_string(variant));
    std::vector<CsvTable> tables;
    bool all_ok = true;
    for (auto seed : spec.seeds) {
      auto o = run_seed(spec, variant, seed, vdir / seed_dir_name(seed), log);
      all_ok = all_ok && o.ok;
      if (o.ok) tables.push_back(read_csv_file(o.dir / "metrics.csv"));
      outcomes.push_back(std::move(o));
    }
    if (all_ok) {
      const CsvTable agg = aggregate_metrics(tables);
      auto out = open_out(vdir / "aggregate.csv");
      write_header(out, agg.header);
      for (const auto& row : agg.rows) write_header(out, row);
    }
  }
  return outcomes;
}

std::vector<algo::EvalRow> eval_checkpoint(const fs::path& stem, std::size_t episodes,
                                           std::uint64_t seed) {
  if (!fs::exists(stem.string() + ".bin") || !fs::exists(stem.string() + ".json")) {
    throw MissingInput("checkpoint not found: " + stem.string());
  }
  const auto ck = nn::load_checkpoint(stem);
  if (!ck.sidecar.contains("environment") || !ck.sidecar.contains("agent")) {
    throw MissingInput("checkpoint sidecar lacks environment/agent sections: " + stem.string());
  }
  const auto ec = env::supply_chain_config_from_json(ck.sidecar.at("environment"));
  const auto ac = algo::agent_config_from_json(ck.sidecar.at("agent"));
  rollout::GaussianPolicy policy;
  policy.spec = ck.spec;
  policy.params = ck.values;
  rollout::detail::check_policy_params(policy.spec, static_cast<std::size_t>(policy.params.size()));
  const auto environment = make_env(ec, ac);
  if (environment->observation_dim() != policy.spec.input_dim ||
      environment->action_dim() != policy.action_dim()) {
    throw std::runtime_error("checkpoint policy does not match its environment");
  }
  return algo::evaluate(policy, *environment, episodes, seed, ac.gamma);
}

namespace {

struct SeedFiles {
  std::string variant;
  std::uint64_t seed;
  fs::path dir;
};

std::vector<SeedFiles> discover(const fs::path& in) {
  std::vector<SeedFiles> out;
  for (auto v : {algo::Variant::trpo, algo::Variant::cpo, algo::Variant::dcpo,
                 algo::Variant::dcpo_ablation, algo::Variant::saute_trpo}) {
    const fs::path vdir = in / std::string(algo::to_string(v));
    if (!fs::is_directory(vdir)) continue;
    std::vector<std::uint64_t> seeds;
    for (const auto& entry : fs::directory_iterator(vdir)) {
      const std::string name = entry.path().filename().string();
      if (!entry.is_directory() || name.rfind("seed_", 0) != 0) continue;
      std::uint64_t s = 0;
      const auto digits = name.substr(5);
      const auto res = std::from_chars(digits.data(), digits.data() + digits.size(), s);
      if (res.ec == std::errc() && res.ptr == digits.data() + digits.size()) seeds.push_back(s);
    }
    std::sort(seeds.begin(), seeds.end());
    for (auto s : seeds) out.push_back({std::string(algo::to_string(v)), s, vdir / seed_dir_name(s)});
  }
  return out;
}

}  // namespace

void report(const fs::path& in) {
  if (!fs::is_directory(in)) throw MissingInput("not a directory: " + in.string());
  const auto seeds = discover(in);
  if (seeds.empty()) throw MissingInput("no <variant>/seed_<n> directories under " + in.string());

  // Training curves, recomputed from the per-seed metrics.
  std::map<std::string, std::vector<CsvTable>> by_variant;
  for (const auto& s : seeds) by_variant[s.variant].push_back(read_csv_file(s.dir / "metrics.csv"));
  std::vector<std::string> variant_order;
  for (const auto& s : seeds) {
    if (std::find(variant_order.begin(), variant_order.end(), s.variant) == variant_order.end()) {
      variant_order.push_back(s.variant);
    }
  }
  {
    auto out = open_out(in / "fig_training.csv");
    out << "epoch,variant,seeds,return_mean,return_std,cost_mean,cost_std\n";
    std::vector<Series> ret_series;
    std::vector<Series> cost_series;
    for (const auto& v : variant_order) {
      const CsvTable agg = aggregate_metrics(by_variant[v]);
      Series rs{v, {}, {}, {}};
      Series cs{v, {}, {}, {}};
      for (std::size_t i = 0; i < agg.rows.size(); ++i) {
        const auto& r = agg.rows[i];
        out << r[0] << ',' << v << ',' << r[1] << ',' << r[2] << ',' << r[3] << ',' << r[4] << ','
            << r[5] << '\n';
        rs.x.push_back(agg.number(i, "epoch"));
        rs.y.push_back(agg.number(i, "return_mean"));
        rs.band.push_back(agg.number(i, "return_std"));
        cs.x.push_back(agg.number(i, "epoch"));
        cs.y.push_back(agg.number(i, "cost_mean"));
        cs.band.push_back(agg.number(i, "cost_std"));
      }
      ret_series.push_back(std::move(rs));
      cost_series.push_back(std::move(cs));
    }
    write_text(in / "fig_training_return.svg",
               line_chart(ret_series, {"Discounted return (mean +/- std over seeds)", "epoch",
                                       "return", std::nullopt}));
    std::optional<double> limit;
    if (fs::exists(in / "config.json")) {
      std::ifstream cj(in / "config.json");
      const auto j = nlohmann::json::parse(cj, nullptr, false);
      if (!j.is_discarded() && j.contains("environment") && j["environment"].contains("cost_limit")) {
        limit = j["environment"]["cost_limit"].get<double>();
      }
    }
    write_text(in / "fig_training_cost.svg",
               line_chart(cost_series, {"Discounted cost (mean +/- std over seeds)", "epoch",
                                        "cost", limit}));
  }

  // Return-distribution snapshots at the initial state.
  {
    auto out = open_out(in / "fig_quantiles.csv");
    out << "variant,seed,epoch,atom,value,prob\n";
    std::vector<Series> curves;
    bool charted = false;
    for (const auto& s : seeds) {
      const fs::path q = s.dir / "quantiles.csv";
      if (!fs::exists(q)) continue;
      const CsvTable t = read_csv_file(q);
      std::map<std::string, Series> per_epoch;
      for (std::size_t i = 0; i < t.rows.size(); ++i) {
        if (t.rows[i][t.column("head")] != "reward") continue;
        const auto& ep = t.rows[i][t.column("epoch")];
        out << s.variant << ',' << s.seed << ',' << ep << ',' << t.rows[i][t.column("atom")] << ','
            << t.rows[i][t.column("value")] << ',' << t.rows[i][t.column("prob")] << '\n';
        if (!charted) {
          auto& series = per_epoch[ep];
          series.name = "epoch " + ep;
          series.x.push_back(t.number(i, "value"));
          series.y.push_back(t.number(i, "prob"));
        }
      }
      if (!charted && !per_epoch.empty()) {
        std::vector<std::pair<double, Series>> ordered;
        for (auto& [ep, series] : per_epoch) ordered.emplace_back(parse_number(ep), std::move(series));
        std::sort(ordered.begin(), ordered.end(),
                  [](const auto& a, const auto& b) { return a.first < b.first; });
        for (auto& [ep, series] : ordered) curves.push_back(std::move(series));
        write_text(in / "fig_quantiles.svg",
                   line_chart(curves, {"Return distribution at s0 (" + s.variant + ", seed " +
                                           std::to_string(s.seed) + ")",
                                       "return", "probability", std::nullopt}));
        charted = true;
      }
    }
  }

  // Evaluation tables.
  {
    auto out = open_out(in / "fig_eval.csv");
    out << "variant,seed,episode,normalized_return,normalized_cost\n";
    std::vector<Series> points;
    for (const auto& s : seeds) {
      const fs::path e = s.dir / "eval.csv";
      if (!fs::exists(e)) continue;
      const CsvTable t = read_csv_file(e);
      for (std::size_t i = 0; i < t.rows.size(); ++i) {
        out << s.variant << ',' << s.seed << ',' << t.rows[i][t.column("episode")] << ','
            << t.rows[i][t.column("normalized_return")] << ','
            << t.rows[i][t.column("normalized_cost")] << '\n';
      }
    }
    std::vector<Series> ret;
    std::vector<Series> cost;
    for (const auto& v : variant_order) {
      Series rs{v, {}, {}, {}};
      Series cs{v, {}, {}, {}};
      for (const auto& s : seeds) {
        if (s.variant != v || !fs::exists(s.dir / "eval.csv")) continue;
        const CsvTable t = read_csv_file(s.dir / "eval.csv");
        std::vector<double> r;
        std::vector<double> c;
        for (std::size_t i = 0; i < t.rows.size(); ++i) {
          r.push_back(t.number(i, "normalized_return"));
          c.push_back(t.number(i, "normalized_cost"));
        }
        if (r.empty()) continue;
        const auto [rm, rsd] = mean_pstd(r);
        const auto [cm, csd] = mean_pstd(c);
        rs.x.push_back(static_cast<double>(s.seed));
        rs.y.push_back(rm);
        rs.band.push_back(rsd);
        cs.x.push_back(static_cast<double>(s.seed));
        cs.y.push_back(cm);
        cs.band.push_back(csd);
      }
      if (!rs.x.empty()) {
        ret.push_back(std::move(rs));
        cost.push_back(std::move(cs));
      }
    }
    write_text(in / "fig_eval_return.svg",
               line_chart(ret, {"Normalized evaluation return per seed", "seed", "return / 329.5",
                                std::nullopt}));
    write_text(in / "fig_eval_cost.svg",
               line_chart(cost, {"Normalized evaluation cost per seed", "seed", "cost / 15", 1.0}));
  }
}

}  // namespace safechain::harness

#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "safechain/algo/agent.hpp"
#include "safechain/csv.hpp"
#include "safechain/env/supply_chain.hpp"

namespace safechain::harness {

/// A run cannot start or a report cannot be produced because an input file is
/// absent or unreadable.
class MissingInput : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ExperimentSpec {
  env::SupplyChainConfig environment;
  algo::AgentConfig agent;  // variant and seed are set per run
  std::vector<algo::Variant> variants;
  std::vector<std::uint64_t> seeds;
  std::filesystem::path out_dir;
  std::size_t eval_episodes = 30;
  std::size_t checkpoint_every = 25;
  std::size_t threads = 1;
};

/// Parses `{"environment", "agent", "variants", "eval_episodes",
/// "checkpoint_every"}`. Every key is validated; env::ConfigError names the
/// first offending one. Seeds and output directory are left empty.
ExperimentSpec experiment_from_json(const nlohmann::json& config);
ExperimentSpec load_experiment(const std::filesystem::path& config_path);
nlohmann::json to_json(const ExperimentSpec& spec);

/// "0,1,2" -> {0, 1, 2}; rejects empty lists, malformed entries and duplicates.
std::vector<std::uint64_t> parse_seed_list(const std::string& text);

/// Worker count from SAFE_CHAIN_THREADS (default 1).
std::size_t threads_from_env();

/// Column schemas of the emitted CSV files.
extern const std::vector<std::string> kMetricsColumns;
extern const std::vector<std::string> kTimingColumns;
extern const std::vector<std::string> kQuantileColumns;
extern const std::vector<std::string> kEvalColumns;
extern const std::vector<std::string> kAggregateColumns;

void write_metrics_header(std::ostream& out);
void write_metrics_row(std::ostream& out, const algo::EpochRecord& r);

/// Per-variant epoch curves: mean and population std across seeds of the
/// per-seed return_mean / cost_mean columns. All tables must cover the same
/// epochs.
CsvTable aggregate_metrics(const std::vector<CsvTable>& per_seed);

struct SeedOutcome {
  algo::Variant variant;
  std::uint64_t seed = 0;
  std::filesystem::path dir;
  bool ok = false;
  std::string error;
};

/// Trains one (variant, seed) pair into `dir`: metrics.csv, timing.csv,
/// quantiles.csv (distributional variants), checkpoints/, eval.csv.
SeedOutcome run_seed(const ExperimentSpec& spec, algo::Variant variant, std::uint64_t seed,
                     const std::filesystem::path& dir, std::ostream* log = nullptr);

/// Runs every variant for every seed, then writes `<variant>/aggregate.csv`.
/// Returns one outcome per (variant, seed).
std::vector<SeedOutcome> run(const ExperimentSpec& spec, std::ostream* log = nullptr);

/// Reads a finished run directory and writes fig_quantiles.csv,
/// fig_training.csv, fig_eval.csv and SVG charts into it. Throws MissingInput
/// when nothing usable is found.
void report(const std::filesystem::path& in_dir);

/// Loads `<stem>.bin`/`<stem>.json` written by a run and rolls the
/// deterministic policy.
std::vector<algo::EvalRow> eval_checkpoint(const std::filesystem::path& stem,
                                           std::size_t episodes, std::uint64_t seed);

void write_eval_csv(std::ostream& out, const std::vector<algo::EvalRow>& rows);

CsvTable read_csv_file(const std::filesystem::path& path);

}  // namespace safechain::harness

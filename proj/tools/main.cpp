#include <CLI11.hpp>

#include <fstream>
#include <iostream>

#include "safechain/harness/experiment.hpp"

namespace {

namespace fs = std::filesystem;
namespace harness = safechain::harness;

constexpr int kConfigExit = 2;
constexpr int kRuntimeExit = 1;

int cmd_run(const std::string& config, const std::string& seeds, const std::string& out,
            bool quiet) {
  harness::ExperimentSpec spec;
  try {
    spec = harness::load_experiment(config);
    spec.seeds = harness::parse_seed_list(seeds);
    spec.threads = harness::threads_from_env();
  } catch (const safechain::env::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigExit;
  } catch (const harness::MissingInput& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kConfigExit;
  }
  spec.out_dir = out;
  std::vector<harness::SeedOutcome> outcomes;
  try {
    outcomes = harness::run(spec, quiet ? nullptr : &std::cerr);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kRuntimeExit;
  }
  int status = 0;
  for (const auto& o : outcomes) {
    if (!o.ok) {
      std::cerr << "failed: variant " << safechain::algo::to_string(o.variant) << " seed " << o.seed
                << ": " << o.error << " (see " << (o.dir / "error.log").string() << ")\n";
      status = kRuntimeExit;
    }
  }
  return status;
}

int cmd_report(const std::string& in) {
  try {
    harness::report(in);
  } catch (const harness::MissingInput& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kConfigExit;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kRuntimeExit;
  }
  return 0;
}

int cmd_eval(const std::string& checkpoint, std::size_t episodes, std::uint64_t seed,
             const std::string& out) {
  fs::path stem = checkpoint;
  if (stem.extension() == ".bin" || stem.extension() == ".json") stem.replace_extension();
  std::vector<safechain::algo::EvalRow> rows;
  try {
    rows = harness::eval_checkpoint(stem, episodes, seed);
  } catch (const harness::MissingInput& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kConfigExit;
  } catch (const safechain::env::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigExit;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kRuntimeExit;
  }
  if (out.empty()) {
    harness::write_eval_csv(std::cout, rows);
  } else {
    std::ofstream f(out, std::ios::binary);
    if (!f) {
      std::cerr << "error: cannot write " << out << '\n';
      return kRuntimeExit;
    }
    harness::write_eval_csv(f, rows);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Constrained policy optimisation experiments on a serial supply chain"};
  app.require_subcommand(1);

  std::string config, seeds = "0", out;
  bool quiet = false;
  auto* run = app.add_subcommand("run", "Train every configured variant for each seed");
  run->add_option("--config", config, "Experiment JSON")->required();
  run->add_option("--seeds", seeds, "Comma-separated seed list")->capture_default_str();
  run->add_option("--out", out, "Output directory")->required();
  run->add_flag("--quiet", quiet, "Suppress per-epoch progress on stderr");

  std::string in;
  auto* rep = app.add_subcommand("report", "Write figure tables and SVG charts for a run");
  rep->add_option("--in", in, "Run directory")->required();

  std::string checkpoint, eval_out;
  std::size_t episodes = 30;
  std::uint64_t seed = 0;
  auto* ev = app.add_subcommand("eval", "Roll a saved policy deterministically");
  ev->add_option("--checkpoint", checkpoint, "Checkpoint stem (or its .bin/.json)")->required();
  ev->add_option("--episodes", episodes, "Episode count")->capture_default_str()->check(CLI::PositiveNumber);
  ev->add_option("--seed", seed, "Evaluation seed")->capture_default_str();
  ev->add_option("--out", eval_out, "CSV path (default: stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kConfigExit;
  }
  if (*run) return cmd_run(config, seeds, out, quiet);
  if (*rep) return cmd_report(in);
  return cmd_eval(checkpoint, episodes, seed, eval_out);
}

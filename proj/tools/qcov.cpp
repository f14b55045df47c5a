// Command-line front end: run experiments from JSON configs, grid-search the
// dither level, or fit the error-decay slope. Exit codes: 0 success, 2 bad
// usage or bad config, 3 numerical failure.

#include <cstdint>
#include <iomanip>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"

#include "qcov/experiments.hpp"

namespace {

struct Overrides {
  std::uint64_t seed = 0;
  std::size_t trials = 0;
  unsigned threads = 0;
  std::string out;
  std::string dump_bits;
  bool timing = false;
};

void add_common_options(CLI::App* cmd, std::string& config_path,
                        Overrides& ov) {
  cmd->add_option("config", config_path, "JSON experiment config")
      ->required();
  cmd->add_option("--seed", ov.seed, "override the config seed");
  cmd->add_option("--trials", ov.trials, "override the trial count");
  cmd->add_option("--out", ov.out, "write the CSV here (overrides config)");
  cmd->add_option("--threads", ov.threads,
                  "worker threads (0 = QCOV_THREADS env, then hardware)");
  cmd->add_option("--dump-bits", ov.dump_bits,
                  "directory for packed trial-0 bit blocks, one per setting");
  cmd->add_flag("--timing", ov.timing,
                "record real per-trial wall time (breaks byte-determinism)");
}

qcov::ExperimentConfig load_with_overrides(const CLI::App* cmd,
                                           const std::string& config_path,
                                           const Overrides& ov) {
  qcov::ExperimentConfig cfg = qcov::load_config(config_path);
  if (cmd->count("--seed")) cfg.seed = ov.seed;
  if (cmd->count("--trials")) cfg.trials = ov.trials;
  if (cmd->count("--threads")) cfg.threads = ov.threads;
  if (cmd->count("--out")) cfg.out = ov.out;
  if (cmd->count("--dump-bits")) cfg.dump_bits_dir = ov.dump_bits;
  if (cmd->count("--timing")) cfg.timing = true;
  return cfg;
}

void report_lambda_stars(const std::vector<qcov::TrialRecord>& records) {
  std::cout << std::setprecision(17);
  for (const auto& r : records)
    if (r.estimator == "lambda_star")
      std::cout << "p=" << r.p << " n=" << r.n << " c=" << r.c
                << " lambda_star=" << *r.lambda << " mean_error=" << r.error
                << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"covariance estimation from coarsely quantized samples"};
  app.require_subcommand(1);

  std::string config_path;
  Overrides ov;

  CLI::App* run = app.add_subcommand("run", "run the configured experiment");
  CLI::App* tune = app.add_subcommand(
      "tune-lambda", "grid-search the dither level for the config's settings");
  CLI::App* rate = app.add_subcommand(
      "rate-check", "fit the log-log error decay slope across the n grid");
  for (CLI::App* cmd : {run, tune, rate})
    add_common_options(cmd, config_path, ov);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  try {
    if (run->parsed()) {
      qcov::ExperimentConfig cfg = load_with_overrides(run, config_path, ov);
      std::vector<qcov::TrialRecord> records = qcov::run_experiment(cfg);
      if (cfg.out.empty())
        std::cout << qcov::to_csv(records);
      else
        std::cout << "wrote " << records.size() << " rows to " << cfg.out
                  << "\n";
    } else if (tune->parsed()) {
      qcov::ExperimentConfig cfg = load_with_overrides(tune, config_path, ov);
      cfg.experiment = qcov::ExperimentKind::optimal_lambda;
      std::vector<qcov::TrialRecord> records = qcov::run_experiment(cfg);
      report_lambda_stars(records);
      if (!cfg.out.empty())
        std::cout << "wrote the error curves to " << cfg.out << "\n";
    } else {
      qcov::ExperimentConfig cfg = load_with_overrides(rate, config_path, ov);
      qcov::RateCheckResult result = qcov::rate_check(cfg);
      if (result.exact_zero)
        std::cout << "mean error <= 1e-12 at every n; no slope to fit\n";
      else
        std::cout << "slope=" << std::setprecision(17) << result.slope << "\n";
      if (!cfg.out.empty())
        std::cout << "wrote " << result.records.size() << " rows to "
                  << cfg.out << "\n";
    }
  } catch (const qcov::config_error& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}

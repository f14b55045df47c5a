#pragma once

// Experiment harness: config parsing, deterministic parallel trial
// execution, lambda grid tuning, rate fitting, and CSV persistence.

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "qcov/estimators.hpp"
#include "qcov/matrix.hpp"
#include "qcov/sampling.hpp"

namespace qcov {

// Bad configs are user errors, distinct from numerical failures (the CLI
// maps them to different exit codes).
class config_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class ExperimentKind {
  compare_all,     // all four estimators over a p range at fixed n
  lambda_sweep,    // dithered error across the lambda grid at fixed (p, n)
  optimal_lambda,  // tuned lambda* and its full error curve per n
  correlation,     // sample vs one-bit across n for each correlation level
  diagonal,        // sample vs dithered under flat and spiked diagonals
  rate_check,      // error decay of one estimator across an n decade
  bounds_sweep,    // bound shapes next to empirical errors over (p, n)
};

ExperimentKind parse_experiment(std::string_view name);
std::string_view experiment_name(ExperimentKind k);

struct MaskSpec {
  enum class Kind { full, identity, band, file };
  Kind kind = Kind::full;
  std::size_t band_width = 0;
  std::string path;
};

struct ExperimentConfig {
  ExperimentKind experiment = ExperimentKind::compare_all;
  std::vector<std::size_t> p_values;
  std::vector<std::size_t> n_values;
  std::size_t trials = 100;
  std::uint64_t seed = 1;
  std::vector<double> correlations{0.2};
  std::size_t spike_index = 1;  // 1-based diagonal position
  double spike_value = 10.0;
  std::size_t lambda_grid_points = 40;
  ErrorMetric metric = ErrorMetric::operator_norm;
  MaskSpec mask;
  std::string estimator = "one_bit_sine";  // rate-check subject
  double t = 0.0;                          // tail knob for bound reports
  std::string out;                         // CSV path; empty = don't write
  unsigned threads = 0;                    // 0 = resolve from env/hardware
  bool timing = false;  // real wall-clock ms (breaks byte-determinism)
  std::string dump_bits_dir;  // dump packed bits of trial 0 per setting
};

// Reads a JSON config file. "p"/"n" accept a number, an array, or a range
// object {"from","to","step"} / {"from","to","factor"}; "c" accepts a number
// or array; "mask" accepts "full" | "identity" | "band:W" | "file:PATH".
ExperimentConfig load_config(const std::string& path);

// Full validation (also run by run_experiment before any trial).
void validate_config(const ExperimentConfig& cfg);

// --threads beats QCOV_THREADS beats hardware concurrency.
unsigned resolve_threads(unsigned requested);

// Materializes a mask spec at dimension p. Kind::file reads p*p
// whitespace-separated entries in [0, 1], row-major; a symmetric matrix is
// required. Malformed, mis-sized, or asymmetric files raise config_error.
Mask build_mask(const MaskSpec& spec, std::size_t p);

// Index of the smallest value; ties go to the earliest (smallest-lambda)
// entry. Throws std::invalid_argument on an empty curve.
std::size_t argmin_index(const std::vector<std::pair<double, double>>& curve);

struct TrialRecord {
  std::string experiment;  // id, including variant suffix where applicable
  std::string estimator;
  std::size_t p = 0;
  std::size_t n = 0;
  double c = 0.0;
  std::optional<double> lambda;
  // >= 0: raw trial; -1: mean over trials; -2: standard error of the mean.
  std::int64_t trial = 0;
  std::uint64_t seed = 0;  // per-trial stream id; config seed on aggregates
  double error = 0.0;
  std::int64_t ms = 0;
};

std::string to_csv(const std::vector<TrialRecord>& records);
void write_csv(const std::string& path,
               const std::vector<TrialRecord>& records);

// Runs the configured experiment; deterministic given (config, seed)
// regardless of thread count. Returns all records (raw rows sorted by
// setting and trial, aggregates appended) and writes CSV when cfg.out is
// set.
std::vector<TrialRecord> run_experiment(const ExperimentConfig& cfg);

struct TuneResult {
  double lambda_star = 0.0;
  std::vector<std::pair<double, double>> curve;  // (lambda, mean error)
};

// Grid search for the dithered estimator's lambda: equispaced open grid over
// (0, 4*max_norm(sigma)], `trials` fresh trials per grid point, mean
// operator-norm error against sigma, argmin with ties broken toward the
// smaller lambda.
TuneResult tune_lambda(const SymMatrix& sigma, std::size_t n,
                       std::size_t trials, std::size_t grid_points,
                       std::uint64_t seed, unsigned threads = 1,
                       std::string_view stream_tag = "tune");

struct RateCheckResult {
  bool exact_zero = false;  // all mean errors <= 1e-12; slope undefined
  double slope = 0.0;       // least-squares slope of log(mean error) vs log n
  std::vector<TrialRecord> records;
};

// Needs >= 4 n-values spanning at least one decade.
RateCheckResult rate_check(const ExperimentConfig& cfg);

}  // namespace qcov

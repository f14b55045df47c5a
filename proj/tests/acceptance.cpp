// Acceptance harness: one pass/fail line per shipped claim, exit 1 on any
// failure. Every randomized check runs with a fixed seed and a pinned
// tolerance; wall-clock limits are part of the claims that carry one.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <string>
#include <vector>

#include "qcov/bounds.hpp"
#include "qcov/estimators.hpp"
#include "qcov/experiments.hpp"
#include "qcov/matrix.hpp"
#include "qcov/quantize.hpp"
#include "qcov/sampling.hpp"

using namespace qcov;

namespace {

int failures = 0;

struct Stopwatch {
  std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                         t0)
        .count();
  }
};

void report(int idx, const char* name, bool ok, double secs,
            const std::string& detail) {
  std::printf("[%s] %02d %s (%.2fs)%s%s\n", ok ? "PASS" : "FAIL", idx, name,
              secs, detail.empty() ? "" : " — ", detail.c_str());
  if (!ok) ++failures;
}

// limit_secs == 0 means the claim carries no wall-clock budget.
template <typename Fn>
void criterion(int idx, const char* name, double limit_secs, Fn fn) {
  Stopwatch sw;
  bool ok = false;
  std::string detail;
  try {
    ok = fn(detail);
  } catch (const std::exception& e) {
    detail = std::string("exception: ") + e.what();
  }
  double secs = sw.seconds();
  if (ok && limit_secs > 0.0 && secs > limit_secs) {
    ok = false;
    detail += detail.empty() ? "" : "; ";
    detail += "over the wall-clock budget";
  }
  report(idx, name, ok, secs, detail);
}

std::string fmt(const char* pattern, double a, double b = 0.0,
                double c = 0.0) {
  char buf[160];
  std::snprintf(buf, sizeof buf, pattern, a, b, c);
  return buf;
}

// Plain double-loop +-1 grams, decoded bit by bit.
SymMatrix naive_sign_gram(const BitSampleBlock& b) {
  SymMatrix g(b.dim());
  for (std::size_t i = 0; i < b.dim(); ++i)
    for (std::size_t j = 0; j <= i; ++j) {
      long long acc = 0;
      for (std::size_t k = 0; k < b.count(); ++k)
        acc += (b.bit(i, k) ? 1 : -1) * (b.bit(j, k) ? 1 : -1);
      g.set(i, j, double(acc));
    }
  return g;
}

Matrix naive_cross_gram(const DitheredPairBlock& pair) {
  std::size_t p = pair.y.dim(), n = pair.y.count();
  Matrix g(p, p);
  for (std::size_t i = 0; i < p; ++i)
    for (std::size_t j = 0; j < p; ++j) {
      long long acc = 0;
      for (std::size_t k = 0; k < n; ++k)
        acc += (pair.y.bit(i, k) ? 1 : -1) * (pair.ybar.bit(j, k) ? 1 : -1);
      g(i, j) = double(acc);
    }
  return g;
}

double mean_error(const std::vector<TrialRecord>& records,
                  const std::string& experiment, const std::string& estimator,
                  std::size_t p, double c) {
  for (const auto& r : records)
    if (r.trial == -1 && r.experiment == experiment &&
        r.estimator == estimator && r.p == p && r.c == c)
      return r.error;
  throw std::runtime_error("missing aggregate row: " + experiment + "/" +
                           estimator);
}

bool popcount_gram_oracle(std::string& detail) {
  RngStream rng(2024, 1);
  const std::size_t n_choices[] = {1, 63, 64, 65, 200};
  for (int rep = 0; rep < 500; ++rep) {
    std::size_t p = 1 + rng.next_u64() % 16;
    std::size_t n = n_choices[rep % 5];
    SampleBatch batch(p, n);
    for (std::size_t i = 0; i < p; ++i)
      for (std::size_t k = 0; k < n; ++k)
        batch.set_value(i, k, rng.next_normal());

    BitSampleBlock bits = sign_pack(batch);
    SymMatrix g = sign_gram(bits), ng = naive_sign_gram(bits);
    for (std::size_t i = 0; i < p; ++i)
      for (std::size_t j = 0; j <= i; ++j)
        if (g(i, j) != ng(i, j)) {
          detail = fmt("sign gram mismatch at rep %.0f", rep);
          return false;
        }

    DitheredPairBlock pair = dithered_pack(batch, 2.0, rng);
    Matrix cg = cross_gram(pair), ncg = naive_cross_gram(pair);
    for (std::size_t i = 0; i < p; ++i)
      for (std::size_t j = 0; j < p; ++j)
        if (cg(i, j) != ncg(i, j)) {
          detail = fmt("cross gram mismatch at rep %.0f", rep);
          return false;
        }
  }
  detail = "500 random blocks, exact match";
  return true;
}

bool arcsine_identity(std::string& detail) {
  const std::size_t n = 1000000;
  SymMatrix sigma = build_cov(CovModel::equicorrelation(2, 0.5));
  RngStream rng(2024, 2);
  SampleBatch batch = sample_gaussian(cholesky(sigma), n, rng);
  double mean = sign_gram(sign_pack(batch))(1, 0) / double(n);
  double target = 1.0 / 3.0;
  detail = fmt("mean %.6f vs %.6f", mean, target);
  return std::abs(mean - target) < 4e-3;
}

bool dithered_product_identity(std::string& detail) {
  const std::size_t n = 1000000;
  SampleBatch batch(2, n);
  for (std::size_t k = 0; k < n; ++k) {
    batch.set_value(0, k, 0.5);
    batch.set_value(1, k, -0.25);
  }
  RngStream rng(2024, 3);
  DitheredPairBlock pair = dithered_pack(batch, 1.0, rng);
  double mean = cross_gram(pair)(0, 1) / double(n);
  detail = fmt("mean %.6f vs -0.125", mean);
  return std::abs(mean - (-0.125)) < 4e-3;
}

bool full_correlation_degeneracy(std::string& detail) {
  SymMatrix sigma = SymMatrix::constant(10, 1.0);
  Matrix chol = cholesky(sigma);
  double worst = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    RngStream rng(2024, 40 + std::uint64_t(trial));
    SampleBatch batch = sample_gaussian(chol, 77, rng);
    double err = estimation_error(one_bit_sine(sign_pack(batch)), sigma,
                                  ErrorMetric::operator_norm);
    worst = std::max(worst, err);
  }
  double leading =
      one_bit_error_bound(sigma, Mask::full(10), 77, 0.0).leading_term;
  detail = fmt("worst error %.3g, bound leading term %.3g", worst, leading);
  return worst <= 1e-12 && leading == 0.0;
}

bool error_decay_rate(std::string& detail) {
  ExperimentConfig cfg;
  cfg.experiment = ExperimentKind::rate_check;
  cfg.p_values = {20};
  cfg.n_values = {100, 200, 400, 800, 1600, 3200};
  cfg.correlations = {0.5};
  cfg.trials = 100;
  cfg.seed = 42;
  cfg.estimator = "one_bit_sine";
  cfg.threads = 0;
  RateCheckResult r = rate_check(cfg);
  detail = fmt("log-log slope %.3f, want [-0.6, -0.4]", r.slope);
  return !r.exact_zero && r.slope >= -0.6 && r.slope <= -0.4;
}

bool high_correlation_crossover(std::string& detail) {
  ExperimentConfig cfg;
  cfg.experiment = ExperimentKind::correlation;
  cfg.p_values = {20};
  cfg.n_values = {300};
  // The two c values bracket the empirical crossover (near c ~ 0.3 at this p
  // and n): quantization wins under strong correlation, full-precision
  // sampling wins under mild correlation.
  cfg.correlations = {0.99, 0.2};
  cfg.trials = 100;
  cfg.seed = 11;
  cfg.threads = 0;
  std::vector<TrialRecord> records = run_experiment(cfg);
  double q_high = mean_error(records, "correlation", "one_bit_sine", 20, 0.99);
  double s_high = mean_error(records, "correlation", "sample", 20, 0.99);
  double q_mid = mean_error(records, "correlation", "one_bit_sine", 20, 0.2);
  double s_mid = mean_error(records, "correlation", "sample", 20, 0.2);
  detail = "c=0.99: " + fmt("%.3f vs %.3f", q_high, s_high) +
           "; c=0.2: " + fmt("%.3f vs %.3f", q_mid, s_mid);
  return q_high < s_high && s_mid < q_mid;
}

bool spiked_diagonal_gap(std::string& detail) {
  ExperimentConfig cfg;
  cfg.experiment = ExperimentKind::diagonal;
  cfg.p_values = {5, 15, 30};
  cfg.n_values = {200};
  cfg.correlations = {0.2};
  cfg.spike_index = 1;
  cfg.spike_value = 10.0;
  cfg.trials = 100;
  cfg.seed = 77;
  cfg.threads = 0;
  std::vector<TrialRecord> records = run_experiment(cfg);
  for (std::size_t p : cfg.p_values) {
    double flat =
        mean_error(records, "diagonal/flat", "dithered_psd", p, 0.2) /
        mean_error(records, "diagonal/flat", "sample", p, 0.2);
    double spiked =
        mean_error(records, "diagonal/spiked", "dithered_psd", p, 0.2) /
        mean_error(records, "diagonal/spiked", "sample", p, 0.2);
    if (!(spiked > flat)) {
      detail = fmt("p=%.0f: spiked ratio %.2f <= flat ratio %.2f", double(p),
                   spiked, flat);
      return false;
    }
  }
  detail = "error ratio widens under the spike at p=5,15,30";
  return true;
}

bool lambda_tuning_shape(std::string& detail) {
  SymMatrix sigma = build_cov(CovModel::equicorrelation(5, 0.2));
  double step = 4.0 * max_norm(sigma) / 40.0;
  std::vector<double> stars;
  for (std::size_t n : {50, 200, 800}) {
    TuneResult r = tune_lambda(sigma, n, 400, 40, 47);
    std::size_t best = argmin_index(r.curve);
    if (best == 0 || best + 1 == r.curve.size()) {
      detail = fmt("minimum sits on the grid edge at n=%.0f", double(n));
      return false;
    }
    if (!(r.curve.front().second > r.curve[best].second &&
          r.curve.back().second > r.curve[best].second)) {
      detail = fmt("no interior U-shape at n=%.0f", double(n));
      return false;
    }
    stars.push_back(r.lambda_star);
  }
  for (std::size_t i = 1; i < stars.size(); ++i)
    if (stars[i] < stars[i - 1] - step - 1e-12) {
      detail = fmt("lambda* fell by more than one grid step: %.2f -> %.2f",
                   stars[i - 1], stars[i]);
      return false;
    }
  detail = fmt("lambda* = %.2f, %.2f, %.2f over n=50,200,800", stars[0],
               stars[1], stars[2]);
  return true;
}

bool property_suites(std::string& detail) {
  RngStream rng(2024, 9);
  auto random_sym = [&](std::size_t p, double scale) {
    SymMatrix m(p);
    for (std::size_t i = 0; i < p; ++i)
      for (std::size_t j = 0; j <= i; ++j)
        m.set(i, j, scale * (2.0 * rng.next_unit() - 1.0));
    return m;
  };
  auto random_psd = [&](std::size_t p) {
    Matrix g(p, p);
    for (std::size_t i = 0; i < p; ++i)
      for (std::size_t j = 0; j < p; ++j) g(i, j) = rng.next_normal();
    SymMatrix m(p);
    for (std::size_t i = 0; i < p; ++i)
      for (std::size_t j = 0; j <= i; ++j) {
        double s = 0.0;
        for (std::size_t k = 0; k < p; ++k) s += g(i, k) * g(j, k);
        m.set(i, j, s / double(p));
      }
    return m;
  };
  auto random_corr = [&](std::size_t p) {
    SymMatrix m = random_psd(p);
    std::vector<double> d(p);
    for (std::size_t i = 0; i < p; ++i) d[i] = std::sqrt(m(i, i) + 0.1);
    SymMatrix c(p);
    for (std::size_t i = 0; i < p; ++i)
      for (std::size_t j = 0; j <= i; ++j)
        c.set(i, j, i == j ? 1.0 : m(i, j) / (d[i] * d[j]));
    return c;
  };
  auto dim = [&]() { return std::size_t(2 + rng.next_u64() % 7); };

  // entrywise-product norm bound: PSD factor rescales by its max diagonal
  for (int rep = 0; rep < 200; ++rep) {
    std::size_t p = dim();
    SymMatrix a = random_psd(p), b = random_sym(p, 2.0);
    double maxdiag = 0.0;
    for (std::size_t i = 0; i < p; ++i) maxdiag = std::max(maxdiag, a(i, i));
    double lhs = operator_norm(hadamard(a, b));
    double rhs = maxdiag * operator_norm(b);
    if (lhs > rhs + 1e-9 * (1.0 + rhs)) {
      detail = fmt("entrywise norm bound failed: %.6f > %.6f", lhs, rhs);
      return false;
    }
  }
  // variance proxy norm never exceeds sqrt(2) * ||Z||
  for (int rep = 0; rep < 200; ++rep) {
    std::size_t p = dim();
    SymMatrix z = random_sym(p, 2.0);
    double lhs = variance_proxy_norm(z, sign_covariance(random_corr(p)));
    double rhs = std::sqrt(2.0) * operator_norm(z);
    if (lhs > rhs + 1e-8) {
      detail = fmt("variance proxy norm bound failed: %.6f > %.6f", lhs, rhs);
      return false;
    }
  }
  // variance proxy is PSD up to jitter
  for (int rep = 0; rep < 200; ++rep) {
    std::size_t p = dim();
    SymMatrix z = random_sym(p, 2.0);
    EigenDecomposition e =
        sym_eigen(variance_proxy(z, sign_covariance(random_corr(p))));
    double scale = 1.0 + operator_norm(z) * operator_norm(z);
    if (e.values.back() < -1e-9 * scale) {
      detail = fmt("variance proxy min eigenvalue %.3g", e.values.back());
      return false;
    }
  }
  // PSD projection: idempotent and 1-Lipschitz
  for (int rep = 0; rep < 200; ++rep) {
    std::size_t p = dim();
    SymMatrix x = random_sym(p, 3.0), y = random_sym(p, 3.0);
    SymMatrix px = psd_project(x);
    double scale = 1.0 + operator_norm(x) + operator_norm(y);
    if (operator_norm(psd_project(px) - px) > 1e-9 * scale) {
      detail = "projection is not idempotent";
      return false;
    }
    if (operator_norm(px - psd_project(y)) >
        operator_norm(x - y) + 1e-9 * scale) {
      detail = "projection expanded a distance";
      return false;
    }
  }
  // one-bit path ignores positive per-coordinate rescaling
  for (int rep = 0; rep < 200; ++rep) {
    std::size_t p = dim();
    std::size_t n = 1 + rng.next_u64() % 64;
    SampleBatch batch(p, n), scaled(p, n);
    for (std::size_t i = 0; i < p; ++i) {
      double s = std::exp(3.0 * (2.0 * rng.next_unit() - 1.0));
      for (std::size_t k = 0; k < n; ++k) {
        double v = rng.next_normal();
        batch.set_value(i, k, v);
        scaled.set_value(i, k, s * v);
      }
    }
    BitSampleBlock b1 = sign_pack(batch), b2 = sign_pack(scaled);
    for (std::size_t i = 0; i < p; ++i)
      for (std::size_t w = 0; w < b1.words_per_row(); ++w)
        if (b1.words_at(i)[w] != b2.words_at(i)[w]) {
          detail = "sign bits changed under positive rescaling";
          return false;
        }
  }
  detail = "5 suites x 200 randomized instances";
  return true;
}

bool thread_count_determinism(std::string& detail) {
  ExperimentConfig cfg;
  cfg.experiment = ExperimentKind::compare_all;
  cfg.p_values = {4, 6};
  cfg.n_values = {50};
  cfg.correlations = {0.2, 0.5};
  cfg.trials = 10;
  cfg.seed = 99;
  cfg.lambda_grid_points = 8;
  cfg.threads = 1;
  std::string serial = to_csv(run_experiment(cfg));
  std::string serial_again = to_csv(run_experiment(cfg));
  cfg.threads = 8;
  std::string parallel = to_csv(run_experiment(cfg));
  detail = fmt("%.0f CSV bytes equal across serial and 8-thread runs",
               double(serial.size()));
  return serial == serial_again && serial == parallel;
}

}  // namespace

int main() {
  criterion(1, "bit-packed grams match the naive oracle", 5.0,
            popcount_gram_oracle);
  criterion(2, "arcsine law at rho=0.5", 10.0, arcsine_identity);
  criterion(3, "dithered sign-product identity", 5.0,
            dithered_product_identity);
  criterion(4, "full-correlation degeneracy", 0.0, full_correlation_degeneracy);
  criterion(5, "inverse-sqrt error decay", 120.0, error_decay_rate);
  criterion(6, "high-correlation crossover", 60.0, high_correlation_crossover);
  criterion(7, "spiked-diagonal gap", 0.0, spiked_diagonal_gap);
  criterion(8, "lambda tuning shape", 0.0, lambda_tuning_shape);
  criterion(9, "randomized property suites", 0.0, property_suites);
  criterion(10, "thread-count determinism", 0.0, thread_count_determinism);

  if (failures) std::printf("%d criterion(s) failed\n", failures);
  return failures ? 1 : 0;
}

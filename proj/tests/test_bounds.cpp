#include <cmath>
#include <numbers>
#include <vector>

#include "doctest.h"
#include "qcov/bounds.hpp"
#include "qcov/estimators.hpp"
#include "test_support.hpp"

using namespace qcov;
using test::make_rng;
using test::max_abs_diff;
using test::random_correlation;
using test::random_sym;

namespace {

SymMatrix ones(std::size_t p) { return SymMatrix::constant(p, 1.0); }

double one_bit_mean_error(const SymMatrix& sigma, std::size_t n, int trials,
                          std::uint64_t seed) {
  Matrix chol = cholesky(sigma);
  double sum = 0.0;
  for (int k = 0; k < trials; ++k) {
    RngStream rng(seed, std::uint64_t(k));
    SampleBatch b = sample_gaussian(chol, n, rng);
    sum += estimation_error(one_bit_sine(sign_pack(b)), sigma,
                            ErrorMetric::operator_norm);
  }
  return sum / trials;
}

}  // namespace

TEST_SUITE("bounds") {

TEST_CASE("sign_covariance basics") {
  CHECK(max_abs_diff(sign_covariance(SymMatrix::identity(3)),
                     SymMatrix::identity(3)) == 0.0);
  SymMatrix half(2);
  half.set(0, 0, 1.0);
  half.set(1, 1, 1.0);
  half.set(1, 0, 0.5);
  CHECK(sign_covariance(half)(1, 0) ==
        doctest::Approx(1.0 / 3).epsilon(1e-15));
  CHECK(max_abs_diff(sign_covariance(ones(3)), ones(3)) == 0.0);
}

TEST_CASE("sine_sensitivity basics") {
  SymMatrix a = sine_sensitivity(SymMatrix::identity(3));
  CHECK(max_abs_diff(a, ones(3) - SymMatrix::identity(3)) == 0.0);
  CHECK(max_norm(sine_sensitivity(ones(4))) == 0.0);
  SymMatrix s(2);
  s.set(0, 0, 1.0);
  s.set(1, 1, 1.0);
  s.set(1, 0, 0.6);
  CHECK(sine_sensitivity(s)(1, 0) == doctest::Approx(0.8).epsilon(1e-15));
}

TEST_CASE("variance_proxy vanishes for identity arguments") {
  CHECK(max_norm(variance_proxy(SymMatrix::identity(3),
                                SymMatrix::identity(3))) == 0.0);
  auto rng = make_rng(71);
  SymMatrix gamma = sign_covariance(random_correlation(rng, 4));
  // unit diagonal of gamma makes Z = Id a fixed point of both terms
  CHECK(max_norm(variance_proxy(SymMatrix::identity(4), gamma)) <= 1e-15);
}

TEST_CASE("variance_proxy equals the Monte-Carlo second moment") {
  SymMatrix sigma = build_cov(CovModel::equicorrelation(4, 0.3));
  SymMatrix gamma = sign_covariance(sigma);
  auto rng = make_rng(72);
  SymMatrix z = random_sym(rng, 4, 1.0);
  SymMatrix expected = variance_proxy(z, gamma);

  Matrix chol = cholesky(sigma);
  const std::size_t draws = 1000000;
  RngStream gr(73, 1);
  SymMatrix acc(4);
  std::vector<double> y(4);
  for (std::size_t d = 0; d < draws; ++d) {
    std::vector<double> g(4, 0.0);
    for (std::size_t i = 0; i < 4; ++i) {
      double gi = gr.next_normal();
      for (std::size_t r = i; r < 4; ++r) g[r] += chol(r, i) * gi;
    }
    for (std::size_t i = 0; i < 4; ++i) y[i] = g[i] >= 0 ? 1.0 : -1.0;
    // W = Z .* (y y^T - Gamma); accumulate W * W
    Matrix w(4, 4);
    for (std::size_t i = 0; i < 4; ++i)
      for (std::size_t j = 0; j < 4; ++j)
        w(i, j) = z(i, j) * (y[i] * y[j] - gamma(i, j));
    for (std::size_t i = 0; i < 4; ++i)
      for (std::size_t j = 0; j <= i; ++j) {
        double s = 0.0;
        for (std::size_t k = 0; k < 4; ++k) s += w(i, k) * w(k, j);
        acc.set(i, j, acc(i, j) + s);
      }
  }
  SymMatrix mc = (1.0 / double(draws)) * acc;
  CHECK(max_abs_diff(mc, expected) <= 5e-3);
}

TEST_CASE("variance_proxy_norm basics and the sqrt2 inequality") {
  CHECK(variance_proxy_norm(SymMatrix::identity(3),
                            SymMatrix::identity(3)) == 0.0);
  SymMatrix all = ones(5);
  CHECK(variance_proxy_norm(sine_sensitivity(all), sign_covariance(all)) ==
        0.0);

  auto rng = make_rng(74);
  for (int rep = 0; rep < 200; ++rep) {
    std::size_t p = 2 + static_cast<std::size_t>(rng.next_u64() % 7);
    SymMatrix gamma = sign_covariance(random_correlation(rng, p));
    SymMatrix z = random_sym(rng, p, 2.0);
    CHECK(variance_proxy_norm(z, gamma) <=
          std::numbers::sqrt2 * operator_norm(z) + 1e-8);
  }
}

TEST_CASE("variance_proxy output is PSD up to tolerance") {
  auto rng = make_rng(75);
  for (int rep = 0; rep < 200; ++rep) {
    std::size_t p = 2 + static_cast<std::size_t>(rng.next_u64() % 7);
    SymMatrix gamma = sign_covariance(random_correlation(rng, p));
    SymMatrix z = random_sym(rng, p, 2.0);
    EigenDecomposition e = sym_eigen(variance_proxy(z, gamma));
    double scale = 1.0 + operator_norm(z) * operator_norm(z);
    CHECK(e.values.back() >= -1e-9 * scale);
  }
}

TEST_CASE("one_bit_error_bound under full correlation") {
  for (std::size_t p : {2u, 10u}) {
    BoundReport r = one_bit_error_bound(ones(p), Mask::full(p), 50, 0.5);
    CHECK(r.leading_term == 0.0);
    double expected = double(p) * (std::log(double(p)) + 0.5) / 50.0;
    CHECK(r.second_term == doctest::Approx(expected).epsilon(1e-12));
    CHECK(r.total == r.leading_term + r.second_term);
  }
}

TEST_CASE("one_bit_error_bound decreases monotonically in n") {
  SymMatrix sigma = build_cov(CovModel::equicorrelation(5, 0.4));
  Mask m = Mask::full(5);
  double prev = 1e300;
  for (std::size_t n : {10u, 100u, 1000u, 10000u}) {
    double total = one_bit_error_bound(sigma, m, n, 0.0).total;
    CHECK(total < prev);
    prev = total;
  }
}

TEST_CASE("one_bit_error_bound matches the hand-evaluated pipeline") {
  SymMatrix sigma = build_cov(CovModel::equicorrelation(2, 0.5));
  BoundReport r = one_bit_error_bound(sigma, Mask::full(2), 100, 0.0);
  // A = [[0, sqrt(3)/2], [sqrt(3)/2, 0]], Gamma off-diagonal = 1/3, so
  // sigma(A)^2 = diag(3/4 * (1 - 1/9)) = (2/3) Id.
  double leading = std::sqrt(2.0 / 3.0) * std::sqrt(std::log(2.0) / 100.0);
  double second = 1.5 * std::log(2.0) / 100.0;  // ||Sigma|| = 1.5 dominates
  CHECK(r.leading_term == doctest::Approx(leading).epsilon(1e-12));
  CHECK(r.second_term == doctest::Approx(second).epsilon(1e-12));
  CHECK(r.quantities.at("opnorm_MSigma") ==
        doctest::Approx(1.5).epsilon(1e-12));
  CHECK(r.quantities.at("opnorm_MA") ==
        doctest::Approx(std::sqrt(0.75)).epsilon(1e-12));
  CHECK(r.quantities.at("maxnorm_Sigma") == 1.0);
  CHECK(r.quantities.at("lambda") == 0.0);
}

TEST_CASE("one_bit_error_bound requires a unit diagonal") {
  SymMatrix bad(2);
  bad.set(0, 0, 2.0);
  bad.set(1, 1, 1.0);
  CHECK_THROWS_AS(one_bit_error_bound(bad, Mask::full(2), 10, 0.0),
                  std::invalid_argument);
}

TEST_CASE("dithered_error_bound identity-mask shape") {
  SymMatrix sigma = SymMatrix::identity(3);
  double lambda = 1.5, t = 0.25;
  std::size_t n = 200;
  BoundReport r = dithered_error_bound(sigma, Mask::identity(3), n, t, lambda);
  double rate = (std::log(3.0) + t) / double(n);
  double leading = (lambda * 1.0 + lambda * lambda) * std::sqrt(rate);
  double second = lambda * lambda * rate;
  CHECK(r.leading_term == doctest::Approx(leading).epsilon(1e-12));
  CHECK(r.second_term == doctest::Approx(second).epsilon(1e-12));
  CHECK(r.quantities.at("one_to_two_M") == 1.0);
  CHECK(r.quantities.at("opnorm_M") == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(r.quantities.at("lambda") == lambda);
}

TEST_CASE("dithered_error_bound second term scales as lambda squared") {
  SymMatrix sigma = build_cov(CovModel::equicorrelation(4, 0.2));
  Mask m = Mask::full(4);
  BoundReport r1 = dithered_error_bound(sigma, m, 100, 0.0, 1.3);
  BoundReport r2 = dithered_error_bound(sigma, m, 100, 0.0, 2.6);
  CHECK(r2.second_term == doctest::Approx(4.0 * r1.second_term).epsilon(1e-12));
}

TEST_CASE("dithered_error_bound under the log(n) lambda rule") {
  SymMatrix sigma = build_cov(CovModel::equicorrelation(4, 0.2));
  Mask m = Mask::full(4);
  std::size_t n = 500;
  double lambda = std::sqrt(std::log(double(n)) * max_norm(sigma));
  BoundReport r = dithered_error_bound(sigma, m, n, 0.0, lambda);
  double rate = std::log(4.0) / double(n);
  double expected_leading =
      one_to_two_norm(m.matrix()) *
      (lambda * std::sqrt(operator_norm(sigma)) + lambda * lambda) *
      std::sqrt(rate);
  CHECK(r.leading_term == doctest::Approx(expected_leading).epsilon(1e-12));
  CHECK(r.quantities.at("lambda") == lambda);
  CHECK_THROWS_AS(dithered_error_bound(sigma, m, n, 0.0, 0.0),
                  std::invalid_argument);
}

TEST_CASE("error_lower_bound composition at the identity") {
  std::size_t p = 4, n = 100;
  LowerBoundReport r = error_lower_bound(SymMatrix::identity(p),
                                         Mask::full(p), n);
  // A = ones - Id and Gamma = Id give sigma(A)^2 = (p-1) Id.
  CHECK(r.leading_term ==
        doctest::Approx(std::sqrt(double(p - 1) / double(n))).epsilon(1e-12));
  CHECK(r.total ==
        doctest::Approx(r.leading_term + r.second_term + r.third_term)
            .epsilon(1e-15));
  CHECK(r.remainder >= 0.0);
}

TEST_CASE("error_lower_bound leading term halves when n quadruples") {
  SymMatrix sigma = build_cov(CovModel::equicorrelation(5, 0.3));
  Mask m = Mask::full(5);
  LowerBoundReport r1 = error_lower_bound(sigma, m, 100);
  LowerBoundReport r4 = error_lower_bound(sigma, m, 400);
  CHECK(r4.leading_term == doctest::Approx(0.5 * r1.leading_term).epsilon(1e-14));
}

TEST_CASE("lower and upper bounds share the leading factor") {
  SymMatrix sigma = build_cov(CovModel::equicorrelation(6, 0.4));
  Mask m = Mask::band(6, 2);
  std::size_t n = 250;
  LowerBoundReport lb = error_lower_bound(sigma, m, n);
  BoundReport ub = one_bit_error_bound(sigma, m, n, 0.0);
  CHECK(lb.leading_term * std::sqrt(std::log(6.0)) ==
        doctest::Approx(ub.leading_term).epsilon(1e-12));
}

TEST_CASE("full correlation: flat sensitivity, zero bound, zero error") {
  SymMatrix sigma = ones(10);
  CHECK(max_norm(sine_sensitivity(sigma)) == 0.0);
  CHECK(one_bit_error_bound(sigma, Mask::full(10), 100, 0.0).leading_term ==
        0.0);
  CHECK(one_bit_mean_error(sigma, 60, 3, 109) == 0.0);
}

TEST_CASE("bound shape tracks the empirical error with one constant") {
  std::vector<double> ratios;
  for (double c : {0.2, 0.5})
    for (std::size_t p : {5u, 10u, 20u})
      for (std::size_t n : {100u, 400u, 1600u}) {
        SymMatrix sigma = build_cov(CovModel::equicorrelation(p, c));
        double emp = one_bit_mean_error(sigma, n, 100, 110 + p + n);
        double bound = one_bit_error_bound(sigma, Mask::full(p), n, 0.0).total;
        ratios.push_back(emp / bound);
      }
  double log_mean = 0.0;
  for (double r : ratios) log_mean += std::log(r);
  double geo_mean = std::exp(log_mean / double(ratios.size()));
  for (double r : ratios) CHECK(r <= 2.5 * geo_mean);
}

}  // TEST_SUITE

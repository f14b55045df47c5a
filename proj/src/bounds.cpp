#include "qcov/bounds.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace qcov {

namespace {

void require_unit_diagonal(const SymMatrix& sigma, const char* what) {
  for (std::size_t i = 0; i < sigma.dim(); ++i)
    if (std::abs(sigma(i, i) - 1.0) > 1e-12)
      throw std::invalid_argument(std::string(what) +
                                  ": needs a unit-diagonal (correlation) "
                                  "matrix; diagonal entry " +
                                  std::to_string(sigma(i, i)));
}

void require_mask_dim(const SymMatrix& sigma, const Mask& mask,
                      const char* what) {
  if (mask.dim() != sigma.dim())
    throw std::invalid_argument(std::string(what) + ": mask dimension " +
                                std::to_string(mask.dim()) +
                                " does not match " +
                                std::to_string(sigma.dim()));
}

double log_rate(std::size_t p, double t, std::size_t n, const char* what) {
  if (n == 0) throw std::invalid_argument(std::string(what) + ": n must be >= 1");
  if (t < 0.0)
    throw std::invalid_argument(std::string(what) + ": t must be >= 0");
  return (std::log(double(p)) + t) / double(n);
}

}  // namespace

SymMatrix sign_covariance(const SymMatrix& sigma) {
  // Dividing by the same floating half-pi keeps arcsin(1) mapping to
  // exactly 1, so unit diagonals survive the transform untouched.
  SymMatrix a = elementwise_map(sigma, ScalarFn::arcsin);
  const double half_pi = std::numbers::pi / 2.0;
  SymMatrix out(a.dim());
  for (std::size_t i = 0; i < a.dim(); ++i)
    for (std::size_t j = 0; j <= i; ++j) out.set(i, j, a(i, j) / half_pi);
  return out;
}

SymMatrix sine_sensitivity(const SymMatrix& sigma) {
  return elementwise_map(sigma, ScalarFn::sqrt1m_sq);
}

SymMatrix variance_proxy(const SymMatrix& z, const SymMatrix& gamma) {
  if (z.dim() != gamma.dim())
    throw std::invalid_argument("variance_proxy: dimension mismatch");
  return hadamard(sym_square(z), gamma) - sym_square(hadamard(z, gamma));
}

double variance_proxy_norm(const SymMatrix& z, const SymMatrix& gamma) {
  return std::sqrt(std::max(operator_norm(variance_proxy(z, gamma)), 0.0));
}

BoundReport one_bit_error_bound(const SymMatrix& sigma, const Mask& mask,
                                std::size_t n, double t) {
  require_unit_diagonal(sigma, "one_bit_error_bound");
  require_mask_dim(sigma, mask, "one_bit_error_bound");
  double rate = log_rate(sigma.dim(), t, n, "one_bit_error_bound");

  SymMatrix gamma = sign_covariance(sigma);
  SymMatrix ma = hadamard(mask.matrix(), sine_sensitivity(sigma));
  SymMatrix ms = hadamard(mask.matrix(), sigma);

  double vp = variance_proxy_norm(ma, gamma);
  double opnorm_ma = operator_norm(ma);
  double opnorm_ms = operator_norm(ms);

  BoundReport r;
  r.leading_term = vp * std::sqrt(rate);
  r.second_term = std::max(opnorm_ma, opnorm_ms) * rate;
  r.total = r.leading_term + r.second_term;
  r.quantities = {
      {"vp_norm_MA", vp},
      {"opnorm_MA", opnorm_ma},
      {"opnorm_MSigma", opnorm_ms},
      {"opnorm_Sigma", operator_norm(sigma)},
      {"maxnorm_Sigma", max_norm(sigma)},
      {"lambda", 0.0},  // the sign path carries no dither level
  };
  return r;
}

BoundReport dithered_error_bound(const SymMatrix& sigma, const Mask& mask,
                                 std::size_t n, double t, double lambda) {
  require_mask_dim(sigma, mask, "dithered_error_bound");
  if (!(lambda > 0.0))
    throw std::invalid_argument("dithered_error_bound: lambda must be > 0");
  double rate = log_rate(sigma.dim(), t, n, "dithered_error_bound");

  double one_to_two_m = one_to_two_norm(mask.matrix());
  double opnorm_m = operator_norm(mask.matrix());
  double opnorm_sigma = operator_norm(sigma);

  BoundReport r;
  r.leading_term = one_to_two_m *
                   (lambda * std::sqrt(std::max(opnorm_sigma, 0.0)) +
                    lambda * lambda) *
                   std::sqrt(rate);
  r.second_term = lambda * lambda * opnorm_m * rate;
  r.total = r.leading_term + r.second_term;
  r.quantities = {
      {"one_to_two_M", one_to_two_m},
      {"opnorm_M", opnorm_m},
      {"opnorm_Sigma", opnorm_sigma},
      {"maxnorm_Sigma", max_norm(sigma)},
      {"lambda", lambda},
  };
  return r;
}

LowerBoundReport error_lower_bound(const SymMatrix& sigma, const Mask& mask,
                                   std::size_t n) {
  require_unit_diagonal(sigma, "error_lower_bound");
  require_mask_dim(sigma, mask, "error_lower_bound");
  if (n == 0)
    throw std::invalid_argument("error_lower_bound: n must be >= 1");

  const std::size_t p = sigma.dim();
  SymMatrix gamma = sign_covariance(sigma);
  SymMatrix a = sine_sensitivity(sigma);
  SymMatrix ma = hadamard(mask.matrix(), a);
  SymMatrix ms = hadamard(mask.matrix(), sigma);

  // 1 - Gamma.^2 entrywise
  SymMatrix damp(p);
  for (std::size_t i = 0; i < p; ++i)
    for (std::size_t j = 0; j <= i; ++j)
      damp.set(i, j, 1.0 - gamma(i, j) * gamma(i, j));

  LowerBoundReport r;
  r.leading_term = variance_proxy_norm(ma, gamma) / std::sqrt(double(n));
  r.second_term = operator_norm(hadamard(ms, damp)) / double(n);
  r.third_term =
      std::sqrt(std::max(
          operator_norm(hadamard(variance_proxy(ms, gamma), gamma)), 0.0)) /
      double(n);
  r.total = r.leading_term + r.second_term + r.third_term;
  r.remainder = std::pow(std::log(double(p)) / double(n), 1.5) *
                std::max(operator_norm(a), operator_norm(sigma));
  return r;
}

}  // namespace qcov

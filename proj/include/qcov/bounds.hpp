#pragma once

// Evaluation of the theoretical error-bound expressions for diagnostics and
// bound-vs-empirical comparison. All hidden absolute constants are set to 1,
// so every value here is a constant-free bound shape, not an absolute
// guarantee; comparisons against data fit one global constant. Logs are
// natural throughout.

#include <cstddef>
#include <map>
#include <string>

#include "qcov/matrix.hpp"

namespace qcov {

struct BoundReport {
  double leading_term = 0.0;
  double second_term = 0.0;
  double total = 0.0;  // leading_term + second_term
  std::map<std::string, double> quantities;
};

// Gamma = (2/pi) * arcsin(sigma) entrywise: the covariance of the sign
// vector of a Gaussian with correlation matrix sigma.
SymMatrix sign_covariance(const SymMatrix& sigma);

// sqrt(1 - x^2) entrywise: the sensitivity of the sine map at arcsin(sigma).
// Vanishes entrywise as |correlations| -> 1.
SymMatrix sine_sensitivity(const SymMatrix& sigma);

// The variance proxy sigma(Z)^2 = Z^2 .* Gamma - (Z .* Gamma)^2 for
// symmetric Z; PSD up to rounding (it is a variance of a random matrix).
SymMatrix variance_proxy(const SymMatrix& z, const SymMatrix& gamma);

// ||sigma(Z)|| = sqrt(operator_norm(variance_proxy(z, gamma))).
double variance_proxy_norm(const SymMatrix& z, const SymMatrix& gamma);

// Upper bound shape for the masked one-bit sine estimator:
//   leading = ||sigma(M .* A)|| * sqrt((log p + t)/n)
//   second  = max{||M .* A||, ||M .* sigma||} * (log p + t)/n
// with A = sine_sensitivity(sigma). Requires unit-diagonal sigma.
BoundReport one_bit_error_bound(const SymMatrix& sigma, const Mask& mask,
                                std::size_t n, double t);

// Upper bound shape for the masked dithered estimator:
//   leading = ||M||_{1->2} * (lambda*||sigma||^{1/2} + lambda^2)
//             * sqrt((log p + t)/n)
//   second  = lambda^2 * ||M|| * (log p + t)/n
BoundReport dithered_error_bound(const SymMatrix& sigma, const Mask& mask,
                                 std::size_t n, double t, double lambda);

struct LowerBoundReport {
  double leading_term = 0.0;  // ||sigma(M .* A)|| / sqrt(n)
  double second_term = 0.0;   // ||M .* sigma .* (1 - Gamma.^2)|| / n
  double third_term = 0.0;    // ||sigma(M .* sigma)^2 .* Gamma||^{1/2} / n
  double total = 0.0;         // sum of the three positive terms
  // Subtracted correction (log(p)/n)^{3/2} * max{||A||, ||sigma||}, reported
  // separately and never folded into total, so degeneration at small n is
  // visible.
  double remainder = 0.0;
};

// Lower bound shape for the expected masked one-bit error; requires
// unit-diagonal sigma.
LowerBoundReport error_lower_bound(const SymMatrix& sigma, const Mask& mask,
                                   std::size_t n);

}  // namespace qcov

#include "qcov/estimators.hpp"

#include <cmath>
#include <numbers>
#include <string>

namespace qcov {

EstimatorKind::Tag EstimatorKind::parse_tag(std::string_view name) {
  for (Tag t : {Tag::sample, Tag::one_bit_sine, Tag::dithered_raw,
                Tag::dithered_psd})
    if (name == tag_name(t)) return t;
  throw std::invalid_argument("unknown estimator: " + std::string(name));
}

void EstimatorKind::validate() const {
  if (dithered()) {
    if (!lambda || !(*lambda > 0.0))
      throw std::invalid_argument(std::string(tag_name(tag)) +
                                  " needs a dither level lambda > 0");
  } else if (lambda) {
    throw std::invalid_argument(std::string(tag_name(tag)) +
                                " does not take a dither level");
  }
}

ErrorMetric parse_metric(std::string_view name) {
  if (name == "operator_norm") return ErrorMetric::operator_norm;
  if (name == "frobenius_norm") return ErrorMetric::frobenius_norm;
  if (name == "max_norm") return ErrorMetric::max_norm;
  throw std::invalid_argument("unknown metric: " + std::string(name));
}

std::string_view metric_name(ErrorMetric m) {
  switch (m) {
    case ErrorMetric::operator_norm: return "operator_norm";
    case ErrorMetric::frobenius_norm: return "frobenius_norm";
    case ErrorMetric::max_norm: return "max_norm";
  }
  return "";
}

SymMatrix sample_cov(const SampleBatch& batch) {
  if (batch.count() == 0)
    throw std::invalid_argument("sample_cov: empty batch");
  const std::size_t p = batch.dim(), n = batch.count();
  SymMatrix out(p);
  for (std::size_t i = 0; i < p; ++i) {
    const double* ri = batch.row(i);
    for (std::size_t j = 0; j <= i; ++j) {
      const double* rj = batch.row(j);
      double s = 0.0;
      for (std::size_t k = 0; k < n; ++k) s += ri[k] * rj[k];
      out.set(i, j, s / double(n));
    }
  }
  return out;
}

SymMatrix one_bit_sine(const BitSampleBlock& block) {
  if (block.count() == 0)
    throw std::invalid_argument("one_bit_sine: empty block");
  SymMatrix g = sign_gram(block);
  double scale = std::numbers::pi / (2.0 * double(block.count()));
  return elementwise_map(scale * g, ScalarFn::sin);
}

SymMatrix dithered_estimate(const DitheredPairBlock& pair, bool project) {
  const std::size_t p = pair.y.dim(), n = pair.y.count();
  if (n == 0) throw std::invalid_argument("dithered_estimate: empty block");
  Matrix g = cross_gram(pair);
  double scale = pair.lambda * pair.lambda / double(n);
  SymMatrix est(p);
  for (std::size_t i = 0; i < p; ++i)
    for (std::size_t j = 0; j <= i; ++j)
      est.set(i, j, scale * 0.5 * (g(i, j) + g(j, i)));
  return project ? psd_project(est) : est;
}

SymMatrix apply_mask(const SymMatrix& est, const Mask& mask) {
  return hadamard(est, mask.matrix());
}

namespace {

double norm_by(const SymMatrix& m, ErrorMetric metric) {
  switch (metric) {
    case ErrorMetric::operator_norm: return operator_norm(m);
    case ErrorMetric::frobenius_norm: return frobenius_norm(m);
    case ErrorMetric::max_norm: return max_norm(m);
  }
  return 0.0;
}

}  // namespace

double estimation_error(const SymMatrix& est, const SymMatrix& truth,
                        ErrorMetric metric) {
  return norm_by(est - truth, metric);
}

double estimation_error(const SymMatrix& est, const SymMatrix& truth,
                        const Mask& mask, ErrorMetric metric) {
  return norm_by(hadamard(est - truth, mask.matrix()), metric);
}

}  // namespace qcov

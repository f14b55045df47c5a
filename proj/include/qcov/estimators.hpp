#pragma once

// The four covariance estimators and the masked error metrics. The data
// model is mean-zero throughout: no estimator subtracts a sample mean.

#include <optional>
#include <string_view>

#include "qcov/matrix.hpp"
#include "qcov/quantize.hpp"
#include "qcov/sampling.hpp"

namespace qcov {

struct EstimatorKind {
  enum class Tag { sample, one_bit_sine, dithered_raw, dithered_psd };

  Tag tag = Tag::sample;
  std::optional<double> lambda;  // present iff tag is dithered_*
  std::optional<Mask> mask;

  static constexpr std::string_view tag_name(Tag t) {
    switch (t) {
      case Tag::sample: return "sample";
      case Tag::one_bit_sine: return "one_bit_sine";
      case Tag::dithered_raw: return "dithered_raw";
      case Tag::dithered_psd: return "dithered_psd";
    }
    return "";
  }
  static Tag parse_tag(std::string_view name);  // throws invalid_argument

  bool dithered() const {
    return tag == Tag::dithered_raw || tag == Tag::dithered_psd;
  }
  void validate() const;  // lambda present and > 0 iff dithered
};

enum class ErrorMetric { operator_norm, frobenius_norm, max_norm };

ErrorMetric parse_metric(std::string_view name);
std::string_view metric_name(ErrorMetric m);

// (1/n) sum_k x^k (x^k)^T.
SymMatrix sample_cov(const SampleBatch& batch);

// sin((pi/(2n)) * sign_gram) entrywise; entries lie in [-1,1] and the
// diagonal is exactly 1.
SymMatrix one_bit_sine(const BitSampleBlock& block);

// (lambda^2/n) * cross_gram, symmetrized as the half-sum with its transpose;
// optionally PSD-projected.
SymMatrix dithered_estimate(const DitheredPairBlock& pair, bool project);

SymMatrix apply_mask(const SymMatrix& est, const Mask& mask);

// Norm of mask .* (est - truth); the mask weighs the difference, i.e. both
// matrices equally.
double estimation_error(const SymMatrix& est, const SymMatrix& truth,
                        ErrorMetric metric);
double estimation_error(const SymMatrix& est, const SymMatrix& truth,
                        const Mask& mask, ErrorMetric metric);

}  // namespace qcov

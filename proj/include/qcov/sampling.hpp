#pragma once

// Deterministic, seeded generation of Gaussian sample batches, uniform
// dither batches, and the covariance-model constructors used by the
// experiments.

#include <array>
#include <cstdint>
#include <optional>
#include <string_view>

#include "qcov/matrix.hpp"

namespace qcov {

// Counter-free splittable RNG: a (seed, stream_id) pair fully determines the
// output sequence, across runs and thread schedules. Engine is xoshiro256++
// seeded through SplitMix64; Gaussians come from Box-Muller. Fixed per
// release: seeds reproduce bit-exactly on the same build.
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::uint64_t stream_id);

  std::uint64_t next_u64();
  double next_unit();                    // uniform [0, 1), 53-bit
  double next_uniform(double lambda);    // uniform [-lambda, lambda]
  double next_normal();                  // standard normal

 private:
  std::array<std::uint64_t, 4> state_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

// Stable 64-bit label hash (FNV-1a) used to derive per-trial stream ids.
std::uint64_t stream_id_of(std::string_view label);

// n samples of dimension p, stored coordinate-major: row(i) is coordinate i
// across all samples, which is the layout the quantizer and covariance
// accumulation stream over.
class SampleBatch {
 public:
  SampleBatch(std::size_t dim, std::size_t count);

  std::size_t dim() const { return dim_; }
  std::size_t count() const { return count_; }

  double value(std::size_t i, std::size_t k) const {
    return values_[i * count_ + k];
  }
  void set_value(std::size_t i, std::size_t k, double v) {
    values_[i * count_ + k] = v;
  }

  const double* row(std::size_t i) const { return values_.data() + i * count_; }
  double* row(std::size_t i) { return values_.data() + i * count_; }

 private:
  std::size_t dim_, count_;
  std::vector<double> values_;
};

// Ground-truth covariance families: equicorrelation (unit diagonal, constant
// off-diagonal c), the spiked variant (one diagonal entry replaced), or an
// explicit matrix. spike_index is 1-based.
struct CovModel {
  enum class Kind { equicorrelation, spiked, explicit_matrix };

  static CovModel equicorrelation(std::size_t dim, double c);
  static CovModel spiked(std::size_t dim, double c, std::size_t spike_index,
                         double spike_value);
  static CovModel explicit_matrix(SymMatrix m);

  Kind kind = Kind::equicorrelation;
  std::size_t dim = 1;
  double c = 0.0;
  std::size_t spike_index = 1;
  double spike_value = 1.0;
  std::optional<SymMatrix> matrix;
};

// Materializes the model, validating PSD-range constraints
// (equicorrelation needs c in (-1/(p-1), 1]; spike_value must be > 0).
SymMatrix build_cov(const CovModel& model);

// Each sample is L*g with g i.i.d. standard normal; L comes from cholesky().
// Draw order is fixed (sample-by-sample, coordinates in order) so seeds
// reproduce.
SampleBatch sample_gaussian(const Matrix& chol_lower, std::size_t n,
                            RngStream& rng);

// i.i.d. Uniform[-lambda, lambda] entries, same fixed draw order.
SampleBatch sample_dither(double lambda, std::size_t dim, std::size_t n,
                          RngStream& rng);

}  // namespace qcov

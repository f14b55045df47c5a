#include "qcov/sampling.hpp"

#include <cmath>
#include <numbers>
#include <string>
#include <utility>

namespace qcov {

namespace {

std::uint64_t splitmix64(std::uint64_t& x) {
  x += 0x9E3779B97F4A7C15ULL;
  std::uint64_t z = x;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

std::uint64_t rotl(std::uint64_t x, int k) {
  return (x << k) | (x >> (64 - k));
}

}  // namespace

RngStream::RngStream(std::uint64_t seed, std::uint64_t stream_id) {
  // Feed both halves of the identity through SplitMix64 so that nearby
  // (seed, stream) pairs land on unrelated xoshiro orbits.
  std::uint64_t x = seed;
  state_[0] = splitmix64(x);
  state_[1] = splitmix64(x);
  x ^= 0x6A09E667F3BCC909ULL ^ stream_id;
  state_[2] = splitmix64(x);
  state_[3] = splitmix64(x);
  if (state_[0] == 0 && state_[1] == 0 && state_[2] == 0 && state_[3] == 0)
    state_[0] = 1;  // the all-zero state is xoshiro's only fixed point
}

std::uint64_t RngStream::next_u64() {
  // xoshiro256++
  std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
  std::uint64_t t = state_[1] << 17;
  state_[2] ^= state_[0];
  state_[3] ^= state_[1];
  state_[1] ^= state_[2];
  state_[0] ^= state_[3];
  state_[2] ^= t;
  state_[3] = rotl(state_[3], 45);
  return result;
}

double RngStream::next_unit() {
  return double(next_u64() >> 11) * 0x1.0p-53;
}

double RngStream::next_uniform(double lambda) {
  if (!(lambda > 0.0))
    throw std::invalid_argument("next_uniform: lambda must be > 0");
  return lambda * (2.0 * next_unit() - 1.0);
}

double RngStream::next_normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  // Box-Muller on (0,1] x [0,1): flip next_unit so log() never sees zero.
  double u = 1.0 - next_unit();
  double v = next_unit();
  double r = std::sqrt(-2.0 * std::log(u));
  double angle = 2.0 * std::numbers::pi * v;
  spare_ = r * std::sin(angle);
  has_spare_ = true;
  return r * std::cos(angle);
}

std::uint64_t stream_id_of(std::string_view label) {
  std::uint64_t h = 0xCBF29CE484222325ULL;  // FNV-1a 64
  for (unsigned char ch : label) {
    h ^= ch;
    h *= 0x100000001B3ULL;
  }
  return h;
}

SampleBatch::SampleBatch(std::size_t dim, std::size_t count)
    : dim_(dim), count_(count), values_(dim * count, 0.0) {
  if (dim == 0) throw std::invalid_argument("SampleBatch: dim must be >= 1");
}

CovModel CovModel::equicorrelation(std::size_t dim, double c) {
  CovModel m;
  m.kind = Kind::equicorrelation;
  m.dim = dim;
  m.c = c;
  return m;
}

CovModel CovModel::spiked(std::size_t dim, double c, std::size_t spike_index,
                          double spike_value) {
  CovModel m;
  m.kind = Kind::spiked;
  m.dim = dim;
  m.c = c;
  m.spike_index = spike_index;
  m.spike_value = spike_value;
  return m;
}

CovModel CovModel::explicit_matrix(SymMatrix mat) {
  CovModel m;
  m.kind = Kind::explicit_matrix;
  m.dim = mat.dim();
  m.matrix = std::move(mat);
  return m;
}

SymMatrix build_cov(const CovModel& model) {
  if (model.kind == CovModel::Kind::explicit_matrix) {
    if (!model.matrix)
      throw std::invalid_argument("build_cov: explicit model without matrix");
    return *model.matrix;
  }

  std::size_t p = model.dim;
  if (p == 0) throw std::invalid_argument("build_cov: dim must be >= 1");
  double lo = p > 1 ? -1.0 / double(p - 1) : -1.0;
  if (!(model.c > lo && model.c <= 1.0))
    throw std::invalid_argument(
        "build_cov: off-diagonal " + std::to_string(model.c) +
        " outside the PSD range (" + std::to_string(lo) + ", 1]");

  SymMatrix sigma(p);
  for (std::size_t i = 0; i < p; ++i)
    for (std::size_t j = 0; j <= i; ++j)
      sigma.set(i, j, i == j ? 1.0 : model.c);

  if (model.kind == CovModel::Kind::spiked) {
    if (model.spike_index < 1 || model.spike_index > p)
      throw std::invalid_argument("build_cov: spike_index " +
                                  std::to_string(model.spike_index) +
                                  " outside 1.." + std::to_string(p));
    if (!(model.spike_value > 0.0))
      throw std::invalid_argument("build_cov: spike_value must be > 0");
    std::size_t i = model.spike_index - 1;
    sigma.set(i, i, model.spike_value);
  }
  return sigma;
}

SampleBatch sample_gaussian(const Matrix& chol_lower, std::size_t n,
                            RngStream& rng) {
  const std::size_t p = chol_lower.rows();
  if (chol_lower.cols() != p)
    throw std::invalid_argument("sample_gaussian: factor must be square");
  SampleBatch batch(p, n);
  std::vector<double> g(p);
  for (std::size_t k = 0; k < n; ++k) {
    for (std::size_t i = 0; i < p; ++i) g[i] = rng.next_normal();
    for (std::size_t i = 0; i < p; ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j <= i; ++j) s += chol_lower(i, j) * g[j];
      batch.set_value(i, k, s);
    }
  }
  return batch;
}

SampleBatch sample_dither(double lambda, std::size_t dim, std::size_t n,
                          RngStream& rng) {
  if (!(lambda > 0.0))
    throw std::invalid_argument("sample_dither: lambda must be > 0");
  SampleBatch batch(dim, n);
  for (std::size_t k = 0; k < n; ++k)
    for (std::size_t i = 0; i < dim; ++i)
      batch.set_value(i, k, rng.next_uniform(lambda));
  return batch;
}

}  // namespace qcov

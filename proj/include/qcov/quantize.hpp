#pragma once

// One-bit and dithered two-bit quantization into bit-packed blocks, and
// popcount-based Gram accumulation. Layout is coordinate-major (one bit row
// per coordinate across samples) so each Gram entry is a single streaming
// XOR+popcount pass.

#include <cstdint>
#include <iosfwd>
#include <string>

#include "qcov/matrix.hpp"
#include "qcov/sampling.hpp"

namespace qcov {

// p rows of ceil(n/64) packed words; bit (i,k) = 1 encodes value +1, 0
// encodes -1. Tail bits of the last word are always zero (type invariant:
// the Gram formula uses the total n, so stray tail bits would corrupt it).
class BitSampleBlock {
 public:
  BitSampleBlock(std::size_t dim, std::size_t count);

  std::size_t dim() const { return dim_; }
  std::size_t count() const { return count_; }
  std::size_t words_per_row() const { return words_; }

  bool bit(std::size_t i, std::size_t k) const {
    return (words_at(i)[k / 64] >> (k % 64)) & 1u;
  }
  void set_bit(std::size_t i, std::size_t k, bool value);

  const std::uint64_t* words_at(std::size_t i) const {
    return bits_.data() + i * words_;
  }
  std::uint64_t* words_at(std::size_t i) { return bits_.data() + i * words_; }

 private:
  std::size_t dim_, count_, words_;
  std::vector<std::uint64_t> bits_;
};

// The two independently dithered sign blocks of one sample batch.
struct DitheredPairBlock {
  BitSampleBlock y;
  BitSampleBlock ybar;
  double lambda;
};

// bit = 1 iff value >= 0 (sign(0) = +1; note -0.0 >= 0 is true, so the
// convention applies to the value, not its bit pattern).
BitSampleBlock sign_pack(const SampleBatch& batch);

// Draws two fresh independent Uniform[-lambda, lambda] dither batches from
// rng and packs sign(batch + dither) for each. Drawing inside the call keeps
// the independence requirement out of callers' hands.
DitheredPairBlock dithered_pack(const SampleBatch& batch, double lambda,
                                RngStream& rng);

// Test hook: same packing with caller-supplied dither batches, for identity
// checks that need explicit control of the dithers.
DitheredPairBlock dithered_pack_with(const SampleBatch& batch, double lambda,
                                     const SampleBatch& tau,
                                     const SampleBatch& tau_bar);

// result(i,j) = sum_k y_i^k y_j^k = n - 2*popcount(bits_i XOR bits_j).
// Integer-exact; diagonal is exactly n.
SymMatrix sign_gram(const BitSampleBlock& block);

// result(i,j) = sum_k y_i^k ybar_j^k; generally asymmetric.
Matrix cross_gram(const DitheredPairBlock& pair);

// Binary dump: magic "QBLK", u32 version=1, u64 p, u64 n (all little-endian),
// then the packed word rows, little-endian.
void write_block(std::ostream& out, const BitSampleBlock& block);
void write_block(const std::string& path, const BitSampleBlock& block);
BitSampleBlock read_block(std::istream& in);

}  // namespace qcov

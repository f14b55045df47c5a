#include "qcov/quantize.hpp"

#include <bit>
#include <fstream>
#include <istream>
#include <ostream>

namespace qcov {

namespace {

void put_u32(std::ostream& out, std::uint32_t v) {
  char b[4];
  for (int i = 0; i < 4; ++i) b[i] = char((v >> (8 * i)) & 0xFF);
  out.write(b, 4);
}

void put_u64(std::ostream& out, std::uint64_t v) {
  char b[8];
  for (int i = 0; i < 8; ++i) b[i] = char((v >> (8 * i)) & 0xFF);
  out.write(b, 8);
}

std::uint32_t get_u32(std::istream& in) {
  char b[4];
  in.read(b, 4);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i)
    v |= std::uint32_t(static_cast<unsigned char>(b[i])) << (8 * i);
  return v;
}

std::uint64_t get_u64(std::istream& in) {
  char b[8];
  in.read(b, 8);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i)
    v |= std::uint64_t(static_cast<unsigned char>(b[i])) << (8 * i);
  return v;
}

// Packs one coordinate row of signs; offset shifts into the dither row.
void pack_row(BitSampleBlock& block, std::size_t i, const double* values,
              const double* dither, std::size_t n) {
  std::uint64_t* words = block.words_at(i);
  for (std::size_t k = 0; k < n; ++k) {
    double v = dither ? values[k] + dither[k] : values[k];
    if (v >= 0.0) words[k / 64] |= std::uint64_t(1) << (k % 64);
  }
}

}  // namespace

BitSampleBlock::BitSampleBlock(std::size_t dim, std::size_t count)
    : dim_(dim), count_(count), words_((count + 63) / 64),
      bits_(dim * words_, 0) {
  if (dim == 0)
    throw std::invalid_argument("BitSampleBlock: dim must be >= 1");
}

void BitSampleBlock::set_bit(std::size_t i, std::size_t k, bool value) {
  std::uint64_t mask = std::uint64_t(1) << (k % 64);
  if (value)
    words_at(i)[k / 64] |= mask;
  else
    words_at(i)[k / 64] &= ~mask;
}

BitSampleBlock sign_pack(const SampleBatch& batch) {
  BitSampleBlock block(batch.dim(), batch.count());
  for (std::size_t i = 0; i < batch.dim(); ++i)
    pack_row(block, i, batch.row(i), nullptr, batch.count());
  return block;
}

DitheredPairBlock dithered_pack(const SampleBatch& batch, double lambda,
                                RngStream& rng) {
  if (!(lambda > 0.0))
    throw std::invalid_argument("dithered_pack: lambda must be > 0");
  SampleBatch tau = sample_dither(lambda, batch.dim(), batch.count(), rng);
  SampleBatch tau_bar = sample_dither(lambda, batch.dim(), batch.count(), rng);
  return dithered_pack_with(batch, lambda, tau, tau_bar);
}

DitheredPairBlock dithered_pack_with(const SampleBatch& batch, double lambda,
                                     const SampleBatch& tau,
                                     const SampleBatch& tau_bar) {
  if (!(lambda > 0.0))
    throw std::invalid_argument("dithered_pack_with: lambda must be > 0");
  if (tau.dim() != batch.dim() || tau.count() != batch.count() ||
      tau_bar.dim() != batch.dim() || tau_bar.count() != batch.count())
    throw std::invalid_argument(
        "dithered_pack_with: dither shape does not match the batch");

  DitheredPairBlock pair{BitSampleBlock(batch.dim(), batch.count()),
                         BitSampleBlock(batch.dim(), batch.count()), lambda};
  for (std::size_t i = 0; i < batch.dim(); ++i) {
    pack_row(pair.y, i, batch.row(i), tau.row(i), batch.count());
    pack_row(pair.ybar, i, batch.row(i), tau_bar.row(i), batch.count());
  }
  return pair;
}

SymMatrix sign_gram(const BitSampleBlock& block) {
  const std::size_t p = block.dim(), w = block.words_per_row();
  const double n = double(block.count());
  SymMatrix g(p);
  for (std::size_t i = 0; i < p; ++i) {
    const std::uint64_t* ri = block.words_at(i);
    for (std::size_t j = 0; j <= i; ++j) {
      const std::uint64_t* rj = block.words_at(j);
      std::size_t mismatches = 0;
      for (std::size_t k = 0; k < w; ++k)
        mismatches += std::size_t(std::popcount(ri[k] ^ rj[k]));
      g.set(i, j, n - 2.0 * double(mismatches));
    }
  }
  return g;
}

Matrix cross_gram(const DitheredPairBlock& pair) {
  const std::size_t p = pair.y.dim(), w = pair.y.words_per_row();
  const double n = double(pair.y.count());
  Matrix g(p, p);
  for (std::size_t i = 0; i < p; ++i) {
    const std::uint64_t* ri = pair.y.words_at(i);
    for (std::size_t j = 0; j < p; ++j) {
      const std::uint64_t* rj = pair.ybar.words_at(j);
      std::size_t mismatches = 0;
      for (std::size_t k = 0; k < w; ++k)
        mismatches += std::size_t(std::popcount(ri[k] ^ rj[k]));
      g(i, j) = n - 2.0 * double(mismatches);
    }
  }
  return g;
}

void write_block(std::ostream& out, const BitSampleBlock& block) {
  out.write("QBLK", 4);
  put_u32(out, 1);
  put_u64(out, block.dim());
  put_u64(out, block.count());
  for (std::size_t i = 0; i < block.dim(); ++i)
    for (std::size_t k = 0; k < block.words_per_row(); ++k)
      put_u64(out, block.words_at(i)[k]);
  if (!out) throw std::runtime_error("write_block: stream write failed");
}

void write_block(const std::string& path, const BitSampleBlock& block) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("write_block: cannot open " + path);
  write_block(out, block);
  out.flush();
  if (!out) throw std::runtime_error("write_block: write to " + path +
                                     " failed");
}

BitSampleBlock read_block(std::istream& in) {
  char magic[4];
  in.read(magic, 4);
  if (!in || std::string_view(magic, 4) != "QBLK")
    throw std::runtime_error("read_block: bad magic");
  std::uint32_t version = get_u32(in);
  if (!in || version != 1)
    throw std::runtime_error("read_block: unsupported version " +
                             std::to_string(version));
  std::uint64_t p = get_u64(in);
  std::uint64_t n = get_u64(in);
  if (!in) throw std::runtime_error("read_block: truncated header");
  if (p == 0 || p > (std::uint64_t(1) << 32) || n > (std::uint64_t(1) << 40))
    throw std::runtime_error("read_block: implausible dimensions");

  BitSampleBlock block{std::size_t(p), std::size_t(n)};
  for (std::size_t i = 0; i < block.dim(); ++i)
    for (std::size_t k = 0; k < block.words_per_row(); ++k) {
      block.words_at(i)[k] = get_u64(in);
      if (!in) throw std::runtime_error("read_block: truncated payload");
    }

  // Enforce the tail-zero invariant rather than inheriting corrupt bits.
  std::size_t used = block.count() % 64;
  if (block.words_per_row() > 0 && used != 0) {
    std::uint64_t tail_mask = ~std::uint64_t(0) << used;
    for (std::size_t i = 0; i < block.dim(); ++i)
      if (block.words_at(i)[block.words_per_row() - 1] & tail_mask)
        throw std::runtime_error("read_block: nonzero tail padding");
  }
  return block;
}

}  // namespace qcov

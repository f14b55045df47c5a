#pragma once

// Dense symmetric-matrix arithmetic, norms, spectral decomposition, PSD
// projection, and Cholesky factorization. Everything here is a pure function
// on immutable values; dimensions are desk-scale (p <= ~100).

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace qcov {

// Numerical failures (non-convergence, non-PSD input where PSD is required).
class numerical_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Row-major dense matrix, used where values are genuinely asymmetric
// (cross-Grams, Cholesky factors, eigenvector columns).
class Matrix {
 public:
  Matrix(std::size_t rows, std::size_t cols)
      : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {}

  static Matrix identity(std::size_t n);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }

  double operator()(std::size_t r, std::size_t c) const {
    return data_[r * cols_ + c];
  }
  double& operator()(std::size_t r, std::size_t c) {
    return data_[r * cols_ + c];
  }

 private:
  std::size_t rows_, cols_;
  std::vector<double> data_;
};

// Symmetric matrix stored as a single lower triangle, so (i,j) and (j,i)
// always read the identical value by construction.
class SymMatrix {
 public:
  explicit SymMatrix(std::size_t dim)
      : dim_(dim), tri_(dim * (dim + 1) / 2, 0.0) {
    if (dim == 0) throw std::invalid_argument("SymMatrix: dim must be >= 1");
  }

  static SymMatrix identity(std::size_t dim);
  static SymMatrix constant(std::size_t dim, double value);

  std::size_t dim() const { return dim_; }

  double operator()(std::size_t i, std::size_t j) const {
    return tri_[slot(i, j)];
  }
  void set(std::size_t i, std::size_t j, double v) { tri_[slot(i, j)] = v; }

 private:
  std::size_t slot(std::size_t i, std::size_t j) const {
    if (j > i) std::swap(i, j);
    return i * (i + 1) / 2 + j;
  }

  std::size_t dim_;
  std::vector<double> tri_;
};

// Symmetric weight matrix with entries in [0,1]; validated at construction.
class Mask {
 public:
  explicit Mask(SymMatrix m);

  static Mask full(std::size_t dim);      // all ones
  static Mask identity(std::size_t dim);  // diagonal support only
  static Mask band(std::size_t dim, std::size_t width);  // |i-j| <= width

  const SymMatrix& matrix() const { return m_; }
  std::size_t dim() const { return m_.dim(); }

 private:
  SymMatrix m_;
};

enum class ScalarFn { sin, cos, arcsin, sqrt1m_sq };

SymMatrix hadamard(const SymMatrix& a, const SymMatrix& b);

// Applies f entrywise. arcsin and sqrt1m_sq accept |x| up to 1 + 1e-12
// (clamped to +-1: empirical sign-correlation means can overshoot by
// rounding); anything beyond the window is a genuine domain error.
SymMatrix elementwise_map(const SymMatrix& a, ScalarFn f);

Matrix matmul(const Matrix& a, const Matrix& b);

// a*a for symmetric a, computed directly on the lower triangle so the
// symmetric-storage invariant holds exactly.
SymMatrix sym_square(const SymMatrix& a);

SymMatrix operator+(const SymMatrix& a, const SymMatrix& b);
SymMatrix operator-(const SymMatrix& a, const SymMatrix& b);
SymMatrix operator*(double s, const SymMatrix& a);

Matrix to_matrix(const SymMatrix& a);
Matrix transpose(const Matrix& a);

struct EigenDecomposition {
  std::vector<double> values;  // descending
  Matrix vectors;              // orthogonal, column k pairs with values[k]
};

// Cyclic Jacobi iteration. Converges when the off-diagonal Frobenius mass
// drops to 1e-14 * ||a||_F; hard cap of 100 sweeps, past which a
// numerical_error carrying the residual is thrown.
EigenDecomposition sym_eigen(const SymMatrix& a);

double operator_norm(const SymMatrix& a);  // max |eigenvalue|
double operator_norm(const Matrix& a);     // sqrt of operator_norm(a^T a)

double max_norm(const SymMatrix& a);  // max |entry|
double max_norm(const Matrix& a);
double one_to_two_norm(const SymMatrix& a);  // max column Euclidean norm
double one_to_two_norm(const Matrix& a);
double frobenius_norm(const SymMatrix& a);

// Nearest PSD matrix: eigendecompose, clamp negative eigenvalues to zero,
// reconstruct.
SymMatrix psd_project(const SymMatrix& a);

// Lower-triangular L with L L^T = a. Pivots in [-1e-12, 0] are treated as 0
// (rank-deficient inputs such as the all-ones matrix are fine); pivots below
// -1e-12 throw a numerical_error.
Matrix cholesky(const SymMatrix& a);

}  // namespace qcov

#include "qcov/matrix.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace qcov {

namespace {

void require_same_dim(const SymMatrix& a, const SymMatrix& b,
                      const char* what) {
  if (a.dim() != b.dim())
    throw std::invalid_argument(std::string(what) + ": dimension mismatch (" +
                                std::to_string(a.dim()) + " vs " +
                                std::to_string(b.dim()) + ")");
}

// Domain window for arcsin/sqrt1m_sq: empirical correlation means may
// overshoot +-1 by rounding, never by more than ~1e-12.
double clamp_unit(double x, const char* what) {
  if (x > 1.0) {
    if (x > 1.0 + 1e-12)
      throw std::domain_error(std::string(what) + ": entry " +
                              std::to_string(x) + " outside [-1, 1]");
    return 1.0;
  }
  if (x < -1.0) {
    if (x < -(1.0 + 1e-12))
      throw std::domain_error(std::string(what) + ": entry " +
                              std::to_string(x) + " outside [-1, 1]");
    return -1.0;
  }
  return x;
}

}  // namespace

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

SymMatrix SymMatrix::identity(std::size_t dim) {
  SymMatrix m(dim);
  for (std::size_t i = 0; i < dim; ++i) m.set(i, i, 1.0);
  return m;
}

SymMatrix SymMatrix::constant(std::size_t dim, double value) {
  SymMatrix m(dim);
  for (std::size_t i = 0; i < dim; ++i)
    for (std::size_t j = 0; j <= i; ++j) m.set(i, j, value);
  return m;
}

Mask::Mask(SymMatrix m) : m_(std::move(m)) {
  for (std::size_t i = 0; i < m_.dim(); ++i)
    for (std::size_t j = 0; j <= i; ++j)
      if (!(m_(i, j) >= 0.0 && m_(i, j) <= 1.0))
        throw std::invalid_argument("Mask: entry " + std::to_string(m_(i, j)) +
                                    " outside [0, 1]");
}

Mask Mask::full(std::size_t dim) { return Mask(SymMatrix::constant(dim, 1.0)); }

Mask Mask::identity(std::size_t dim) { return Mask(SymMatrix::identity(dim)); }

Mask Mask::band(std::size_t dim, std::size_t width) {
  SymMatrix m(dim);
  for (std::size_t i = 0; i < dim; ++i)
    for (std::size_t j = 0; j <= i; ++j)
      if (i - j <= width) m.set(i, j, 1.0);
  return Mask(std::move(m));
}

SymMatrix hadamard(const SymMatrix& a, const SymMatrix& b) {
  require_same_dim(a, b, "hadamard");
  SymMatrix out(a.dim());
  for (std::size_t i = 0; i < a.dim(); ++i)
    for (std::size_t j = 0; j <= i; ++j) out.set(i, j, a(i, j) * b(i, j));
  return out;
}

SymMatrix elementwise_map(const SymMatrix& a, ScalarFn f) {
  SymMatrix out(a.dim());
  for (std::size_t i = 0; i < a.dim(); ++i)
    for (std::size_t j = 0; j <= i; ++j) {
      double x = a(i, j), y = 0.0;
      switch (f) {
        case ScalarFn::sin:
          y = std::sin(x);
          break;
        case ScalarFn::cos:
          y = std::cos(x);
          break;
        case ScalarFn::arcsin:
          y = std::asin(clamp_unit(x, "arcsin"));
          break;
        case ScalarFn::sqrt1m_sq: {
          double c = clamp_unit(x, "sqrt1m_sq");
          y = std::sqrt(1.0 - c * c);
          break;
        }
      }
      out.set(i, j, y);
    }
  return out;
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows())
    throw std::invalid_argument("matmul: inner dimensions " +
                                std::to_string(a.cols()) + " vs " +
                                std::to_string(b.rows()));
  Matrix out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t k = 0; k < a.cols(); ++k) {
      double aik = a(i, k);
      if (aik == 0.0) continue;
      for (std::size_t j = 0; j < b.cols(); ++j) out(i, j) += aik * b(k, j);
    }
  return out;
}

SymMatrix sym_square(const SymMatrix& a) {
  SymMatrix out(a.dim());
  for (std::size_t i = 0; i < a.dim(); ++i)
    for (std::size_t j = 0; j <= i; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < a.dim(); ++k) s += a(i, k) * a(k, j);
      out.set(i, j, s);
    }
  return out;
}

SymMatrix operator+(const SymMatrix& a, const SymMatrix& b) {
  require_same_dim(a, b, "operator+");
  SymMatrix out(a.dim());
  for (std::size_t i = 0; i < a.dim(); ++i)
    for (std::size_t j = 0; j <= i; ++j) out.set(i, j, a(i, j) + b(i, j));
  return out;
}

SymMatrix operator-(const SymMatrix& a, const SymMatrix& b) {
  require_same_dim(a, b, "operator-");
  SymMatrix out(a.dim());
  for (std::size_t i = 0; i < a.dim(); ++i)
    for (std::size_t j = 0; j <= i; ++j) out.set(i, j, a(i, j) - b(i, j));
  return out;
}

SymMatrix operator*(double s, const SymMatrix& a) {
  SymMatrix out(a.dim());
  for (std::size_t i = 0; i < a.dim(); ++i)
    for (std::size_t j = 0; j <= i; ++j) out.set(i, j, s * a(i, j));
  return out;
}

Matrix to_matrix(const SymMatrix& a) {
  Matrix out(a.dim(), a.dim());
  for (std::size_t i = 0; i < a.dim(); ++i)
    for (std::size_t j = 0; j < a.dim(); ++j) out(i, j) = a(i, j);
  return out;
}

Matrix transpose(const Matrix& a) {
  Matrix out(a.cols(), a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) out(j, i) = a(i, j);
  return out;
}

EigenDecomposition sym_eigen(const SymMatrix& a) {
  const std::size_t p = a.dim();
  Matrix w = to_matrix(a);  // working copy, driven to diagonal
  Matrix v = Matrix::identity(p);

  double fro = frobenius_norm(a);
  double target = 1e-14 * fro;

  auto off_mass = [&]() {
    double s = 0.0;
    for (std::size_t i = 0; i < p; ++i)
      for (std::size_t j = i + 1; j < p; ++j) s += 2.0 * w(i, j) * w(i, j);
    return std::sqrt(s);
  };

  double resid = off_mass();
  int sweep = 0;
  while (resid > target) {
    if (++sweep > 100)
      throw numerical_error(
          "sym_eigen: no convergence after 100 sweeps; off-diagonal residual " +
          std::to_string(resid));
    for (std::size_t q = 0; q + 1 < p; ++q)
      for (std::size_t r = q + 1; r < p; ++r) {
        double apq = w(q, r);
        if (apq == 0.0) continue;
        double app = w(q, q), aqq = w(r, r);
        double tau = (aqq - app) / (2.0 * apq);
        double t = (tau >= 0.0 ? 1.0 : -1.0) /
                   (std::abs(tau) + std::sqrt(1.0 + tau * tau));
        double c = 1.0 / std::sqrt(t * t + 1.0);
        double s = t * c;
        // rotate rows/columns q and r of w, keeping it exactly symmetric
        for (std::size_t k = 0; k < p; ++k) {
          if (k == q || k == r) continue;
          double wkq = w(k, q), wkr = w(k, r);
          w(k, q) = w(q, k) = c * wkq - s * wkr;
          w(k, r) = w(r, k) = s * wkq + c * wkr;
        }
        w(q, q) = app - t * apq;
        w(r, r) = aqq + t * apq;
        w(q, r) = w(r, q) = 0.0;
        for (std::size_t k = 0; k < p; ++k) {
          double vkq = v(k, q), vkr = v(k, r);
          v(k, q) = c * vkq - s * vkr;
          v(k, r) = s * vkq + c * vkr;
        }
      }
    resid = off_mass();
  }

  std::vector<std::size_t> order(p);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
    return w(x, x) > w(y, y);
  });

  EigenDecomposition out{std::vector<double>(p), Matrix(p, p)};
  for (std::size_t k = 0; k < p; ++k) {
    out.values[k] = w(order[k], order[k]);
    for (std::size_t i = 0; i < p; ++i) out.vectors(i, k) = v(i, order[k]);
  }
  return out;
}

double operator_norm(const SymMatrix& a) {
  EigenDecomposition e = sym_eigen(a);
  return std::max(std::abs(e.values.front()), std::abs(e.values.back()));
}

double operator_norm(const Matrix& a) {
  SymMatrix gram(a.cols());
  for (std::size_t i = 0; i < a.cols(); ++i)
    for (std::size_t j = 0; j <= i; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < a.rows(); ++k) s += a(k, i) * a(k, j);
      gram.set(i, j, s);
    }
  double top = sym_eigen(gram).values.front();
  return std::sqrt(std::max(top, 0.0));
}

double max_norm(const SymMatrix& a) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.dim(); ++i)
    for (std::size_t j = 0; j <= i; ++j) m = std::max(m, std::abs(a(i, j)));
  return m;
}

double max_norm(const Matrix& a) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j)
      m = std::max(m, std::abs(a(i, j)));
  return m;
}

double one_to_two_norm(const SymMatrix& a) {
  double m = 0.0;
  for (std::size_t j = 0; j < a.dim(); ++j) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.dim(); ++i) s += a(i, j) * a(i, j);
    m = std::max(m, s);
  }
  return std::sqrt(m);
}

double one_to_two_norm(const Matrix& a) {
  double m = 0.0;
  for (std::size_t j = 0; j < a.cols(); ++j) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.rows(); ++i) s += a(i, j) * a(i, j);
    m = std::max(m, s);
  }
  return std::sqrt(m);
}

double frobenius_norm(const SymMatrix& a) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.dim(); ++i)
    for (std::size_t j = 0; j < a.dim(); ++j) s += a(i, j) * a(i, j);
  return std::sqrt(s);
}

SymMatrix psd_project(const SymMatrix& a) {
  EigenDecomposition e = sym_eigen(a);
  SymMatrix out(a.dim());
  for (std::size_t k = 0; k < a.dim(); ++k) {
    double lam = e.values[k];
    if (lam <= 0.0) break;  // values are descending
    for (std::size_t i = 0; i < a.dim(); ++i)
      for (std::size_t j = 0; j <= i; ++j)
        out.set(i, j, out(i, j) + lam * e.vectors(i, k) * e.vectors(j, k));
  }
  return out;
}

Matrix cholesky(const SymMatrix& a) {
  const std::size_t p = a.dim();
  Matrix l(p, p);
  for (std::size_t j = 0; j < p; ++j) {
    double pivot = a(j, j);
    for (std::size_t k = 0; k < j; ++k) pivot -= l(j, k) * l(j, k);
    if (pivot < -1e-12)
      throw numerical_error("cholesky: pivot " + std::to_string(pivot) +
                            " at column " + std::to_string(j) +
                            "; matrix is not positive semidefinite");
    if (pivot <= 0.0) {
      // Rank-deficient: zero pivot, zero column. A vanishing pivot of a PSD
      // matrix forces the rest of its column to vanish too; a significant
      // residual there means the input is indefinite.
      for (std::size_t i = j + 1; i < p; ++i) {
        double s = a(i, j);
        for (std::size_t k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
        if (std::abs(s) > 1e-8 * (1.0 + max_norm(a)))
          throw numerical_error(
              "cholesky: zero pivot with nonzero column residual " +
              std::to_string(s) + " at column " + std::to_string(j) +
              "; matrix is not positive semidefinite");
      }
      continue;
    }
    double root = std::sqrt(pivot);
    l(j, j) = root;
    for (std::size_t i = j + 1; i < p; ++i) {
      double s = a(i, j);
      for (std::size_t k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
      l(i, j) = s / root;
    }
  }
  return l;
}

}  // namespace qcov

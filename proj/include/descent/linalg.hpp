#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "descent/errors.hpp"

namespace descent {

using Vector = std::vector<double>;

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double norm(std::span<const double> a) { return std::sqrt(dot(a, a)); }

inline double distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return std::sqrt(s);
}

inline bool all_finite(std::span<const double> a) {
  for (double v : a)
    if (!std::isfinite(v)) return false;
  return true;
}

/// Dense symmetric matrix stored as the packed upper triangle, so
/// entry(i,j) == entry(j,i) holds by representation, not by tolerance.
class SymmetricMatrix {
 public:
  explicit SymmetricMatrix(std::size_t n)
      : n_(n), upper_(n * (n + 1) / 2, 0.0) {
    if (n == 0) throw std::invalid_argument("SymmetricMatrix: empty matrix");
  }

  static SymmetricMatrix identity(std::size_t n) {
    SymmetricMatrix m(n);
    for (std::size_t i = 0; i < n; ++i) m.set(i, i, 1.0);
    return m;
  }

  static SymmetricMatrix diagonal(const Vector& d) {
    SymmetricMatrix m(d.size());
    for (std::size_t i = 0; i < d.size(); ++i) m.set(i, i, d[i]);
    return m;
  }

  std::size_t size() const { return n_; }

  double operator()(std::size_t i, std::size_t j) const {
    return upper_[index(i, j)];
  }

  void set(std::size_t i, std::size_t j, double v) { upper_[index(i, j)] = v; }

  double trace() const {
    double t = 0.0;
    for (std::size_t i = 0; i < n_; ++i) t += (*this)(i, i);
    return t;
  }

  double max_abs() const {
    double m = 0.0;
    for (double v : upper_) m = std::max(m, std::abs(v));
    return m;
  }

  double frobenius_norm() const {
    double s = 0.0;
    for (std::size_t i = 0; i < n_; ++i)
      for (std::size_t j = 0; j < n_; ++j) {
        const double v = (*this)(i, j);
        s += v * v;
      }
    return std::sqrt(s);
  }

  bool finite() const {
    for (double v : upper_)
      if (!std::isfinite(v)) return false;
    return true;
  }

 private:
  std::size_t index(std::size_t i, std::size_t j) const {
    if (i >= n_ || j >= n_)
      throw std::out_of_range("SymmetricMatrix: index out of range");
    if (i > j) std::swap(i, j);
    return i * n_ - i * (i - 1) / 2 + (j - i);
  }

  std::size_t n_;
  std::vector<double> upper_;
};

inline Vector matvec(const SymmetricMatrix& a, std::span<const double> x) {
  const std::size_t n = a.size();
  Vector y(n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) y[i] += a(i, j) * x[j];
  return y;
}

/// Full eigendecomposition of a symmetric matrix. Eigenvalues ascend;
/// eigenvector column k (column-major) pairs with eigenvalues[k].
struct SymmetricSpectrum {
  std::size_t n = 0;
  std::vector<double> eigenvalues;
  std::vector<double> eigenvectors;  // column-major n x n

  double eigenvector(std::size_t row, std::size_t col) const {
    return eigenvectors[col * n + row];
  }
  double min() const { return eigenvalues.front(); }
  double max() const { return eigenvalues.back(); }
  double max_abs() const {
    return std::max(std::abs(eigenvalues.front()),
                    std::abs(eigenvalues.back()));
  }
};

namespace detail {

// One cyclic Jacobi sweep over the strict upper triangle in fixed (p,q)
// order; fixed order keeps the decomposition deterministic for fixed input.
inline void jacobi_rotate(std::vector<double>& a, std::vector<double>& q,
                          std::size_t n, std::size_t p, std::size_t r) {
  auto A = [&](std::size_t i, std::size_t j) -> double& { return a[i * n + j]; };
  auto Q = [&](std::size_t i, std::size_t j) -> double& { return q[i * n + j]; };

  const double apq = A(p, r);
  if (apq == 0.0) return;
  const double theta = (A(r, r) - A(p, p)) / (2.0 * apq);
  const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                   (std::abs(theta) + std::sqrt(theta * theta + 1.0));
  const double c = 1.0 / std::sqrt(t * t + 1.0);
  const double s = t * c;
  const double tau = s / (1.0 + c);

  const double app = A(p, p);
  const double arr = A(r, r);
  A(p, p) = app - t * apq;
  A(r, r) = arr + t * apq;
  A(p, r) = A(r, p) = 0.0;

  for (std::size_t k = 0; k < n; ++k) {
    if (k != p && k != r) {
      const double akp = A(k, p);
      const double akr = A(k, r);
      A(k, p) = A(p, k) = akp - s * (akr + tau * akp);
      A(k, r) = A(r, k) = akr + s * (akp - tau * akr);
    }
    const double qkp = Q(k, p);
    const double qkr = Q(k, r);
    Q(k, p) = qkp - s * (qkr + tau * qkp);
    Q(k, r) = qkr + s * (qkp - tau * qkr);
  }
}

inline double off_diagonal_norm(const std::vector<double>& a, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) s += a[i * n + j] * a[i * n + j];
  return std::sqrt(2.0 * s);
}

}  // namespace detail

/// Cyclic Jacobi eigensolver. Converges quadratically for symmetric input;
/// the sweep budget is generous for any sane dimension here (N <= ~100).
inline SymmetricSpectrum eigen_symmetric(const SymmetricMatrix& m) {
  const std::size_t n = m.size();
  if (!m.finite())
    throw std::invalid_argument("eigen_symmetric: non-finite entries");

  std::vector<double> a(n * n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) a[i * n + j] = m(i, j);
  std::vector<double> q(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) q[i * n + i] = 1.0;

  const double tol = 1e-14 * m.frobenius_norm();
  const std::size_t sweep_budget = 100;

  bool converged = detail::off_diagonal_norm(a, n) <= tol;
  for (std::size_t sweep = 0; sweep < sweep_budget && !converged; ++sweep) {
    for (std::size_t p = 0; p + 1 < n; ++p)
      for (std::size_t r = p + 1; r < n; ++r) detail::jacobi_rotate(a, q, n, p, r);
    converged = detail::off_diagonal_norm(a, n) <= tol;
  }
  if (!converged)
    throw NoConvergence("eigen_symmetric: off-diagonal norm did not fall below tolerance");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
    if (a[x * n + x] != a[y * n + y]) return a[x * n + x] < a[y * n + y];
    return x < y;  // deterministic tie-break
  });

  SymmetricSpectrum spec;
  spec.n = n;
  spec.eigenvalues.resize(n);
  spec.eigenvectors.resize(n * n);
  for (std::size_t k = 0; k < n; ++k) {
    spec.eigenvalues[k] = a[order[k] * n + order[k]];
    for (std::size_t i = 0; i < n; ++i)
      spec.eigenvectors[k * n + i] = q[i * n + order[k]];
  }
  return spec;
}

/// Spectral norm of a symmetric matrix, i.e. its spectral radius.
inline double spectral_norm(const SymmetricMatrix& m) {
  return eigen_symmetric(m).max_abs();
}

/// Solves A x = b by Gaussian elimination with partial pivoting. Returns
/// nullopt when a pivot falls below rel_pivot_tol * max|A| (singular).
inline std::optional<Vector> solve_linear(const SymmetricMatrix& a,
                                          const Vector& b,
                                          double rel_pivot_tol = 1e-10) {
  const std::size_t n = a.size();
  if (b.size() != n)
    throw std::invalid_argument("solve_linear: dimension mismatch");

  std::vector<double> m(n * (n + 1));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) m[i * (n + 1) + j] = a(i, j);
    m[i * (n + 1) + n] = b[i];
  }
  const double pivot_floor = rel_pivot_tol * std::max(1.0, a.max_abs());

  for (std::size_t col = 0; col < n; ++col) {
    std::size_t pivot = col;
    for (std::size_t r = col + 1; r < n; ++r)
      if (std::abs(m[r * (n + 1) + col]) > std::abs(m[pivot * (n + 1) + col]))
        pivot = r;
    if (std::abs(m[pivot * (n + 1) + col]) <= pivot_floor) return std::nullopt;
    if (pivot != col)
      for (std::size_t j = col; j <= n; ++j)
        std::swap(m[pivot * (n + 1) + j], m[col * (n + 1) + j]);
    for (std::size_t r = col + 1; r < n; ++r) {
      const double f = m[r * (n + 1) + col] / m[col * (n + 1) + col];
      for (std::size_t j = col; j <= n; ++j)
        m[r * (n + 1) + j] -= f * m[col * (n + 1) + j];
    }
  }

  Vector x(n);
  for (std::size_t i = n; i-- > 0;) {
    double s = m[i * (n + 1) + n];
    for (std::size_t j = i + 1; j < n; ++j) s -= m[i * (n + 1) + j] * x[j];
    x[i] = s / m[i * (n + 1) + i];
  }
  return x;
}

}  // namespace descent

#ifndef GPCPD_MATCORE_HPP
#define GPCPD_MATCORE_HPP

/** @file
 *
 * Dense symmetric linear algebra used by the GP models and the likelihood
 * ratio tests: jittered Cholesky, log-determinants, solves, quadratic forms
 * and symmetric spectra. Storage is Eigen's dense column-major matrix.
 */

#include <gpcpd/error.hpp>

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <Eigen/Eigenvalues>

#include <array>
#include <cmath>
#include <span>
#include <string>
#include <vector>

namespace gpcpd {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

inline Vector to_vector(std::span<const double> values) {
  return Eigen::Map<const Vector>(values.data(), static_cast<Eigen::Index>(values.size()));
}

/// Square matrix whose (i,j) and (j,i) entries are bitwise equal.
class SymMatrix {
 public:
  SymMatrix() = default;

  /// Accepts a numerically symmetric square matrix and averages the two
  /// triangles so that symmetry holds exactly.
  explicit SymMatrix(Matrix m) : m_(std::move(m)) {
    if (m_.rows() != m_.cols()) {
      throw DimensionMismatch("symmetric matrix must be square, got " + std::to_string(m_.rows()) +
                              "x" + std::to_string(m_.cols()));
    }
    if (m_.rows() < 1) throw ValidationError("symmetric matrix must have order >= 1");
    const double scale = std::max(1.0, m_.cwiseAbs().maxCoeff());
    const double asym = (m_ - m_.transpose()).cwiseAbs().maxCoeff();
    if (!(asym <= 1e-8 * scale)) {
      throw ValidationError("matrix is not symmetric (max |a_ij - a_ji| = " + std::to_string(asym) + ")");
    }
    for (Eigen::Index j = 0; j < m_.cols(); ++j) {
      for (Eigen::Index i = j + 1; i < m_.rows(); ++i) {
        const double v = 0.5 * (m_(i, j) + m_(j, i));
        m_(i, j) = v;
        m_(j, i) = v;
      }
    }
  }

  static SymMatrix identity(Eigen::Index n) { return SymMatrix(Matrix::Identity(n, n)); }

  static SymMatrix diagonal(std::span<const double> d) {
    return SymMatrix(Matrix(to_vector(d).asDiagonal()));
  }

  Eigen::Index order() const noexcept { return m_.rows(); }
  double operator()(Eigen::Index i, Eigen::Index j) const { return m_(i, j); }
  const Matrix& dense() const noexcept { return m_; }
  double trace() const { return m_.trace(); }

 private:
  Matrix m_;
};

/// Lower Cholesky factor of a (possibly jittered) SPD matrix.
class SpdFactorization {
 public:
  SpdFactorization(Matrix lower, double jitter) : lower_(std::move(lower)), jitter_(jitter) {}

  Eigen::Index order() const noexcept { return lower_.rows(); }
  const Matrix& lower() const noexcept { return lower_; }
  double jitter_applied() const noexcept { return jitter_; }

  auto triangular() const { return lower_.triangularView<Eigen::Lower>(); }

 private:
  Matrix lower_;
  double jitter_;
};

/// Multipliers of the base jitter 1e-10 * tr(m) / n, tried in order.
inline constexpr std::array<double, 4> kJitterLadder{1.0, 10.0, 100.0, 1000.0};

namespace detail {

inline bool try_llt(const Matrix& m, Matrix& out) {
  Eigen::LLT<Matrix> llt(m);
  if (llt.info() != Eigen::Success) return false;
  out = llt.matrixL();
  for (Eigen::Index i = 0; i < out.rows(); ++i) {
    if (!(out(i, i) > 0.0) || !std::isfinite(out(i, i))) return false;
  }
  return true;
}

}  // namespace detail

inline SpdFactorization cholesky(const SymMatrix& m) {
  Matrix lower;
  if (detail::try_llt(m.dense(), lower)) return {std::move(lower), 0.0};

  const auto n = m.order();
  const double base = 1e-10 * std::abs(m.trace()) / static_cast<double>(n);
  for (double mult : kJitterLadder) {
    const double jitter = base * mult;
    if (!(jitter > 0.0)) break;
    Matrix shifted = m.dense();
    shifted.diagonal().array() += jitter;
    if (detail::try_llt(shifted, lower)) return {std::move(lower), jitter};
  }
  throw NotPositiveDefinite("Cholesky failed for order " + std::to_string(n) +
                            " after the full jitter ladder");
}

inline double log_det(const SpdFactorization& f) {
  return 2.0 * f.lower().diagonal().array().log().sum();
}

/// Forward substitution L^{-1} b.
inline Vector whiten(const SpdFactorization& f, const Vector& b) {
  if (b.size() != f.order()) {
    throw DimensionMismatch("rhs length " + std::to_string(b.size()) + " vs order " +
                            std::to_string(f.order()));
  }
  return f.triangular().solve(b);
}

inline Vector solve(const SpdFactorization& f, const Vector& b) {
  Vector z = whiten(f, b);
  return f.lower().transpose().triangularView<Eigen::Upper>().solve(z);
}

inline Matrix solve(const SpdFactorization& f, const Matrix& b) {
  if (b.rows() != f.order()) throw DimensionMismatch("rhs rows do not match factor order");
  Matrix z = f.triangular().solve(b);
  return f.lower().transpose().triangularView<Eigen::Upper>().solve(z);
}

inline double quad_form(const SpdFactorization& f, const Vector& x) {
  return whiten(f, x).squaredNorm();
}

inline Matrix inverse(const SpdFactorization& f) {
  return solve(f, Matrix(Matrix::Identity(f.order(), f.order())));
}

/// Ascending eigenvalues. Eigen tridiagonalizes and runs implicit symmetric QL/QR
/// with a cap of 30 sweeps per unknown.
inline std::vector<double> sym_eigenvalues(const SymMatrix& m) {
  Eigen::SelfAdjointEigenSolver<Matrix> solver(m.dense(), Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success) {
    throw ConvergenceFailure("symmetric eigenvalue iteration exceeded 30n sweeps");
  }
  const Vector& ev = solver.eigenvalues();
  return {ev.data(), ev.data() + ev.size()};
}

inline double min_eigenvalue(const SymMatrix& m) { return sym_eigenvalues(m).front(); }

}  // namespace gpcpd

#endif

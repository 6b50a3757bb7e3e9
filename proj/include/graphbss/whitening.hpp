#pragma once

#include <Eigen/Dense>
#include <string>

#include "graphbss/adjacency.hpp"
#include "graphbss/errors.hpp"

namespace graphbss {

namespace detail {

inline void require_symmetric(const Matrix& s, const char* what, double tol = 1e-10) {
  if (s.rows() != s.cols()) throw ParameterError(std::string(what) + ": matrix must be square");
  const double scale = std::max(1.0, s.cwiseAbs().maxCoeff());
  if ((s - s.transpose()).cwiseAbs().maxCoeff() > tol * scale)
    throw ParameterError(std::string(what) + ": matrix must be symmetric");
}

inline Matrix symmetric_power(const Matrix& s, double exponent, double rel_floor,
                              const char* what) {
  require_symmetric(s, what);
  Eigen::SelfAdjointEigenSolver<Matrix> eig(0.5 * (s + s.transpose()));
  if (eig.info() != Eigen::Success)
    throw NumericalError(std::string(what) + ": eigendecomposition failed");
  const Vector& lam = eig.eigenvalues();
  const double lmax = lam.maxCoeff();
  const double lmin = lam.minCoeff();
  if (!(lmax > 0.0) || lmin <= rel_floor * lmax)
    throw WhiteningError(std::string(what) + ": matrix numerically singular (eigenvalue " +
                             std::to_string(lmin) + ")",
                         lmin);
  Vector d(lam.size());
  for (Eigen::Index i = 0; i < lam.size(); ++i) d(i) = std::pow(lam(i), exponent);
  return eig.eigenvectors() * d.asDiagonal() * eig.eigenvectors().transpose();
}

}  // namespace detail

/** S^(-1/2) for symmetric positive definite S; throws WhiteningError when the
 *  smallest eigenvalue falls at or below rel_floor times the largest. */
inline Matrix symmetric_inverse_sqrt(const Matrix& s, double rel_floor = 1e-12) {
  return detail::symmetric_power(s, -0.5, rel_floor, "symmetric_inverse_sqrt");
}

/** S^(1/2) under the same conditioning contract. */
inline Matrix symmetric_sqrt(const Matrix& s, double rel_floor = 1e-12) {
  return detail::symmetric_power(s, 0.5, rel_floor, "symmetric_sqrt");
}

struct WhitenResult {
  Matrix xt;        // whitened data, P x N
  Matrix whitener;  // Ŝ0^(-1/2)
  Matrix s0;        // sample covariance XXᵀ/N
};

/** Whitens rows of X with the sample covariance: X̃ = Ŝ0^(-1/2) X. */
inline WhitenResult whiten(const Matrix& x) {
  if (x.rows() < 1 || x.cols() < 2) throw ParameterError("whiten requires a P x N matrix, N >= 2");
  if (!x.allFinite()) throw ParameterError("whiten requires finite data");
  WhitenResult out;
  out.s0 = (x * x.transpose()) / static_cast<double>(x.cols());
  out.whitener = symmetric_inverse_sqrt(out.s0);
  out.xt = out.whitener * x;
  return out;
}

/**
 * Symmetric orthogonalization U ← (UUᵀ)^(-1/2) U, the orthogonal polar factor.
 * Throws when U is numerically rank deficient, reporting the smallest
 * singular value in the message.
 */
inline Matrix symmetric_orthogonalize(const Matrix& u) {
  if (u.rows() != u.cols()) throw ParameterError("symmetric_orthogonalize requires a square matrix");
  if (!u.allFinite()) throw ParameterError("symmetric_orthogonalize requires finite entries");
  Eigen::SelfAdjointEigenSolver<Matrix> eig(u * u.transpose());
  if (eig.info() != Eigen::Success)
    throw NumericalError("symmetric_orthogonalize: eigendecomposition failed");
  const Vector& lam = eig.eigenvalues();
  const double smax = std::sqrt(std::max(0.0, lam.maxCoeff()));
  const double smin = lam.minCoeff() > 0.0 ? std::sqrt(lam.minCoeff()) : 0.0;
  if (smin <= 1e-12 * smax)
    throw NumericalError("symmetric_orthogonalize: rank deficient input (singular value " +
                         std::to_string(smin) + ")");
  Vector d(lam.size());
  for (Eigen::Index i = 0; i < lam.size(); ++i) d(i) = 1.0 / std::sqrt(lam(i));
  return eig.eigenvectors() * d.asDiagonal() * eig.eigenvectors().transpose() * u;
}

}  // namespace graphbss

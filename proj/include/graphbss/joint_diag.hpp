#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <vector>

#include "graphbss/whitening.hpp"

namespace graphbss {

struct JointDiagOptions {
  double tol = 1e-10;   // convergence when the largest sweep angle drops below this
  int max_sweeps = 200;
};

struct JointDiagResult {
  Matrix u;                          // orthogonal; rows are the recovered directions
  bool converged = false;
  int sweeps = 0;
  double last_max_angle = 0.0;
  std::vector<double> offdiag_trace;  // off-diagonal energy, entry 0 before any sweep
};

namespace detail {

inline double offdiag_energy(const std::vector<Matrix>& mats) {
  double e = 0.0;
  for (const Matrix& m : mats) e += m.squaredNorm() - m.diagonal().squaredNorm();
  return e;
}

}  // namespace detail

/**
 * Orthogonal approximate joint diagonalization by cyclic Givens sweeps.
 *
 * Maximizes Σ_m ‖diag(U A_m Uᵀ)‖² over orthogonal U starting from U = I.
 * For each index pair the optimal plane rotation has the closed form of the
 * leading eigenvector of the 2x2 accumulator built from (a_ii - a_jj,
 * a_ij + a_ji); every rotation therefore never decreases the objective, which
 * makes the off-diagonal energy non-increasing sweep over sweep.
 *
 * Inputs must be square, of one common size, and symmetric within 1e-10
 * relative; they are symmetrized exactly before the sweeps.
 */
inline JointDiagResult joint_diagonalize(std::vector<Matrix> mats,
                                         const JointDiagOptions& opts = {}) {
  if (mats.empty()) throw ParameterError("joint_diagonalize requires at least one matrix");
  const Eigen::Index p = mats.front().rows();
  for (const Matrix& m : mats) {
    if (m.rows() != p || m.cols() != p)
      throw ParameterError("joint_diagonalize requires matrices of one common square size");
    detail::require_symmetric(m, "joint_diagonalize");
  }
  if (!(opts.tol > 0.0)) throw ParameterError("joint_diagonalize requires tol > 0");
  if (opts.max_sweeps < 1) throw ParameterError("joint_diagonalize requires max_sweeps >= 1");
  for (Matrix& m : mats) m = 0.5 * (m + m.transpose()).eval();

  JointDiagResult res;
  res.u = Matrix::Identity(p, p);
  res.offdiag_trace.push_back(detail::offdiag_energy(mats));

  for (int sweep = 0; sweep < opts.max_sweeps; ++sweep) {
    double max_angle = 0.0;
    for (Eigen::Index i = 0; i + 1 < p; ++i) {
      for (Eigen::Index j = i + 1; j < p; ++j) {
        // 2x2 accumulator over the matrix set.
        double g11 = 0.0, g12 = 0.0, g22 = 0.0;
        for (const Matrix& m : mats) {
          const double pd = m(i, i) - m(j, j);
          const double q = m(i, j) + m(j, i);
          g11 += pd * pd;
          g12 += pd * q;
          g22 += q * q;
        }
        const double d = g11 - g22;
        const double t = std::hypot(d, 2.0 * g12);
        if (t == 0.0) continue;  // isotropic accumulator: no rotation helps
        const double vx = d + t;
        const double vy = 2.0 * g12;
        const double r = std::hypot(vx, vy);
        double c, s, angle;
        if (r == 0.0) {
          // d < 0 with exactly zero coupling: a 45-degree rotation is optimal.
          c = s = M_SQRT1_2;
          angle = M_PI / 4.0;
        } else {
          const double c2 = vx / r;  // cos 2θ >= 0, so |θ| <= π/4
          const double s2 = vy / r;
          c = std::sqrt(0.5 * (1.0 + c2));
          s = s2 / (2.0 * c);
          angle = 0.5 * std::abs(std::atan2(s2, c2));
        }
        max_angle = std::max(max_angle, angle);
        if (angle == 0.0) continue;
        for (Matrix& m : mats) {
          const Vector ri = m.row(i), rj = m.row(j);
          m.row(i) = c * ri + s * rj;
          m.row(j) = -s * ri + c * rj;
          const Vector ci = m.col(i), cj = m.col(j);
          m.col(i) = c * ci + s * cj;
          m.col(j) = -s * ci + c * cj;
        }
        const Vector ui = res.u.row(i), uj = res.u.row(j);
        res.u.row(i) = c * ui + s * uj;
        res.u.row(j) = -s * ui + c * uj;
      }
    }
    ++res.sweeps;
    res.last_max_angle = max_angle;
    res.offdiag_trace.push_back(detail::offdiag_energy(mats));
    if (max_angle < opts.tol) {
      res.converged = true;
      break;
    }
  }
  return res;
}

}  // namespace graphbss

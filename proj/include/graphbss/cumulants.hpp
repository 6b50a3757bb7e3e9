#pragma once

#include <vector>

#include "graphbss/adjacency.hpp"
#include "graphbss/errors.hpp"

namespace graphbss {

/**
 * Fourth-order cumulant matrices of whitened data, one per ordered index
 * pair (k, l), row-major in k then l (P² matrices in total):
 *
 *   Ĉ^{k,l} = (1/N) Σ_i x̃_ki x̃_li x̃_i x̃_iᵀ - E^{k,l} - E^{l,k} - tr(E^{k,l}) I
 *
 * with E^{k,l} = e_k e_lᵀ. The caller is expected to pass whitened rows;
 * the correction terms assume unit sample covariance.
 */
inline std::vector<Matrix> jade_cumulants(const Matrix& xt) {
  const Eigen::Index p = xt.rows();
  const Eigen::Index n = xt.cols();
  if (p < 1 || n < 1) throw ParameterError("jade_cumulants requires a non-empty data matrix");
  if (!xt.allFinite()) throw ParameterError("jade_cumulants requires finite data");

  std::vector<Matrix> out;
  out.reserve(static_cast<std::size_t>(p * p));
  const double inv_n = 1.0 / static_cast<double>(n);
  for (Eigen::Index k = 0; k < p; ++k) {
    for (Eigen::Index l = 0; l < p; ++l) {
      const Vector w = xt.row(k).cwiseProduct(xt.row(l)).transpose();
      Matrix c = inv_n * (xt * w.asDiagonal() * xt.transpose());
      c(k, l) -= 1.0;
      c(l, k) -= 1.0;
      if (k == l) c.diagonal().array() -= 1.0;
      out.push_back(0.5 * (c + c.transpose()).eval());
    }
  }
  return out;
}

}  // namespace graphbss

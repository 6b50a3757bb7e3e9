#pragma once

#include <Eigen/QR>
#include <Eigen/SVD>
#include <cmath>
#include <memory>

#include "graphbss/adjacency.hpp"
#include "graphbss/graph_generators.hpp"
#include "graphbss/rng.hpp"

namespace testutil {

using graphbss::AdjacencyMatrix;
using graphbss::Matrix;
using graphbss::RandomStream;
using graphbss::Vector;

inline Matrix random_matrix(int rows, int cols, RandomStream& rng) {
  Matrix m(rows, cols);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) m(r, c) = rng.gaussian();
  return m;
}

inline Matrix random_orthogonal(int p, RandomStream& rng) {
  const Matrix m = random_matrix(p, p, rng);
  Eigen::HouseholderQR<Matrix> qr(m);
  Matrix q = qr.householderQ();
  const Matrix r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (int i = 0; i < p; ++i)
    if (r(i, i) < 0) q.col(i) = -q.col(i);
  return q;
}

/** Random square matrix resampled until its condition number is moderate. */
inline Matrix random_mixing(int p, RandomStream& rng, double max_cond = 50.0) {
  for (int attempt = 0; attempt < 100; ++attempt) {
    const Matrix m = random_matrix(p, p, rng);
    Eigen::JacobiSVD<Matrix> svd(m);
    const double cond = svd.singularValues()(0) / svd.singularValues()(p - 1);
    if (cond < max_cond) return m;
  }
  return Matrix::Identity(p, p);
}

inline bool is_signed_permutation(const Matrix& m, double tol) {
  const int p = static_cast<int>(m.rows());
  if (m.cols() != p) return false;
  std::vector<bool> used(static_cast<std::size_t>(p), false);
  for (int r = 0; r < p; ++r) {
    int hits = 0;
    int col = -1;
    for (int c = 0; c < p; ++c) {
      const double a = std::abs(m(r, c));
      if (a > 1.0 + tol) return false;
      if (a > 1.0 - tol) {
        ++hits;
        col = c;
      } else if (a > tol) {
        return false;
      }
    }
    if (hits != 1 || used[static_cast<std::size_t>(col)]) return false;
    used[static_cast<std::size_t>(col)] = true;
  }
  return true;
}

inline std::shared_ptr<const AdjacencyMatrix> make_er(int n, double eps, RandomStream& rng) {
  return std::make_shared<AdjacencyMatrix>(graphbss::erdos_renyi(n, eps, rng));
}

}  // namespace testutil

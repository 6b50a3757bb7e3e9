#pragma once

#include <cmath>
#include <vector>

#include "graphbss/adjacency.hpp"
#include "graphbss/rng.hpp"

namespace graphbss {

// All generators are deterministic functions of (parameters, stream state):
// edges are decided in row-major upper-triangle order, one draw per pair, so
// a stream with the same key reproduces the same graph bit for bit.

/** Erdős–Rényi graph: every pair independently an edge with probability eps. */
inline AdjacencyMatrix erdos_renyi(int n, double eps, RandomStream& rng) {
  if (n < 1) throw ParameterError("erdos_renyi requires n >= 1");
  if (eps < 0.0 || eps > 1.0) throw ParameterError("erdos_renyi requires eps in [0,1]");
  Matrix w = Matrix::Zero(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      if (rng.bernoulli(eps)) {
        w(i, j) = 1.0;
        w(j, i) = 1.0;
      }
  return AdjacencyMatrix(std::move(w));
}

/**
 * Two-community stochastic block model with an even n/2 + n/2 split:
 * within-community pairs connect with p_in, across with p_out.
 */
inline AdjacencyMatrix sbm_two_block(int n, double p_in, double p_out, RandomStream& rng) {
  if (n < 2 || n % 2 != 0) throw ParameterError("sbm_two_block requires even n >= 2");
  if (p_in < 0.0 || p_in > 1.0 || p_out < 0.0 || p_out > 1.0)
    throw ParameterError("sbm_two_block requires probabilities in [0,1]");
  const int half = n / 2;
  Matrix w = Matrix::Zero(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      const bool same = (i < half) == (j < half);
      if (rng.bernoulli(same ? p_in : p_out)) {
        w(i, j) = 1.0;
        w(j, i) = 1.0;
      }
    }
  return AdjacencyMatrix(std::move(w));
}

/**
 * Random geometric graph: n points uniform on the unit square, edge iff
 * Euclidean distance strictly below radius. Point p draws (x_p, y_p) in order.
 */
inline AdjacencyMatrix geometric_graph(int n, double radius, RandomStream& rng) {
  if (n < 1) throw ParameterError("geometric_graph requires n >= 1");
  if (!(radius > 0.0)) throw ParameterError("geometric_graph requires radius > 0");
  std::vector<double> x(n), y(n);
  for (int i = 0; i < n; ++i) {
    x[i] = rng.uniform01();
    y[i] = rng.uniform01();
  }
  const double r2 = radius * radius;
  Matrix w = Matrix::Zero(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      const double dx = x[i] - x[j];
      const double dy = y[i] - y[j];
      if (dx * dx + dy * dy < r2) {
        w(i, j) = 1.0;
        w(j, i) = 1.0;
      }
    }
  return AdjacencyMatrix(std::move(w));
}

/**
 * Graph error model: each existing edge is deleted with probability eps1,
 * each absent pair becomes an edge with probability eps2. Decisions are made
 * on the upper triangle and mirrored; the diagonal stays zero.
 */
inline AdjacencyMatrix graph_error(const AdjacencyMatrix& w0, double eps1, double eps2,
                                   RandomStream& rng) {
  if (eps1 < 0.0 || eps1 > 1.0 || eps2 < 0.0 || eps2 > 1.0)
    throw ParameterError("graph_error requires probabilities in [0,1]");
  const int n = w0.n();
  Matrix w = w0.matrix();
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      const bool edge = w(i, j) == 1.0;
      const bool flip = rng.bernoulli(edge ? eps1 : eps2);
      const double v = edge == flip ? 0.0 : 1.0;
      w(i, j) = v;
      w(j, i) = v;
    }
  return AdjacencyMatrix(std::move(w));
}

}  // namespace graphbss

#pragma once

#include <memory>
#include <vector>

#include "graphbss/adjacency.hpp"
#include "graphbss/whitening.hpp"

namespace graphbss {

/** Ordered collection of graphs with per-graph maximum moment order K. */
struct GraphSet {
  struct Entry {
    std::shared_ptr<const AdjacencyMatrix> graph;
    int max_power = 1;
  };

  std::vector<Entry> entries;

  void validate() const {
    if (entries.empty()) throw ParameterError("GraphSet must hold at least one graph");
    int n = -1;
    for (const auto& e : entries) {
      if (!e.graph) throw ParameterError("GraphSet entry missing a graph");
      if (e.max_power < 1) throw ParameterError("GraphSet max_power must be >= 1");
      if (n < 0) n = e.graph->n();
      if (e.graph->n() != n) throw ParameterError("GraphSet graphs must share one node count");
    }
  }

  int n() const {
    validate();
    return entries.front().graph->n();
  }

  int total_matrices() const {
    validate();
    int total = 0;
    for (const auto& e : entries) total += e.max_power;
    return total;
  }
};

/** Lag-k graph autocovariance (X̃ W^k X̃ᵀ)/(N-k), symmetrized. */
inline Matrix graph_autocovariance(const Matrix& xt, const Matrix& wk, int k) {
  const Eigen::Index n = xt.cols();
  if (wk.rows() != n || wk.cols() != n)
    throw ParameterError("graph_autocovariance: graph power size must match sample count");
  if (k < 1 || k >= n) throw ParameterError("graph_autocovariance requires 1 <= k < N");
  Matrix m = (xt * wk * xt.transpose()) / static_cast<double>(n - k);
  return 0.5 * (m + m.transpose()).eval();
}

/**
 * Scale-free graph autocorrelation P·X̃ W^k X̃ᵀ / ‖W^k X̃ᵀ‖_F, symmetrized.
 * Invariant under positive rescaling of the graph matrix; throws when the
 * graph moment vanishes (e.g. an edgeless graph).
 */
inline Matrix graph_autocorrelation(const Matrix& xt, const Matrix& wk) {
  const Eigen::Index n = xt.cols();
  if (wk.rows() != n || wk.cols() != n)
    throw ParameterError("graph_autocorrelation: graph power size must match sample count");
  const Matrix bt = wk * xt.transpose();  // W^k X̃ᵀ, N x P
  const double denom = bt.norm();
  if (denom == 0.0)
    throw DegenerateGraphError("graph_autocorrelation: W^k X̃ᵀ vanished (degenerate graph)");
  Matrix m = static_cast<double>(xt.rows()) * (xt * bt) / denom;
  return 0.5 * (m + m.transpose()).eval();
}

inline Matrix graph_autocorrelation(const Matrix& xt, const AdjacencyMatrix& w, int k) {
  return graph_autocorrelation(xt, w.power(k));
}

/** All autocorrelation matrices of the set, graphs in order, k = 1..K within. */
inline std::vector<Matrix> autocorrelation_set(const Matrix& xt, const GraphSet& graphs) {
  graphs.validate();
  if (graphs.n() != xt.cols())
    throw ParameterError("autocorrelation_set: graph node count must match sample count");
  std::vector<Matrix> out;
  out.reserve(static_cast<std::size_t>(graphs.total_matrices()));
  for (const auto& e : graphs.entries)
    for (int k = 1; k <= e.max_power; ++k)
      out.push_back(graph_autocorrelation(xt, e.graph->power(k)));
  return out;
}

}  // namespace graphbss

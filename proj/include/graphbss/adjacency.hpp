#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <deque>
#include <fstream>
#include <mutex>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "graphbss/errors.hpp"

namespace graphbss {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/**
 * Simple undirected graph held as a dense 0/1 adjacency matrix.
 *
 * Invariants enforced at construction: square, symmetric, zero diagonal,
 * entries exactly 0 or 1. Matrix powers W^k are cached on first use; their
 * entries count k-step walks and remain exact integers in double precision
 * for every size this toolkit touches (counts stay far below 2^53).
 */
class AdjacencyMatrix {
 public:
  explicit AdjacencyMatrix(Matrix w) : w_(std::move(w)) { validate(w_); }

  AdjacencyMatrix(const AdjacencyMatrix& other) : w_(other.w_) {
    std::lock_guard<std::mutex> lock(other.mu_);
    powers_ = other.powers_;
  }

  AdjacencyMatrix& operator=(const AdjacencyMatrix& other) {
    if (this != &other) {
      std::scoped_lock lock(mu_, other.mu_);
      w_ = other.w_;
      powers_ = other.powers_;
    }
    return *this;
  }

  int n() const { return static_cast<int>(w_.rows()); }

  const Matrix& matrix() const { return w_; }

  /**
   * W^k for k >= 1 by repeated exact multiplication, cached per instance.
   * k = 0 is a parameter error: the identity carries no graph structure and
   * asking for it is invariably a caller bug.
   */
  const Matrix& power(int k) const {
    if (k < 1) throw ParameterError("adjacency power requires k >= 1");
    std::lock_guard<std::mutex> lock(mu_);
    while (static_cast<int>(powers_.size()) < k - 1) {
      const Matrix& prev = powers_.empty() ? w_ : powers_.back();
      powers_.push_back(prev * w_);
    }
    return k == 1 ? w_ : powers_[static_cast<std::size_t>(k - 2)];
  }

  long edge_count() const {
    return static_cast<long>(w_.sum() / 2.0 + 0.5);
  }

  bool same_as(const AdjacencyMatrix& other) const {
    return w_.rows() == other.w_.rows() && w_ == other.w_;
  }

  /** Sorted `u v` pairs (u < v), preceded by a `# nodes: n` header so that
   *  isolated vertices survive a round trip. */
  void save_edge_list(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw ParameterError("cannot open graph file for writing: " + path);
    out << "# nodes: " << n() << "\n";
    for (int i = 0; i < n(); ++i)
      for (int j = i + 1; j < n(); ++j)
        if (w_(i, j) == 1.0) out << i << " " << j << "\n";
    if (!out) throw ParameterError("failed writing graph file: " + path);
  }

  static AdjacencyMatrix load_edge_list(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParameterError("cannot open graph file: " + path);
    std::vector<std::pair<long, long>> edges;
    long n_declared = -1;
    long max_index = -1;
    std::string line;
    long lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (line.empty()) continue;
      if (line[0] == '#') {
        std::istringstream hs(line.substr(1));
        std::string word;
        if (hs >> word && word == "nodes:" && hs >> n_declared) continue;
        continue;  // other comments ignored
      }
      std::istringstream ls(line);
      long u, v;
      if (!(ls >> u >> v)) {
        throw ParameterError("malformed edge at " + path + ":" + std::to_string(lineno));
      }
      if (u < 0 || v < 0) {
        throw ParameterError("negative node index at " + path + ":" + std::to_string(lineno));
      }
      if (u == v) {
        throw ParameterError("self-loop at " + path + ":" + std::to_string(lineno));
      }
      edges.emplace_back(u, v);
      max_index = std::max(max_index, std::max(u, v));
    }
    const long n = n_declared >= 0 ? n_declared : max_index + 1;
    if (n <= 0) throw ParameterError("graph file declares no nodes: " + path);
    if (max_index >= n) {
      throw ParameterError("edge index exceeds declared node count in " + path);
    }
    Matrix w = Matrix::Zero(n, n);
    for (const auto& [u, v] : edges) {
      w(u, v) = 1.0;
      w(v, u) = 1.0;
    }
    return AdjacencyMatrix(std::move(w));
  }

 private:
  static void validate(const Matrix& w) {
    if (w.rows() != w.cols()) throw ParameterError("adjacency matrix must be square");
    if (w.rows() < 1) throw ParameterError("adjacency matrix must be non-empty");
    for (Eigen::Index i = 0; i < w.rows(); ++i) {
      if (w(i, i) != 0.0) throw ParameterError("adjacency matrix must have zero diagonal");
      for (Eigen::Index j = 0; j < w.cols(); ++j) {
        const double v = w(i, j);
        if (v != 0.0 && v != 1.0) throw ParameterError("adjacency entries must be 0 or 1");
        if (v != w(j, i)) throw ParameterError("adjacency matrix must be symmetric");
      }
    }
  }

  Matrix w_;
  mutable std::deque<Matrix> powers_;  // powers_[i] = W^(i+2); deque keeps refs stable
  mutable std::mutex mu_;
};

}  // namespace graphbss

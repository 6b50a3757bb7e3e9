#pragma once

#include <Eigen/Dense>
#include <vector>

#include "graphbss/gma.hpp"

namespace graphbss {

/**
 * A complete data-generating setup: P graph moving-average sources of common
 * length N and a mixing matrix Ω. Columns of the data matrix are node
 * samples, rows are components.
 */
struct Scenario {
  int p = 0;
  int n = 0;
  std::vector<GmaSpec> sources;
  Matrix omega;

  void validate() const {
    if (p < 2) throw ParameterError("Scenario requires at least two sources");
    if (static_cast<int>(sources.size()) != p)
      throw ParameterError("Scenario source count must equal p");
    for (const auto& s : sources) {
      s.validate();
      if (s.graph->n() != n) throw ParameterError("Scenario graphs must all have n nodes");
    }
    if (omega.rows() != p || omega.cols() != p)
      throw ParameterError("Scenario mixing matrix must be p x p");
    if (!omega.allFinite()) throw ParameterError("Scenario mixing matrix must be finite");
    Eigen::JacobiSVD<Matrix> svd(omega);
    const double smin = svd.singularValues().minCoeff();
    const double smax = svd.singularValues().maxCoeff();
    if (smin == 0.0 || smax / smin > 1e12)
      throw ParameterError("Scenario mixing matrix is singular or too ill-conditioned");
  }
};

struct MixResult {
  Matrix x;  // observed mixtures, p x n
  Matrix z;  // latent sources, p x n
};

/**
 * Draws all sources and mixes them: X = ΩZ in one multiplication. Source p
 * consumes the substream rep_stream.child(channel::sources + p), so adding
 * or reordering later channels cannot shift earlier sources.
 */
inline MixResult mix(const Scenario& scenario, const RandomStream& rep_stream) {
  scenario.validate();
  MixResult out;
  out.z.resize(scenario.p, scenario.n);
  for (int p = 0; p < scenario.p; ++p) {
    RandomStream src = rep_stream.child(channel::sources + static_cast<std::uint64_t>(p));
    out.z.row(p) = gma_generate(scenario.sources[static_cast<std::size_t>(p)], src).transpose();
  }
  out.x = scenario.omega * out.z;
  return out;
}

}  // namespace graphbss

#pragma once

#include <Eigen/Eigenvalues>
#include <cmath>
#include <limits>
#include <memory>
#include <optional>
#include <vector>

#include "graphbss/adjacency.hpp"
#include "graphbss/errors.hpp"
#include "graphbss/separators.hpp"
#include "graphbss/whitening.hpp"

namespace graphbss {

/**
 * Gaussian log-likelihood of a single first-order graph moving-average
 * source with trace-normalized variance. The graph is eigendecomposed once
 * so each (z, θ) evaluation costs O(N) after an O(N²) projection of z.
 */
class Gma1Likelihood {
 public:
  explicit Gma1Likelihood(const AdjacencyMatrix& w) : n_(w.n()) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(w.matrix());
    if (es.info() != Eigen::Success) throw NumericalError("graph eigendecomposition failed");
    eigenvalues_ = es.eigenvalues();
    basis_ = es.eigenvectors();
  }

  int n() const { return n_; }

  /** Coordinates of z in the graph eigenbasis. */
  Vector project(const Vector& z) const {
    if (z.size() != n_) throw ParameterError("likelihood: sample length must match node count");
    return basis_.transpose() * z;
  }

  /**
   * log p(z; θ) up to an additive constant, with z already projected.
   * det_factor scales the log-determinant penalty (0.5 is the exact
   * Gaussian value; 1.0 doubles the penalty).
   */
  double eval_projected(const Vector& zp, double theta, double det_factor = 0.5) const {
    if (zp.size() != n_) throw ParameterError("likelihood: projected length must match node count");
    if (!std::isfinite(theta)) throw ParameterError("likelihood: theta must be finite");
    double trace = 0.0;
    double logdet = 0.0;
    double quad = 0.0;
    for (int i = 0; i < n_; ++i) {
      const double a = 1.0 + theta * eigenvalues_[i];
      const double a2 = a * a;
      if (a2 < 1e-300) return -std::numeric_limits<double>::infinity();
      trace += a2;
      logdet += std::log(a2);
      quad += zp[i] * zp[i] / a2;
    }
    const double sigma2 = static_cast<double>(n_) / trace;
    return -0.5 * quad / sigma2 - det_factor * (n_ * std::log(sigma2) + logdet);
  }

  double log_likelihood(const Vector& z, double theta, double det_factor = 0.5) const {
    return eval_projected(project(z), theta, det_factor);
  }

 private:
  int n_;
  Vector eigenvalues_;
  Matrix basis_;
};

struct MlOptions {
  double det_factor = 0.5;
  int init_max_power = 1;             // graph moment order for the decorrelation init
  JointDiagOptions jd;                // settings for that init
  std::optional<Matrix> init_gamma;   // externally supplied initial unmixing (skips the init step)
  std::shared_ptr<const Gma1Likelihood> lik1;  // optional precomputed likelihoods
  std::shared_ptr<const Gma1Likelihood> lik2;
};

struct MlTwoSourcesResult {
  Matrix gamma;
  Matrix u;
  Matrix whitener;
  double theta1 = 0.0;
  double theta2 = 0.0;
  double phi = 0.0;
  double loglik = 0.0;
  bool theta1_at_boundary = false;
  bool theta2_at_boundary = false;
  bool phi_at_boundary = false;
  bool init_converged = true;
};

namespace detail {

struct GridArgmax {
  int index = -1;
  double value = -std::numeric_limits<double>::infinity();
  bool at_boundary = false;
};

template <typename F>
GridArgmax grid_argmax(const std::vector<double>& grid, F&& f) {
  GridArgmax best;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double v = f(grid[i]);
    if (best.index < 0 || v > best.value) {
      best.index = static_cast<int>(i);
      best.value = v;
    }
  }
  best.at_boundary =
      grid.size() > 1 && (best.index == 0 || best.index == static_cast<int>(grid.size()) - 1);
  return best;
}

inline void validate_grid(const std::vector<double>& grid, const char* what) {
  if (grid.empty()) throw ParameterError(std::string(what) + " grid must be non-empty");
  for (double v : grid)
    if (!std::isfinite(v)) throw ParameterError(std::string(what) + " grid must be finite");
}

}  // namespace detail

/**
 * Grid maximum-likelihood unmixing for two first-order graph moving-average
 * sources, each tied to its own graph. Pipeline: orthogonal initialization
 * (graph decorrelation, or a supplied Γ̂₀ mapped through the whitener),
 * per-source θ grid search on the initial rotation, then a one-angle grid
 * refinement of the rotation at the fitted θ's. A single-point θ grid
 * expresses a known filter parameter.
 */
inline MlTwoSourcesResult ml_two_sources(const Matrix& x, const AdjacencyMatrix& w1,
                                         const AdjacencyMatrix& w2,
                                         const std::vector<double>& theta_grid,
                                         const std::vector<double>& phi_grid,
                                         const MlOptions& opts = {}) {
  if (x.rows() != 2) throw ParameterError("ml_two_sources handles exactly two sources");
  if (w1.n() != x.cols() || w2.n() != x.cols())
    throw ParameterError("ml_two_sources: graph node count must match sample count");
  detail::validate_grid(theta_grid, "theta");
  detail::validate_grid(phi_grid, "phi");
  if (!(opts.det_factor > 0.0)) throw ParameterError("det_factor must be positive");

  const WhitenResult wh = whiten(x);

  MlTwoSourcesResult out;
  out.whitener = wh.whitener;

  Matrix u0;
  if (opts.init_gamma) {
    const Matrix& g0 = *opts.init_gamma;
    if (g0.rows() != 2 || g0.cols() != 2 || !g0.allFinite())
      throw ParameterError("init_gamma must be a finite 2x2 matrix");
    // Map the supplied unmixing into the whitened coordinates and take the
    // nearest orthogonal matrix.
    u0 = symmetric_orthogonalize(g0 * symmetric_sqrt(wh.s0));
    out.init_converged = true;
  } else {
    GraphSet gs;
    gs.entries.push_back({std::shared_ptr<const AdjacencyMatrix>(&w1, [](const AdjacencyMatrix*) {}),
                          opts.init_max_power});
    gs.entries.push_back({std::shared_ptr<const AdjacencyMatrix>(&w2, [](const AdjacencyMatrix*) {}),
                          opts.init_max_power});
    const SeparationResult init = grade(x, gs, opts.jd);
    u0 = init.u;
    out.init_converged = init.converged;
  }

  const Matrix z0 = u0 * wh.xt;

  std::shared_ptr<const Gma1Likelihood> lik1 =
      opts.lik1 ? opts.lik1 : std::make_shared<Gma1Likelihood>(w1);
  std::shared_ptr<const Gma1Likelihood> lik2 =
      opts.lik2 ? opts.lik2 : std::make_shared<Gma1Likelihood>(w2);
  if (lik1->n() != x.cols() || lik2->n() != x.cols())
    throw ParameterError("ml_two_sources: likelihood node count must match sample count");

  // Projections of both initial rows in both graph eigenbases; rotation
  // acts linearly on them, so the φ search needs no further O(N²) work.
  const Vector zp11 = lik1->project(z0.row(0).transpose());
  const Vector zp21 = lik1->project(z0.row(1).transpose());
  const Vector zp12 = lik2->project(z0.row(0).transpose());
  const Vector zp22 = lik2->project(z0.row(1).transpose());

  const double df = opts.det_factor;
  const auto fit1 = detail::grid_argmax(
      theta_grid, [&](double th) { return lik1->eval_projected(zp11, th, df); });
  const auto fit2 = detail::grid_argmax(
      theta_grid, [&](double th) { return lik2->eval_projected(zp22, th, df); });
  if (!std::isfinite(fit1.value) || !std::isfinite(fit2.value))
    throw DegenerateModelError("ml_two_sources: likelihood degenerate over the whole theta grid");
  out.theta1 = theta_grid[static_cast<std::size_t>(fit1.index)];
  out.theta2 = theta_grid[static_cast<std::size_t>(fit2.index)];
  out.theta1_at_boundary = fit1.at_boundary;
  out.theta2_at_boundary = fit2.at_boundary;

  const auto fit_phi = detail::grid_argmax(phi_grid, [&](double phi) {
    const double c = std::cos(phi);
    const double s = std::sin(phi);
    const Vector r1 = c * zp11 - s * zp21;
    const Vector r2 = s * zp12 + c * zp22;
    return lik1->eval_projected(r1, out.theta1, df) + lik2->eval_projected(r2, out.theta2, df);
  });
  if (!std::isfinite(fit_phi.value))
    throw DegenerateModelError("ml_two_sources: likelihood degenerate over the whole phi grid");
  out.phi = phi_grid[static_cast<std::size_t>(fit_phi.index)];
  out.phi_at_boundary = fit_phi.at_boundary;
  out.loglik = fit_phi.value;

  Matrix rot(2, 2);
  rot << std::cos(out.phi), -std::sin(out.phi), std::sin(out.phi), std::cos(out.phi);
  out.u = rot * u0;
  out.gamma = out.u * wh.whitener;
  return out;
}

/** Inclusive start:step:stop grid (stop included within a half-step slack). */
inline std::vector<double> make_grid(double start, double stop, double step) {
  if (!(step > 0.0)) throw ParameterError("grid step must be positive");
  if (stop < start) throw ParameterError("grid stop must be >= start");
  std::vector<double> grid;
  const int count = static_cast<int>(std::floor((stop - start) / step + 0.5)) + 1;
  grid.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    const double v = start + i * step;
    if (v > stop + 0.5 * step) break;
    grid.push_back(v);
  }
  if (grid.empty()) throw ParameterError("grid is empty");
  return grid;
}

}  // namespace graphbss

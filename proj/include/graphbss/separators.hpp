#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "graphbss/autocorrelation.hpp"
#include "graphbss/cumulants.hpp"
#include "graphbss/joint_diag.hpp"
#include "graphbss/nonlinearity.hpp"
#include "graphbss/rng.hpp"
#include "graphbss/whitening.hpp"

namespace graphbss {

/** Output of a separation run: Γ̂ recovers sources as Γ̂ X. */
struct SeparationResult {
  Matrix gamma;     // P x P unmixing estimate
  Matrix u;         // orthogonal factor acting on whitened data
  Matrix whitener;  // Ŝ₀^{-1/2}
  bool converged = false;
  int iterations = 0;                   // sweeps (joint diagonalization) or fixed-point iterations
  std::vector<double> objective_trace;  // contrast value per iteration, entry 0 at the start
  int restarts = 0;                     // random row restarts taken (fixed-point methods)
  // Realized magnitudes of the two weighted objective terms at the final U;
  // a balanced blend keeps them comparable.
  double objective_graph = 0.0;
  double objective_contrast = 0.0;
};

namespace detail {

/** Flip v in place so its largest-magnitude entry is positive (first tie wins). */
inline void flip_to_positive_max(Vector& v) {
  Eigen::Index idx = 0;
  double best = -1.0;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    const double a = std::abs(v[i]);
    if (a > best) {
      best = a;
      idx = i;
    }
  }
  if (v[idx] < 0.0) v = -v;
}

/** Fix row signs so each row's largest-magnitude entry is positive. */
inline Matrix canonical_row_signs(const Matrix& m) {
  Matrix out = m;
  for (Eigen::Index j = 0; j < out.rows(); ++j) {
    Vector row = out.row(j).transpose();
    flip_to_positive_max(row);
    out.row(j) = row.transpose();
  }
  return out;
}

/**
 * Shared rotation-based separation: joint diagonalization of a weighted
 * union of graph autocorrelation matrices (weight λ) and fourth-order
 * cumulant matrices (weight 1-λ). A family with zero weight is skipped
 * outright so the λ=0 and λ=1 edge cases run the exact single-family path.
 */
inline SeparationResult composite_jd_separate(const Matrix& x, const GraphSet* graphs,
                                              double lambda, const JointDiagOptions& opts) {
  if (!(lambda >= 0.0 && lambda <= 1.0))
    throw ParameterError("composite separation weight must lie in [0, 1]");
  if (lambda > 0.0 && graphs == nullptr)
    throw ParameterError("graph term requested but no graphs supplied");

  const WhitenResult wh = whiten(x);
  std::vector<Matrix> mats;
  std::size_t graph_count = 0;
  if (lambda > 0.0) {
    // Entries of P·X̃WᵏX̃ᵀ/‖WᵏX̃ᵀ‖ grow like ‖X̃‖_F = √(NP); dividing by that
    // norm makes entry (k,l) the correlation between row k and the graph-
    // filtered row l. The cumulant family below is dimensionless (entries are
    // kurtosis-sized), so this puts both families on O(1) scales and lambda
    // acts as a genuine blend weight. A common factor on a whole family never
    // moves the optimal rotation, so the lambda=1 special case is unchanged.
    const double corr_units = 1.0 / std::sqrt(static_cast<double>(wh.xt.rows()) *
                                              static_cast<double>(wh.xt.cols()));
    const double scale = ((lambda == 1.0) ? 1.0 : std::sqrt(lambda)) * corr_units;
    for (Matrix& s : autocorrelation_set(wh.xt, *graphs)) {
      s *= scale;
      mats.push_back(std::move(s));
    }
    graph_count = mats.size();
  }
  if (lambda < 1.0) {
    const double scale = (lambda == 0.0) ? 1.0 : std::sqrt(1.0 - lambda);
    for (Matrix& c : jade_cumulants(wh.xt)) {
      if (scale != 1.0) c *= scale;
      mats.push_back(std::move(c));
    }
  }

  double total = 0.0;
  for (const Matrix& m : mats) total += m.squaredNorm();

  const JointDiagResult jd = joint_diagonalize(mats, opts);

  SeparationResult out;
  out.u = canonical_row_signs(jd.u);
  out.whitener = wh.whitener;
  out.gamma = out.u * wh.whitener;
  out.converged = jd.converged;
  out.iterations = jd.sweeps;
  out.objective_trace.reserve(jd.offdiag_trace.size());
  // Total squared norm is rotation-invariant, so diagonal energy is the
  // complement of the tracked off-diagonal energy.
  for (double off : jd.offdiag_trace) out.objective_trace.push_back(total - off);
  out.restarts = 0;
  // Weighted per-family diagonal energies at the final rotation (the scale
  // factors are already folded into the matrices).
  for (std::size_t m = 0; m < mats.size(); ++m) {
    const double e = (out.u * mats[m] * out.u.transpose()).diagonal().squaredNorm();
    (m < graph_count ? out.objective_graph : out.objective_contrast) += e;
  }
  return out;
}

}  // namespace detail

/** Graph decorrelation: jointly diagonalize the graph autocorrelation set. */
inline SeparationResult grade(const Matrix& x, const GraphSet& graphs,
                              const JointDiagOptions& opts = {}) {
  return detail::composite_jd_separate(x, &graphs, 1.0, opts);
}

/** Fourth-order cumulant separation (no graph information). */
inline SeparationResult jade(const Matrix& x, const JointDiagOptions& opts = {}) {
  return detail::composite_jd_separate(x, nullptr, 0.0, opts);
}

/** Convex combination of the two joint-diagonalization families. */
inline SeparationResult graph_jade(const Matrix& x, const GraphSet& graphs, double lambda = 0.8,
                                   const JointDiagOptions& opts = {}) {
  graphs.validate();
  return detail::composite_jd_separate(x, lambda > 0.0 ? &graphs : nullptr, lambda, opts);
}

struct FastIcaOptions {
  double tol = 1e-9;
  int max_iter = 2000;
  int max_restarts_per_row = 5;
  RandomStream restarts{0};           // stream feeding degenerate-row restarts
  Nonlinearity nonlinearity = tanh_nonlinearity();
};

namespace detail {

struct FastIcaObjective {
  double graph = 0.0;     // λ · Σ_m ‖diag(U S̃_m Uᵀ)‖²
  double contrast = 0.0;  // (1-λ) · Σ_j (mean G(u_jᵀ x̃))²
  double total() const { return graph + contrast; }
};

inline FastIcaObjective fastica_objective(const Matrix& u, const Matrix& xt,
                                          const std::vector<Matrix>& s_set, double lambda,
                                          const Nonlinearity& nl) {
  FastIcaObjective f;
  if (lambda > 0.0) {
    double f1 = 0.0;
    for (const Matrix& s : s_set) {
      for (Eigen::Index j = 0; j < u.rows(); ++j) {
        const double d = u.row(j) * s * u.row(j).transpose();
        f1 += d * d;
      }
    }
    f.graph = lambda * f1;
  }
  if (lambda < 1.0) {
    double f2 = 0.0;
    const double inv_n = 1.0 / static_cast<double>(xt.cols());
    for (Eigen::Index j = 0; j < u.rows(); ++j) {
      const Vector y = xt.transpose() * u.row(j).transpose();
      double mean_g0 = 0.0;
      for (Eigen::Index i = 0; i < y.size(); ++i) mean_g0 += nl.g0(y[i]);
      const double centered = mean_g0 * inv_n - nl.gauss_mean;
      f2 += centered * centered;
    }
    f.contrast = (1.0 - lambda) * f2;
  }
  return f;
}

/**
 * Deflation-free fixed-point separation with symmetric orthogonalization.
 * Each row update sums a graph-autocorrelation term and a negentropy term,
 * with both parts and the sum sign-fixed so the two contributions cannot
 * cancel through an arbitrary sign. Rows whose update vanishes restart
 * from a seeded random direction a bounded number of times.
 */
inline SeparationResult fastica_core(const Matrix& x, const GraphSet* graphs, double lambda,
                                     const FastIcaOptions& opts) {
  if (!(lambda >= 0.0 && lambda <= 1.0))
    throw ParameterError("fastica weight must lie in [0, 1]");
  if (lambda > 0.0 && graphs == nullptr)
    throw ParameterError("graph term requested but no graphs supplied");
  if (!(opts.tol > 0.0)) throw ParameterError("fastica tol must be positive");
  if (opts.max_iter < 1) throw ParameterError("fastica max_iter must be >= 1");
  if (opts.max_restarts_per_row < 0) throw ParameterError("fastica restart budget must be >= 0");
  opts.nonlinearity.validate();

  const WhitenResult wh = whiten(x);
  const Eigen::Index p = wh.xt.rows();
  const Eigen::Index n = wh.xt.cols();
  const double inv_n = 1.0 / static_cast<double>(n);
  const Nonlinearity& nl = opts.nonlinearity;

  std::vector<Matrix> s_set;
  if (lambda > 0.0) {
    s_set = autocorrelation_set(wh.xt, *graphs);
    // Same correlation units as composite_jd_separate, so the graph term and
    // the negentropy term are comparable and lambda blends rather than drowns.
    const double corr_units =
        1.0 / std::sqrt(static_cast<double>(p) * static_cast<double>(n));
    for (Matrix& s : s_set) s *= corr_units;
  }

  RandomStream restart_stream = opts.restarts;
  std::vector<int> row_restarts(static_cast<std::size_t>(p), 0);

  SeparationResult out;
  out.whitener = wh.whitener;
  Matrix u = Matrix::Identity(p, p);
  out.objective_trace.push_back(fastica_objective(u, wh.xt, s_set, lambda, nl).total());

  bool stalled = false;
  for (int iter = 1; iter <= opts.max_iter && !stalled; ++iter) {
    Matrix u_new(p, p);
    for (Eigen::Index j = 0; j < p; ++j) {
      const Vector uj = u.row(j).transpose();
      Vector t1 = Vector::Zero(p);
      if (lambda > 0.0) {
        for (const Matrix& s : s_set) {
          const Vector v = s * uj;
          t1 += (uj.dot(v)) * v;
        }
        t1 *= 2.0 * lambda;
      }
      Vector t2 = Vector::Zero(p);
      if (lambda < 1.0) {
        const Vector y = wh.xt.transpose() * uj;
        double mean_g0 = 0.0;
        double mean_gp = 0.0;
        Vector gv(n);
        for (Eigen::Index i = 0; i < n; ++i) {
          const double yi = y[i];
          mean_g0 += nl.g0(yi);
          gv[i] = nl.g(yi);
          mean_gp += nl.gprime(yi);
        }
        mean_g0 = mean_g0 * inv_n - nl.gauss_mean;
        mean_gp *= inv_n;
        t2 = (1.0 - lambda) * mean_g0 * (inv_n * (wh.xt * gv) - mean_gp * uj);
      }
      flip_to_positive_max(t1);
      flip_to_positive_max(t2);
      Vector cand = t1 + t2;
      flip_to_positive_max(cand);
      if (!cand.allFinite() || cand.norm() < 1e-12) {
        if (row_restarts[static_cast<std::size_t>(j)] < opts.max_restarts_per_row) {
          ++row_restarts[static_cast<std::size_t>(j)];
          ++out.restarts;
          do {
            for (Eigen::Index i = 0; i < p; ++i) cand[i] = restart_stream.gaussian();
          } while (cand.norm() < 1e-12);
        } else {
          stalled = true;  // budget exhausted, stop honestly unconverged
          cand = uj;
        }
      }
      u_new.row(j) = cand.transpose();
    }
    if (stalled) break;

    Matrix u_orth;
    bool ok = false;
    for (int attempt = 0; attempt < 5 && !ok; ++attempt) {
      try {
        u_orth = symmetric_orthogonalize(u_new);
        ok = true;
      } catch (const NumericalError&) {
        // Rows collapsed onto a common direction; perturb and count a restart.
        ++out.restarts;
        const double scale = 1e-3 * std::max(u_new.norm(), 1.0);
        for (Eigen::Index r = 0; r < p; ++r)
          for (Eigen::Index c = 0; c < p; ++c) u_new(r, c) += scale * restart_stream.gaussian();
      }
    }
    if (!ok) throw NumericalError("fastica could not orthogonalize the update");

    // Row change 1 - |u_new.u_old|, computed as the cancellation-free
    // equivalent ||u_new -+ u_old||^2/2 so tolerances below machine epsilon
    // of the dot product remain meaningful.
    double crit = 0.0;
    for (Eigen::Index j = 0; j < p; ++j) {
      const double sign = u_orth.row(j).dot(u.row(j)) >= 0.0 ? 1.0 : -1.0;
      crit = std::max(crit, 0.5 * (u_orth.row(j) - sign * u.row(j)).squaredNorm());
    }
    u = u_orth;
    out.objective_trace.push_back(fastica_objective(u, wh.xt, s_set, lambda, nl).total());
    out.iterations = iter;
    if (crit < opts.tol) {
      out.converged = true;
      break;
    }
  }

  out.u = canonical_row_signs(u);
  out.gamma = out.u * wh.whitener;
  const FastIcaObjective final_obj = fastica_objective(out.u, wh.xt, s_set, lambda, nl);
  out.objective_graph = final_obj.graph;
  out.objective_contrast = final_obj.contrast;
  return out;
}

}  // namespace detail

/** Plain kurtosis-style fixed-point separation on whitened data. */
inline SeparationResult fastica_sq(const Matrix& x, const FastIcaOptions& opts = {}) {
  return detail::fastica_core(x, nullptr, 0.0, opts);
}

/** Fixed-point separation blending graph autocorrelation with negentropy. */
inline SeparationResult graph_fastica(const Matrix& x, const GraphSet& graphs,
                                      double lambda = 0.001, const FastIcaOptions& opts = {}) {
  graphs.validate();
  return detail::fastica_core(x, lambda > 0.0 ? &graphs : nullptr, lambda, opts);
}

}  // namespace graphbss

#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include "graphbss/adjacency.hpp"
#include "graphbss/errors.hpp"

namespace graphbss {

/**
 * Separation quality of Γ̂ against the mixing Ω, resolved over the inherent
 * permutation/scale ambiguity by exhaustive assignment search.
 */
struct MdResult {
  double md = 0.0;                // raw index; 0 iff Γ̂Ω is a scaled permutation
  std::vector<int> permutation;   // permutation[i] = row of Γ̂Ω assigned to source i
  Vector scales;                  // per-source scale fixing the assigned row toward e_i
  Matrix alignment;               // A with A·Γ̂Ω ≈ I under the best assignment
  Matrix benefit;                 // benefit[j][i] = (ΓΩ)²_{ji} / ‖row j‖²

  // The raw value exceeds one only for rank-deficient products (and by
  // rounding spill); plots use the capped view, logs keep the raw value.
  double clamped() const { return std::min(1.0, md); }
};

inline MdResult md_index_full(const Matrix& gamma_hat, const Matrix& omega) {
  const Eigen::Index p = omega.rows();
  if (p < 2) throw ParameterError("md_index needs at least two sources");
  if (p > 8) throw ParameterError("md_index exhaustive search is limited to eight sources");
  if (omega.cols() != p || gamma_hat.rows() != p || gamma_hat.cols() != p)
    throw ParameterError("md_index requires square matrices of matching size");
  if (!gamma_hat.allFinite() || !omega.allFinite())
    throw ParameterError("md_index requires finite matrices");

  const Matrix g = gamma_hat * omega;
  Matrix benefit = Matrix::Zero(p, p);
  Vector row_sq(p);
  for (Eigen::Index j = 0; j < p; ++j) {
    row_sq[j] = g.row(j).squaredNorm();
    if (row_sq[j] > 0.0)
      for (Eigen::Index i = 0; i < p; ++i) benefit(j, i) = g(j, i) * g(j, i) / row_sq[j];
  }

  std::vector<int> perm(static_cast<std::size_t>(p));
  std::iota(perm.begin(), perm.end(), 0);
  std::vector<int> best_perm = perm;
  double best = -1.0;
  do {
    double s = 0.0;
    for (Eigen::Index i = 0; i < p; ++i) s += benefit(perm[static_cast<std::size_t>(i)], i);
    if (s > best) {
      best = s;
      best_perm = perm;
    }
  } while (std::next_permutation(perm.begin(), perm.end()));

  MdResult out;
  out.permutation = best_perm;
  out.benefit = benefit;
  out.md = std::sqrt(std::max(0.0, (static_cast<double>(p) - best)) / static_cast<double>(p - 1));
  out.scales = Vector::Zero(p);
  out.alignment = Matrix::Zero(p, p);
  for (Eigen::Index i = 0; i < p; ++i) {
    const int j = best_perm[static_cast<std::size_t>(i)];
    if (row_sq[j] > 0.0) out.scales[i] = g(j, i) / row_sq[j];
    out.alignment(i, j) = out.scales[i];
  }
  return out;
}

inline double md_index(const Matrix& gamma_hat, const Matrix& omega) {
  return md_index_full(gamma_hat, omega).md;
}

/**
 * Γ̂ with rows re-ordered and sign-fixed so the assigned diagonal of
 * Γ̂_aligned·Ω is positive. Order and sign are the only inherent discrete
 * ambiguities; row magnitudes are untouched so genuine scale error stays
 * visible to downstream statistics.
 */
inline Matrix align_unmixing(const Matrix& gamma_hat, const Matrix& omega) {
  const MdResult r = md_index_full(gamma_hat, omega);
  const Eigen::Index p = omega.rows();
  Matrix a = Matrix::Zero(p, p);
  for (Eigen::Index i = 0; i < p; ++i) {
    const int j = r.permutation[static_cast<std::size_t>(i)];
    a(i, j) = r.scales[i] < 0.0 ? -1.0 : 1.0;
  }
  return a * gamma_hat;
}

/**
 * Mixing estimate with the column order and signs fixed toward the
 * reference: a column signed-permutation of omega comes back as omega
 * exactly. Only the discrete ambiguities are corrected; magnitude error is
 * genuine estimation error and stays in the aligned estimate.
 */
inline Matrix align_mixing(const Matrix& omega_hat, const Matrix& omega) {
  const MdResult r = md_index_full(Matrix(omega_hat.inverse()), omega);
  const Eigen::Index p = omega.rows();
  Matrix inv_align = Matrix::Zero(p, p);
  for (Eigen::Index i = 0; i < p; ++i) {
    const double s = r.scales(i);
    if (s == 0.0 || !std::isfinite(s))
      throw NumericalError("mixing estimate cannot be aligned: degenerate assignment scale");
    inv_align(r.permutation[static_cast<std::size_t>(i)], i) = s > 0.0 ? 1.0 : -1.0;
  }
  return omega_hat * inv_align;
}

struct MeanSe {
  double mean = std::numeric_limits<double>::quiet_NaN();
  double se = std::numeric_limits<double>::quiet_NaN();
};

inline MeanSe mean_se(const std::vector<double>& values) {
  MeanSe out;
  const std::size_t r = values.size();
  if (r == 0) return out;
  double sum = 0.0;
  for (double v : values) sum += v;
  out.mean = sum / static_cast<double>(r);
  if (r >= 2) {
    double ss = 0.0;
    for (double v : values) ss += (v - out.mean) * (v - out.mean);
    out.se = std::sqrt(ss / static_cast<double>(r - 1) / static_cast<double>(r));
  }
  return out;
}

/**
 * Sample-size-scaled sum of entrywise variances across replicated (aligned)
 * mixing estimates: n · Σ_entries Var, over all entries and over off-diagonal
 * entries only. Standard errors come from a delete-one jackknife on the
 * accumulated sums; they are NaN below three replicates.
 */
struct VarianceAggregate {
  double total = std::numeric_limits<double>::quiet_NaN();
  double total_se = std::numeric_limits<double>::quiet_NaN();
  double offdiag = std::numeric_limits<double>::quiet_NaN();
  double offdiag_se = std::numeric_limits<double>::quiet_NaN();
  int replicates = 0;
};

inline VarianceAggregate scaled_entry_variance(const std::vector<Matrix>& estimates,
                                               int n_samples) {
  VarianceAggregate out;
  out.replicates = static_cast<int>(estimates.size());
  if (n_samples < 1) throw ParameterError("scaled_entry_variance needs a positive sample size");
  if (estimates.empty()) return out;
  const Eigen::Index p = estimates.front().rows();
  for (const Matrix& m : estimates)
    if (m.rows() != p || m.cols() != p)
      throw ParameterError("scaled_entry_variance: estimates must share one shape");

  const double r = static_cast<double>(estimates.size());
  if (estimates.size() < 2) return out;

  Matrix sum = Matrix::Zero(p, p);
  Matrix sum_sq = Matrix::Zero(p, p);
  for (const Matrix& m : estimates) {
    sum += m;
    sum_sq += m.cwiseProduct(m);
  }

  const auto variance_sums = [&](const Matrix& s, const Matrix& sq, double count, double& total,
                                 double& offdiag) {
    total = 0.0;
    offdiag = 0.0;
    for (Eigen::Index a = 0; a < p; ++a)
      for (Eigen::Index b = 0; b < p; ++b) {
        const double var = (sq(a, b) - s(a, b) * s(a, b) / count) / (count - 1.0);
        total += var;
        if (a != b) offdiag += var;
      }
    total *= n_samples;
    offdiag *= n_samples;
  };

  variance_sums(sum, sum_sq, r, out.total, out.offdiag);

  if (estimates.size() >= 3) {
    std::vector<double> loo_total(estimates.size());
    std::vector<double> loo_off(estimates.size());
    for (std::size_t k = 0; k < estimates.size(); ++k) {
      const Matrix s = sum - estimates[k];
      const Matrix sq = sum_sq - estimates[k].cwiseProduct(estimates[k]);
      variance_sums(s, sq, r - 1.0, loo_total[k], loo_off[k]);
    }
    const auto jackknife_se = [&](const std::vector<double>& loo) {
      double m = 0.0;
      for (double v : loo) m += v;
      m /= r;
      double ss = 0.0;
      for (double v : loo) ss += (v - m) * (v - m);
      return std::sqrt((r - 1.0) / r * ss);
    };
    out.total_se = jackknife_se(loo_total);
    out.offdiag_se = jackknife_se(loo_off);
  }
  return out;
}

}  // namespace graphbss

#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <memory>
#include <string>
#include <unsupported/Eigen/KroneckerProduct>
#include <utility>
#include <vector>

#include "graphbss/errors.hpp"
#include "graphbss/gma.hpp"

namespace graphbss {

/**
 * Identifiability guard, relative. A source pair (i,j) is declared
 * non-separable when kappa_ij*kappa_ji - N^2 <= kIdentTol*N^2, and a source p
 * carries no usable filter information when zeta_p <= kIdentTol*2N. Both
 * quantities vanish continuously at the non-identifiable point, so a relative
 * guard turns a near-infinite bound into an explicit error instead of a huge
 * finite number.
 */
inline constexpr double kIdentTol = 1e-6;

/** Dense-inversion cap for the numerical Fisher-information oracle. */
inline constexpr int kOracleMaxDim = 256;

/** One source: a covariance family and the parameter point to evaluate at. */
struct SourceModel {
  std::shared_ptr<const CovarianceModel> model;
  Vector theta;

  void validate() const {
    if (!model) throw ParameterError("SourceModel requires a covariance model");
    if (theta.size() != model->param_count())
      throw ParameterError("SourceModel theta size does not match the model parameter count");
    if (!theta.allFinite()) throw ParameterError("SourceModel theta must be finite");
  }
};

/** A covariance with no free parameters; useful as a known-source model. */
class FixedCovarianceModel : public CovarianceModel {
 public:
  explicit FixedCovarianceModel(Matrix c) : c_(std::move(c)) {
    if (c_.rows() != c_.cols() || c_.rows() < 1)
      throw ParameterError("FixedCovarianceModel requires a square covariance");
    if (!c_.allFinite()) throw ParameterError("FixedCovarianceModel covariance must be finite");
  }

  int n() const override { return static_cast<int>(c_.rows()); }
  int param_count() const override { return 0; }

  Matrix covariance(const Vector& theta) const override {
    if (theta.size() != 0) throw ParameterError("FixedCovarianceModel has no parameters");
    return c_;
  }

  Matrix derivative(const Vector&, int) const override {
    throw ParameterError("FixedCovarianceModel has no parameters to differentiate");
  }

  std::string name() const override { return "fixed"; }

 private:
  Matrix c_;
};

/**
 * Fisher information for the mixed-signal Gaussian model, in blocks over the
 * parameter vector [vec(Omega); theta_1; ...; theta_P] (vec is column-major).
 *
 *   j_omega        P^2 x P^2, (i,j) block pairs columns i and j of Omega
 *   j_theta        M x M block diagonal, one block per source
 *   j_omega_theta  P^2 x M, block p couples column p of Omega with theta_p
 */
struct FimBlocks {
  Matrix j_omega;
  Matrix j_theta;
  Matrix j_omega_theta;

  Matrix assembled() const {
    const Eigen::Index p2 = j_omega.rows();
    const Eigen::Index m = j_theta.rows();
    Matrix j(p2 + m, p2 + m);
    j.topLeftCorner(p2, p2) = j_omega;
    j.topRightCorner(p2, m) = j_omega_theta;
    j.bottomLeftCorner(m, p2) = j_omega_theta.transpose();
    j.bottomRightCorner(m, m) = j_theta;
    return j;
  }
};

/**
 * Estimation-accuracy report for one model point. The three bound matrices
 * are NaN-filled when any pair fails the identifiability guard; kappa, zeta,
 * the raw margins, and the per-pair flags are always populated so callers can
 * see how close to the boundary the model sits.
 *
 * identifiable(i,j) for i != j flags the pairwise covariance condition;
 * identifiable(p,p) flags zeta_p staying clear of zero.
 */
struct CrbReport {
  Matrix crb_omega;
  Matrix crb_omega_known_theta;
  Matrix crb_gamma;
  Matrix kappa;
  Vector zeta;
  Matrix pair_margin;  // kappa_ij*kappa_ji - N^2, zero on the diagonal
  Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic> identifiable;
  bool all_identifiable = false;
  double fim_condition = std::numeric_limits<double>::quiet_NaN();
};

namespace detail {

/** SPD factorization of C with a readable failure. */
inline Eigen::LLT<Matrix> spd_factor(const Matrix& c, const char* what) {
  if (c.rows() != c.cols() || c.rows() < 1)
    throw ParameterError(std::string(what) + ": covariance must be square");
  if (!c.allFinite()) throw ParameterError(std::string(what) + ": covariance must be finite");
  Eigen::LLT<Matrix> llt(c);
  if (llt.info() != Eigen::Success)
    throw DegenerateModelError(std::string(what) + ": covariance is not positive definite");
  return llt;
}

/** Per-source quantities shared by the information and bound assembly. */
struct SourceDerived {
  Matrix c;                   // covariance at theta
  Eigen::LLT<Matrix> llt;     // its SPD factorization
  std::vector<Matrix> cinv_d; // C^{-1} D_m, one per parameter
  Vector s;                   // s_m = tr(C^{-1} D_m)
  Matrix j_theta;             // (1/2) tr(C^{-1} D_i C^{-1} D_j)
  double zeta = 0.0;          // 2N - s' J_theta^{-1} s
};

inline SourceDerived derive_source(const SourceModel& sm) {
  sm.validate();
  SourceDerived d;
  d.c = sm.model->covariance(sm.theta);
  d.llt = spd_factor(d.c, "source covariance");
  const int mp = sm.model->param_count();
  const double two_n = 2.0 * static_cast<double>(sm.model->n());
  d.cinv_d.reserve(static_cast<std::size_t>(mp));
  d.s = Vector::Zero(mp);
  d.j_theta = Matrix::Zero(mp, mp);
  for (int m = 0; m < mp; ++m) {
    Matrix a = d.llt.solve(sm.model->derivative(sm.theta, m));
    d.s(m) = a.trace();
    d.cinv_d.push_back(std::move(a));
  }
  for (int i = 0; i < mp; ++i)
    for (int j = i; j < mp; ++j) {
      // tr(AB) as an elementwise sum; A, B already carry the C^{-1} factor.
      const double v = 0.5 * d.cinv_d[static_cast<std::size_t>(i)]
                                 .cwiseProduct(d.cinv_d[static_cast<std::size_t>(j)].transpose())
                                 .sum();
      d.j_theta(i, j) = v;
      d.j_theta(j, i) = v;
    }
  if (mp == 0 || d.s.cwiseAbs().maxCoeff() == 0.0) {
    // Known parameters, or a covariance whose scale is parameter-free at this
    // point: no coupling correction.
    d.zeta = two_n;
  } else {
    const Eigen::LDLT<Matrix> ldlt(d.j_theta);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive())
      throw NumericalError("filter-parameter information block is singular");
    d.zeta = two_n - d.s.dot(ldlt.solve(d.s));
    if (!std::isfinite(d.zeta))
      throw NumericalError("filter-parameter information block is numerically singular");
  }
  return d;
}

inline void validate_model_set(const Matrix& omega, const std::vector<SourceModel>& models) {
  const int p = static_cast<int>(models.size());
  if (p < 1) throw ParameterError("at least one source model is required");
  if (omega.rows() != p || omega.cols() != p)
    throw ParameterError("mixing matrix must be P x P for P source models");
  if (!omega.allFinite()) throw ParameterError("mixing matrix must be finite");
  for (const auto& sm : models) {
    sm.validate();
    if (sm.model->n() != models.front().model->n())
      throw ParameterError("all source models must share the graph size");
  }
}

inline Matrix inverse_checked(const Matrix& omega) {
  Eigen::FullPivLU<Matrix> lu(omega);
  if (!lu.isInvertible()) throw NumericalError("mixing matrix is singular");
  return lu.inverse();
}

/** kappa(i,j) = tr(C_j^{-1} C_i) for all pairs, from the factored sources. */
inline Matrix kappa_matrix(const std::vector<SourceDerived>& src) {
  const int p = static_cast<int>(src.size());
  Matrix k(p, p);
  for (int j = 0; j < p; ++j)
    for (int i = 0; i < p; ++i)
      k(i, j) = i == j ? static_cast<double>(src[static_cast<std::size_t>(i)].c.rows())
                       : src[static_cast<std::size_t>(j)]
                             .llt.solve(src[static_cast<std::size_t>(i)].c)
                             .trace();
  return k;
}

/**
 * Bound on vec(Omega) at Omega = I from the pairwise kappas and the per-source
 * diagonal weights (zeta_p, or 2N when the filter parameters are known).
 * Throws NonIdentifiableError when a pair margin falls under the guard.
 */
inline Matrix identity_crb(const Matrix& kap, const Vector& diag_weight, double n_nodes) {
  const int p = static_cast<int>(kap.rows());
  const double n2 = n_nodes * n_nodes;
  Matrix crb = Matrix::Zero(p * p, p * p);
  for (int i = 0; i < p; ++i) {
    for (int j = 0; j < p; ++j) {
      if (i == j) continue;
      const double margin = kap(i, j) * kap(j, i) - n2;
      if (margin <= kIdentTol * n2)
        throw NonIdentifiableError(
            "sources " + std::to_string(i) + " and " + std::to_string(j) +
                " have covariances equal up to scale; the pair cannot be separated",
            i, j);
    }
  }
  for (int i = 0; i < p; ++i) {
    // Diagonal block i: uncoupled variance for omega_ii, pairwise terms for
    // omega_li, l != i.
    crb(i * p + i, i * p + i) = 1.0 / diag_weight(i);
    for (int l = 0; l < p; ++l) {
      if (l == i) continue;
      const double margin = kap(i, l) * kap(l, i) - n2;
      crb(i * p + l, i * p + l) = kap(l, i) / margin;
    }
    // Off-diagonal block (i,j) holds the single cross term between omega_ji
    // and omega_ij.
    for (int j = 0; j < p; ++j) {
      if (j == i) continue;
      const double margin = kap(i, j) * kap(j, i) - n2;
      crb(i * p + j, j * p + i) = -n_nodes / margin;
    }
  }
  return crb;
}

}  // namespace detail

/** tr(C_j^{-1} C_i); scales linearly in C_i and diverges as C_j loses rank. */
inline double kappa(const Matrix& ci, const Matrix& cj) {
  if (ci.rows() != ci.cols() || cj.rows() != cj.cols() || ci.rows() != cj.rows())
    throw ParameterError("kappa requires two square covariances of equal size");
  const Eigen::LLT<Matrix> llt = detail::spd_factor(cj, "kappa");
  return llt.solve(ci).trace();
}

/**
 * Information in theta about the sources remaining after profiling out the
 * coupling with the mixing matrix column: zeta = 2N - s' J_theta^{-1} s,
 * with s_m = tr(C^{-1} D_m) and (J_theta)_{ij} = tr(C^{-1}D_i C^{-1}D_j)/2.
 * Always in [0, 2N]; zero means the scale profile of the source carries all
 * of its parameter information.
 */
inline double zeta(const CovarianceModel& model, const Vector& theta) {
  SourceModel sm;
  sm.model = std::shared_ptr<const CovarianceModel>(&model, [](const CovarianceModel*) {});
  sm.theta = theta;
  return detail::derive_source(sm).zeta;
}

/**
 * Fisher information blocks for jointly estimating the mixing matrix and the
 * per-source filter parameters from one mixed Gaussian snapshot matrix.
 *
 *   J_Omega^(i,i) = Omega^{-T} (2N e_i e_i' + sum_{l != i} kappa_il e_l e_l') Omega^{-1}
 *   J_Omega^(i,j) = Omega^{-T} (N e_j e_i') Omega^{-1},  i != j
 *   J_theta_p     = per-source curvature block (see zeta)
 *   J_Omega,theta^(p) = Omega^{-T} e_p s_p'
 */
inline FimBlocks fim(const Matrix& omega, const std::vector<SourceModel>& models) {
  detail::validate_model_set(omega, models);
  const int p = static_cast<int>(models.size());
  const double n_nodes = static_cast<double>(models.front().model->n());
  const Matrix omega_inv = detail::inverse_checked(omega);

  std::vector<detail::SourceDerived> src;
  src.reserve(models.size());
  for (const auto& sm : models) src.push_back(detail::derive_source(sm));
  const Matrix kap = detail::kappa_matrix(src);

  int m_total = 0;
  for (const auto& sm : models) m_total += sm.model->param_count();

  FimBlocks out;
  out.j_omega = Matrix::Zero(p * p, p * p);
  out.j_theta = Matrix::Zero(m_total, m_total);
  out.j_omega_theta = Matrix::Zero(p * p, m_total);

  for (int i = 0; i < p; ++i)
    for (int j = 0; j < p; ++j) {
      Matrix inner = Matrix::Zero(p, p);
      if (i == j) {
        inner(i, i) = 2.0 * n_nodes;
        for (int l = 0; l < p; ++l)
          if (l != i) inner(l, l) = kap(i, l);
      } else {
        inner(j, i) = n_nodes;
      }
      out.j_omega.block(i * p, j * p, p, p) = omega_inv.transpose() * inner * omega_inv;
    }

  int offset = 0;
  for (int q = 0; q < p; ++q) {
    const auto& d = src[static_cast<std::size_t>(q)];
    const int mp = models[static_cast<std::size_t>(q)].model->param_count();
    out.j_theta.block(offset, offset, mp, mp) = d.j_theta;
    if (mp > 0)
      out.j_omega_theta.block(q * p, offset, p, mp) =
          omega_inv.row(q).transpose() * d.s.transpose();
    offset += mp;
  }
  return out;
}

/**
 * Numerically assembled Fisher information from the full NP x NP snapshot
 * covariance C_x = (I_N kron Omega) C_z (I_N kron Omega'), entry by entry:
 * J_ij = tr(C_x^{-1} dC_x/dphi_i C_x^{-1} dC_x/dphi_j) / 2. Derivatives are
 * analytic by default; fd_step > 0 replaces them with central differences of
 * C_x(phi). Dense and deliberately structure-free, so it cross-checks fim()
 * independently; restricted to small instances.
 */
inline Matrix slepian_bangs_oracle(const Matrix& omega, const std::vector<SourceModel>& models,
                                   double fd_step = 0.0) {
  detail::validate_model_set(omega, models);
  const int p = static_cast<int>(models.size());
  const int n = models.front().model->n();
  const int np = n * p;
  if (np > kOracleMaxDim)
    throw ParameterError("numerical information oracle is restricted to N*P <= " +
                         std::to_string(kOracleMaxDim));
  if (fd_step < 0.0 || !std::isfinite(fd_step))
    throw ParameterError("fd_step must be zero (analytic) or a positive step");

  const Matrix eye_n = Matrix::Identity(n, n);
  const auto build_cz = [&](const std::vector<Matrix>& cs) {
    Matrix cz = Matrix::Zero(np, np);
    for (int q = 0; q < p; ++q)
      for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b)
          cz(a * p + q, b * p + q) = cs[static_cast<std::size_t>(q)](a, b);
    return cz;
  };

  std::vector<Matrix> cs;
  cs.reserve(models.size());
  for (const auto& sm : models) cs.push_back(sm.model->covariance(sm.theta));
  const Matrix cz = build_cz(cs);
  const Matrix k_omega = Eigen::kroneckerProduct(eye_n, omega).eval();
  const Matrix cx = k_omega * cz * k_omega.transpose();
  const Eigen::LLT<Matrix> llt = detail::spd_factor(cx, "snapshot covariance");

  int m_total = 0;
  for (const auto& sm : models) m_total += sm.model->param_count();
  const int dim = p * p + m_total;

  std::vector<Matrix> dcx;
  dcx.reserve(static_cast<std::size_t>(dim));

  if (fd_step == 0.0) {
    const Matrix b = k_omega * cz;
    for (int l = 0; l < p; ++l)
      for (int k = 0; k < p; ++k) {
        Matrix basis = Matrix::Zero(p, p);
        basis(l, k) = 1.0;
        const Matrix t = b * Eigen::kroneckerProduct(eye_n, basis).eval();
        dcx.push_back(t + t.transpose());
      }
    for (int q = 0; q < p; ++q) {
      const auto& sm = models[static_cast<std::size_t>(q)];
      Matrix sel = Matrix::Zero(p, p);
      sel(q, q) = 1.0;
      for (int m = 0; m < sm.model->param_count(); ++m) {
        const Matrix d = sm.model->derivative(sm.theta, m);
        dcx.push_back(k_omega * Eigen::kroneckerProduct(d, sel).eval() * k_omega.transpose());
      }
    }
  } else {
    const auto cx_at = [&](const Matrix& om, int q, int m, double shift) {
      std::vector<Matrix> cs2 = cs;
      if (q >= 0) {
        Vector th = models[static_cast<std::size_t>(q)].theta;
        th(m) += shift;
        cs2[static_cast<std::size_t>(q)] =
            models[static_cast<std::size_t>(q)].model->covariance(th);
      }
      const Matrix km = Eigen::kroneckerProduct(eye_n, om).eval();
      return Matrix(km * build_cz(cs2) * km.transpose());
    };
    for (int l = 0; l < p; ++l)
      for (int k = 0; k < p; ++k) {
        Matrix plus = omega, minus = omega;
        plus(k, l) += fd_step;
        minus(k, l) -= fd_step;
        dcx.push_back((cx_at(plus, -1, 0, 0.0) - cx_at(minus, -1, 0, 0.0)) / (2.0 * fd_step));
      }
    for (int q = 0; q < p; ++q)
      for (int m = 0; m < models[static_cast<std::size_t>(q)].model->param_count(); ++m)
        dcx.push_back((cx_at(omega, q, m, fd_step) - cx_at(omega, q, m, -fd_step)) /
                      (2.0 * fd_step));
  }

  std::vector<Matrix> solved;
  solved.reserve(dcx.size());
  for (const auto& d : dcx) solved.push_back(llt.solve(d));

  // Each entry computed independently; symmetry of the result is a checkable
  // property of the trace form, not enforced here.
  Matrix j(dim, dim);
  for (int i = 0; i < dim; ++i)
    for (int jj = 0; jj < dim; ++jj)
      j(i, jj) = 0.5 * solved[static_cast<std::size_t>(i)]
                           .cwiseProduct(solved[static_cast<std::size_t>(jj)].transpose())
                           .sum();
  return j;
}

/**
 * Lower bound on the covariance of any unbiased estimate of vec(Omega) with
 * the filter parameters treated as unknown nuisance. Computed at Omega = I
 * and carried to Omega by the equivariance sandwich (I kron Omega) * B *
 * (I kron Omega').
 */
inline Matrix crb_omega(const Matrix& omega, const std::vector<SourceModel>& models) {
  detail::validate_model_set(omega, models);
  const int p = static_cast<int>(models.size());
  const double n_nodes = static_cast<double>(models.front().model->n());
  detail::inverse_checked(omega);

  std::vector<detail::SourceDerived> src;
  src.reserve(models.size());
  for (const auto& sm : models) src.push_back(detail::derive_source(sm));
  const Matrix kap = detail::kappa_matrix(src);

  Vector weights(p);
  for (int q = 0; q < p; ++q) {
    const double z = src[static_cast<std::size_t>(q)].zeta;
    if (z <= kIdentTol * 2.0 * n_nodes)
      throw NonIdentifiableError("source " + std::to_string(q) +
                                     " retains no mixing information once its filter "
                                     "parameters are profiled out",
                                 q, q);
    weights(q) = z;
  }
  const Matrix crb_i = detail::identity_crb(kap, weights, n_nodes);
  const Matrix s = Eigen::kroneckerProduct(Matrix::Identity(p, p), omega).eval();
  return s * crb_i * s.transpose();
}

/** The same bound when the filter parameters are known: zeta_p -> 2N. */
inline Matrix crb_omega_known_theta(const Matrix& omega,
                                    const std::vector<SourceModel>& models) {
  detail::validate_model_set(omega, models);
  const int p = static_cast<int>(models.size());
  const double n_nodes = static_cast<double>(models.front().model->n());
  detail::inverse_checked(omega);

  std::vector<detail::SourceDerived> src;
  src.reserve(models.size());
  for (const auto& sm : models) src.push_back(detail::derive_source(sm));
  const Matrix kap = detail::kappa_matrix(src);

  const Vector weights = Vector::Constant(p, 2.0 * n_nodes);
  const Matrix crb_i = detail::identity_crb(kap, weights, n_nodes);
  const Matrix s = Eigen::kroneckerProduct(Matrix::Identity(p, p), omega).eval();
  return s * crb_i * s.transpose();
}

/**
 * Bound for unbiased estimation of the unmixing matrix Gamma = Omega^{-1}:
 * the vec(Omega) bound at identity pushed through the inversion map,
 * (Gamma' kron I) * B_I * (Gamma kron I).
 */
inline Matrix crb_gamma(const Matrix& omega, const std::vector<SourceModel>& models) {
  detail::validate_model_set(omega, models);
  const int p = static_cast<int>(models.size());
  const double n_nodes = static_cast<double>(models.front().model->n());
  const Matrix gamma = detail::inverse_checked(omega);

  std::vector<detail::SourceDerived> src;
  src.reserve(models.size());
  for (const auto& sm : models) src.push_back(detail::derive_source(sm));
  const Matrix kap = detail::kappa_matrix(src);

  Vector weights(p);
  for (int q = 0; q < p; ++q) {
    const double z = src[static_cast<std::size_t>(q)].zeta;
    if (z <= kIdentTol * 2.0 * n_nodes)
      throw NonIdentifiableError("source " + std::to_string(q) +
                                     " retains no mixing information once its filter "
                                     "parameters are profiled out",
                                 q, q);
    weights(q) = z;
  }
  const Matrix crb_i = detail::identity_crb(kap, weights, n_nodes);
  const Matrix s = Eigen::kroneckerProduct(gamma.transpose(), Matrix::Identity(p, p)).eval();
  return s * crb_i * s.transpose();
}

/**
 * Full report: bounds, pairwise separability margins, per-source zeta, flags,
 * and the condition number of the assembled information matrix. Never throws
 * on a non-identifiable model point; the bound matrices come back NaN-filled
 * and the flags say which pair (or which source) failed.
 */
inline CrbReport crb_report(const Matrix& omega, const std::vector<SourceModel>& models) {
  detail::validate_model_set(omega, models);
  const int p = static_cast<int>(models.size());
  const double n_nodes = static_cast<double>(models.front().model->n());
  const double n2 = n_nodes * n_nodes;

  std::vector<detail::SourceDerived> src;
  src.reserve(models.size());
  for (const auto& sm : models) src.push_back(detail::derive_source(sm));

  CrbReport rep;
  rep.kappa = detail::kappa_matrix(src);
  rep.zeta = Vector(p);
  for (int q = 0; q < p; ++q) rep.zeta(q) = src[static_cast<std::size_t>(q)].zeta;

  rep.pair_margin = Matrix::Zero(p, p);
  rep.identifiable = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>::Constant(p, p, true);
  rep.all_identifiable = true;
  for (int i = 0; i < p; ++i) {
    if (!(rep.zeta(i) > kIdentTol * 2.0 * n_nodes)) {
      rep.identifiable(i, i) = false;
      rep.all_identifiable = false;
    }
    for (int j = 0; j < p; ++j) {
      if (i == j) continue;
      rep.pair_margin(i, j) = rep.kappa(i, j) * rep.kappa(j, i) - n2;
      if (!(rep.pair_margin(i, j) > kIdentTol * n2)) {
        rep.identifiable(i, j) = false;
        rep.all_identifiable = false;
      }
    }
  }

  const Matrix j = fim(omega, models).assembled();
  const Eigen::JacobiSVD<Matrix> svd(j);
  const double smin = svd.singularValues().minCoeff();
  const double smax = svd.singularValues().maxCoeff();
  rep.fim_condition = smin > 0.0 ? smax / smin : std::numeric_limits<double>::infinity();

  if (rep.all_identifiable) {
    rep.crb_omega = crb_omega(omega, models);
    rep.crb_omega_known_theta = crb_omega_known_theta(omega, models);
    rep.crb_gamma = crb_gamma(omega, models);
  } else {
    const Matrix nan_mat =
        Matrix::Constant(p * p, p * p, std::numeric_limits<double>::quiet_NaN());
    rep.crb_omega = nan_mat;
    rep.crb_omega_known_theta = nan_mat;
    rep.crb_gamma = nan_mat;
  }
  return rep;
}

}  // namespace graphbss

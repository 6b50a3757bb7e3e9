#pragma once

#include <Eigen/Dense>
#include <memory>
#include <optional>

#include "graphbss/adjacency.hpp"
#include "graphbss/innovations.hpp"
#include "graphbss/rng.hpp"

namespace graphbss {

namespace detail {

/** Throws unless A has a finite log-determinant (no exactly singular pivot). */
inline void require_invertible(const Matrix& a, const char* what) {
  Eigen::PartialPivLU<Matrix> lu(a);
  double logdet = 0.0;
  const auto& u = lu.matrixLU();
  for (Eigen::Index i = 0; i < u.rows(); ++i) {
    const double d = std::abs(u(i, i));
    if (d == 0.0) throw DegenerateModelError(std::string(what) + ": singular filter matrix");
    logdet += std::log(d);
  }
  if (!std::isfinite(logdet))
    throw DegenerateModelError(std::string(what) + ": non-finite log-determinant");
}

}  // namespace detail

/** Moving-average filter A = I + Σ_l θ_l W^l applied in GMA generation. */
inline Matrix gma_filter(const AdjacencyMatrix& w, const Vector& theta) {
  if (theta.size() < 1) throw ParameterError("GMA order must be at least 1");
  if (!theta.allFinite()) throw ParameterError("GMA coefficients must be finite");
  Matrix a = Matrix::Identity(w.n(), w.n());
  for (Eigen::Index l = 0; l < theta.size(); ++l)
    if (theta(l) != 0.0) a += theta(l) * w.power(static_cast<int>(l) + 1);
  return a;
}

/**
 * Trace-normalizing innovation variance: with A = I + Σ θ_l W^l the source
 * covariance is σ²AAᵀ, and σ²(θ) = N / tr(AAᵀ) makes its trace equal N, i.e.
 * unit average energy per node.
 */
inline double normalized_sigma2(const AdjacencyMatrix& w, const Vector& theta) {
  const Matrix a = gma_filter(w, theta);
  return static_cast<double>(w.n()) / a.squaredNorm();
}

inline double normalized_sigma2(const AdjacencyMatrix& w, double theta) {
  Vector t(1);
  t << theta;
  return normalized_sigma2(w, t);
}

/** GMA covariance σ²(I + Σθ_lW^l)(I + Σθ_lW^l)ᵀ; the filter must be invertible. */
inline Matrix gma_covariance(const AdjacencyMatrix& w, const Vector& theta, double sigma2) {
  if (!(sigma2 > 0.0)) throw ParameterError("gma covariance requires sigma2 > 0");
  const Matrix a = gma_filter(w, theta);
  detail::require_invertible(a, "gma_covariance");
  return sigma2 * (a * a.transpose());
}

inline Matrix gma1_covariance(const AdjacencyMatrix& w, double theta, double sigma2) {
  Vector t(1);
  t << theta;
  return gma_covariance(w, t, sigma2);
}

/**
 * One graph moving-average source: which graph it lives on, the filter
 * coefficients, the innovation variance (unset means trace-normalized), and
 * the innovation law.
 */
struct GmaSpec {
  std::shared_ptr<const AdjacencyMatrix> graph;
  Vector theta;
  std::optional<double> sigma2;  // nullopt: trace-normalized sigma2(theta)
  InnovationLaw innovation = InnovationLaw::gaussian();

  int order() const { return static_cast<int>(theta.size()); }

  void validate() const {
    if (!graph) throw ParameterError("GmaSpec requires a graph");
    if (theta.size() < 1) throw ParameterError("GmaSpec requires at least one coefficient");
    if (!theta.allFinite()) throw ParameterError("GmaSpec coefficients must be finite");
    if (sigma2 && !(*sigma2 > 0.0)) throw ParameterError("GmaSpec sigma2 must be positive");
  }

  double effective_sigma2() const {
    validate();
    return sigma2 ? *sigma2 : normalized_sigma2(*graph, theta);
  }
};

/**
 * Draws one source realization z = y + Σ_l θ_l W^l y with y i.i.d. from the
 * law scaled by sqrt(σ²). Powers are applied by repeated multiplication, so
 * no dense W^l is formed. θ_l = 0 terms are skipped, keeping z = y bit-exact
 * for an all-zero coefficient vector.
 */
inline Vector gma_generate(const GmaSpec& spec, RandomStream& rng) {
  spec.validate();
  const int n = spec.graph->n();
  const double scale = std::sqrt(spec.effective_sigma2());
  Vector y = draw_innovations(spec.innovation, n, rng);
  y *= scale;
  Vector z = y;
  Vector cur = y;
  for (int l = 0; l < spec.order(); ++l) {
    if (l + 1 < spec.order() || spec.theta(l) != 0.0) cur = spec.graph->matrix() * cur;
    if (spec.theta(l) != 0.0) z += spec.theta(l) * cur;
  }
  return z;
}

/**
 * Covariance-with-derivatives interface consumed by the Fisher-information
 * and bound machinery. Models are value-like and immutable.
 */
class CovarianceModel {
 public:
  virtual ~CovarianceModel() = default;
  virtual int n() const = 0;
  virtual int param_count() const = 0;
  virtual Matrix covariance(const Vector& theta) const = 0;
  virtual Matrix derivative(const Vector& theta, int m) const = 0;
  virtual std::string name() const = 0;
};

namespace detail {

inline void check_theta1(const Vector& theta) {
  if (theta.size() != 1) throw ParameterError("GMA(1) model takes exactly one coefficient");
  if (!theta.allFinite()) throw ParameterError("GMA(1) coefficient must be finite");
}

/** dS/dθ for S(θ) = (I+θW)(I+θW)ᵀ. */
inline Matrix smoothness_derivative(const AdjacencyMatrix& w, double theta) {
  const Matrix& wm = w.matrix();
  return wm + wm.transpose() + 2.0 * theta * (wm * wm.transpose());
}

}  // namespace detail

/** GMA(1) with trace-normalized innovation variance σ²(θ) = N / tr(S(θ)). */
class Gma1NormalizedModel : public CovarianceModel {
 public:
  explicit Gma1NormalizedModel(std::shared_ptr<const AdjacencyMatrix> w) : w_(std::move(w)) {
    if (!w_) throw ParameterError("Gma1NormalizedModel requires a graph");
  }

  int n() const override { return w_->n(); }
  int param_count() const override { return 1; }

  Matrix covariance(const Vector& theta) const override {
    detail::check_theta1(theta);
    return gma1_covariance(*w_, theta(0), normalized_sigma2(*w_, theta(0)));
  }

  /** D = σ²(θ)·dS/dθ + (dσ²/dθ)·S with dσ²/dθ = -N·tr(dS/dθ)/tr(S)². */
  Matrix derivative(const Vector& theta, int m) const override {
    detail::check_theta1(theta);
    if (m != 0) throw ParameterError("Gma1NormalizedModel has a single parameter");
    const double th = theta(0);
    const Matrix a = gma_filter(*w_, theta);
    const Matrix s = a * a.transpose();
    const Matrix ds = detail::smoothness_derivative(*w_, th);
    const double trs = s.trace();
    const double nn = static_cast<double>(n());
    const double sigma2 = nn / trs;
    const double dsigma2 = -nn * ds.trace() / (trs * trs);
    return sigma2 * ds + dsigma2 * s;
  }

  std::string name() const override { return "gma1_normalized"; }

  const AdjacencyMatrix& graph() const { return *w_; }

 private:
  std::shared_ptr<const AdjacencyMatrix> w_;
};

/** GMA(1) with a fixed, known innovation variance. */
class Gma1FixedVarianceModel : public CovarianceModel {
 public:
  Gma1FixedVarianceModel(std::shared_ptr<const AdjacencyMatrix> w, double sigma2)
      : w_(std::move(w)), sigma2_(sigma2) {
    if (!w_) throw ParameterError("Gma1FixedVarianceModel requires a graph");
    if (!(sigma2_ > 0.0)) throw ParameterError("Gma1FixedVarianceModel requires sigma2 > 0");
  }

  int n() const override { return w_->n(); }
  int param_count() const override { return 1; }

  Matrix covariance(const Vector& theta) const override {
    detail::check_theta1(theta);
    return gma1_covariance(*w_, theta(0), sigma2_);
  }

  /** dσ²/dθ = 0, so D = σ²·(W + Wᵀ + 2θWWᵀ). */
  Matrix derivative(const Vector& theta, int m) const override {
    detail::check_theta1(theta);
    if (m != 0) throw ParameterError("Gma1FixedVarianceModel has a single parameter");
    return sigma2_ * detail::smoothness_derivative(*w_, theta(0));
  }

  std::string name() const override { return "gma1_fixed"; }

  const AdjacencyMatrix& graph() const { return *w_; }
  double sigma2() const { return sigma2_; }

 private:
  std::shared_ptr<const AdjacencyMatrix> w_;
  double sigma2_;
};

}  // namespace graphbss

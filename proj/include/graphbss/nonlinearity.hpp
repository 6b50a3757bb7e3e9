#pragma once

#include <Eigen/Eigenvalues>
#include <cmath>
#include <functional>
#include <utility>
#include <vector>

#include "graphbss/adjacency.hpp"
#include "graphbss/errors.hpp"

namespace graphbss {

/** Gauss-Hermite rule (physicists' weight e^{-x²}) via the Golub-Welsch tridiagonal. */
struct GaussHermiteRule {
  Vector nodes;
  Vector weights;
};

inline GaussHermiteRule gauss_hermite(int order) {
  if (order < 1) throw ParameterError("gauss_hermite order must be >= 1");
  Matrix j = Matrix::Zero(order, order);
  for (int i = 0; i + 1 < order; ++i) {
    const double b = std::sqrt(0.5 * (i + 1));
    j(i, i + 1) = b;
    j(i + 1, i) = b;
  }
  Eigen::SelfAdjointEigenSolver<Matrix> es(j);
  if (es.info() != Eigen::Success) throw NumericalError("gauss_hermite eigensolver failed");
  GaussHermiteRule rule;
  rule.nodes = es.eigenvalues();
  rule.weights.resize(order);
  const double sqrt_pi = std::sqrt(M_PI);
  for (int i = 0; i < order; ++i) {
    const double v0 = es.eigenvectors()(0, i);
    rule.weights[i] = sqrt_pi * v0 * v0;
  }
  return rule;
}

/** E{f(Y)} for Y ~ N(0,1), by Gauss-Hermite quadrature. */
inline double gaussian_expectation(const std::function<double(double)>& f, int order = 150) {
  const GaussHermiteRule rule = gauss_hermite(order);
  const double root2 = std::sqrt(2.0);
  double acc = 0.0;
  for (int i = 0; i < rule.nodes.size(); ++i) acc += rule.weights[i] * f(root2 * rule.nodes[i]);
  return acc / std::sqrt(M_PI);
}

/**
 * Contrast nonlinearity: primitive G0, derivative g, second derivative g',
 * and the standard-normal mean of G0 used to center the contrast.
 */
struct Nonlinearity {
  std::function<double(double)> g0;
  std::function<double(double)> g;
  std::function<double(double)> gprime;
  double gauss_mean = 0.0;

  /** Centered contrast G = G0 - E{G0(y)}, zero-mean under a standard normal. */
  double G(double x) const { return g0(x) - gauss_mean; }

  void validate() const {
    if (!g0 || !g || !gprime) throw ParameterError("Nonlinearity callbacks must all be set");
  }
};

/** log cosh x, evaluated without overflow for large |x|. */
inline double log_cosh(double x) {
  const double a = std::abs(x);
  return a + std::log1p(std::exp(-2.0 * a)) - M_LN2;
}

/** The log-cosh contrast: G0 = log cosh, g = tanh, g' = 1 - tanh². */
inline const Nonlinearity& tanh_nonlinearity() {
  static const Nonlinearity nl = [] {
    Nonlinearity out;
    out.g0 = [](double x) { return log_cosh(x); };
    out.g = [](double x) { return std::tanh(x); };
    out.gprime = [](double x) {
      const double t = std::tanh(x);
      return 1.0 - t * t;
    };
    out.gauss_mean = gaussian_expectation([](double x) { return log_cosh(x); });
    return out;
  }();
  return nl;
}

}  // namespace graphbss

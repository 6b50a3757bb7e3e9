#pragma once

#include <cmath>
#include <string>

#include "graphbss/adjacency.hpp"
#include "graphbss/rng.hpp"

namespace graphbss {

/**
 * Innovation distribution for source generation. Every law is standardized
 * to mean 0 and variance 1:
 *   gaussian      N(0,1)
 *   student_t(df) t(df) scaled by sqrt((df-2)/df), df > 2
 *   uniform       uniform on [-sqrt(3), sqrt(3)]
 *   exponential   Exp(1) shifted by -1
 */
struct InnovationLaw {
  enum class Kind { gaussian, student_t, uniform, exponential };

  Kind kind = Kind::gaussian;
  double df = 0.0;

  static InnovationLaw gaussian() { return {Kind::gaussian, 0.0}; }
  static InnovationLaw student_t(double df) {
    if (!(df > 2.0)) throw ParameterError("student_t innovation requires df > 2");
    return {Kind::student_t, df};
  }
  static InnovationLaw uniform() { return {Kind::uniform, 0.0}; }
  static InnovationLaw exponential() { return {Kind::exponential, 0.0}; }

  /** Accepts "gaussian", "student_t:<df>", "uniform", "exponential". */
  static InnovationLaw parse(const std::string& text) {
    if (text == "gaussian") return gaussian();
    if (text == "uniform") return uniform();
    if (text == "exponential") return exponential();
    const std::string prefix = "student_t:";
    if (text.rfind(prefix, 0) == 0) {
      try {
        return student_t(std::stod(text.substr(prefix.size())));
      } catch (const std::invalid_argument&) {
        throw ParameterError("bad student_t degrees of freedom in '" + text + "'");
      }
    }
    throw ParameterError("unknown innovation law '" + text + "'");
  }

  std::string name() const {
    switch (kind) {
      case Kind::gaussian: return "gaussian";
      case Kind::uniform: return "uniform";
      case Kind::exponential: return "exponential";
      case Kind::student_t: {
        std::string d = std::to_string(df);
        d.erase(d.find_last_not_of('0') + 1);
        if (!d.empty() && d.back() == '.') d.pop_back();
        return "student_t:" + d;
      }
    }
    return "?";
  }

  double draw(RandomStream& rng) const {
    switch (kind) {
      case Kind::gaussian: return rng.gaussian();
      case Kind::student_t: return rng.student_t(df) * std::sqrt((df - 2.0) / df);
      case Kind::uniform: return (2.0 * rng.uniform01() - 1.0) * std::sqrt(3.0);
      case Kind::exponential: return rng.exponential() - 1.0;
    }
    throw ParameterError("corrupt innovation law");
  }
};

/** n i.i.d. standardized draws from the law. */
inline Vector draw_innovations(const InnovationLaw& law, int n, RandomStream& rng) {
  if (n < 1) throw ParameterError("draw_innovations requires n >= 1");
  Vector y(n);
  for (int i = 0; i < n; ++i) y(i) = law.draw(rng);
  return y;
}

}  // namespace graphbss

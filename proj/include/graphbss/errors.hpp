#pragma once

#include <stdexcept>
#include <string>

namespace graphbss {

/** Base class for all toolkit errors. */
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/** Invalid arguments, malformed configs, contract violations. CLI exit code 2. */
class ParameterError : public Error {
 public:
  explicit ParameterError(const std::string& what) : Error(what) {}
};

/** Numerical failures (singular matrices, degenerate models). CLI exit code 3. */
class NumericalError : public Error {
 public:
  explicit NumericalError(const std::string& what) : Error(what) {}
};

/** Sample covariance numerically singular; message carries the offending eigenvalue. */
class WhiteningError : public NumericalError {
 public:
  WhiteningError(const std::string& what, double eigenvalue)
      : NumericalError(what), eigenvalue(eigenvalue) {}
  double eigenvalue;
};

/** Graph moment degenerate (e.g. W^k X̃ᵀ vanishes for an empty graph). */
class DegenerateGraphError : public NumericalError {
 public:
  explicit DegenerateGraphError(const std::string& what) : NumericalError(what) {}
};

/** Source covariance model invalid at the requested parameter (singular I + θW). */
class DegenerateModelError : public NumericalError {
 public:
  explicit DegenerateModelError(const std::string& what) : NumericalError(what) {}
};

/** Covariance structure does not separate a source pair; names the pair. */
class NonIdentifiableError : public NumericalError {
 public:
  NonIdentifiableError(const std::string& what, int i, int j)
      : NumericalError(what), source_i(i), source_j(j) {}
  int source_i;
  int source_j;
};

}  // namespace graphbss

#pragma once

#include <cmath>
#include <cstdint>
#include <random>

#include "graphbss/errors.hpp"

namespace graphbss {

/** splitmix64 finalizer; bijective on 64-bit words. */
inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/** Well-known channel offsets for deriving substreams of one repetition. */
namespace channel {
inline constexpr std::uint64_t sources = 0;        // + source index
inline constexpr std::uint64_t graphs = 1000;      // + graph index
inline constexpr std::uint64_t omega = 2000;       //
inline constexpr std::uint64_t crb_graphs = 3000;  // + graph index
inline constexpr std::uint64_t restarts = 4000;    //
}  // namespace channel

/**
 * Deterministic random stream over a fully specified engine (mt19937_64).
 *
 * Streams form a tree: child(i) derives an independent stream whose draws
 * do not interact with the parent's. All samplers below are implemented on
 * raw engine words only, so identical keys give identical draws on every
 * conforming standard library.
 */
class RandomStream {
 public:
  explicit RandomStream(std::uint64_t key) : key_(key), engine_(mix64(key)) {}

  /** Independent substream; derivation depends only on (key, index). */
  RandomStream child(std::uint64_t index) const {
    return RandomStream(mix64(key_ ^ mix64(index ^ 0xa5a5a5a5a5a5a5a5ULL)));
  }

  std::uint64_t key() const { return key_; }

  std::uint64_t bits() { return engine_(); }

  /** Uniform on [0, 1): 53-bit resolution. */
  double uniform01() {
    return static_cast<double>(bits() >> 11) * 0x1.0p-53;
  }

  /** Uniform on (0, 1]; safe as a log argument. */
  double uniform_open() { return 1.0 - uniform01(); }

  double uniform(double a, double b) { return a + (b - a) * uniform01(); }

  bool bernoulli(double p) {
    if (p < 0.0 || p > 1.0) throw ParameterError("bernoulli probability outside [0,1]");
    return uniform01() < p;
  }

  /** Standard normal via Box-Muller; the second variate of a pair is cached. */
  double gaussian() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double r = std::sqrt(-2.0 * std::log(uniform_open()));
    const double a = 2.0 * M_PI * uniform01();
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
  }

  /** Exponential(1). */
  double exponential() { return -std::log(uniform_open()); }

  /**
   * Student t with df degrees of freedom via Bailey's polar method.
   * Requires df > 0; the callers of standardized laws demand df > 2.
   */
  double student_t(double df) {
    if (!(df > 0.0)) throw ParameterError("student_t requires df > 0");
    double u, v, w;
    do {
      u = 2.0 * uniform01() - 1.0;
      v = 2.0 * uniform01() - 1.0;
      w = u * u + v * v;
    } while (w > 1.0 || w == 0.0);
    return u * std::sqrt(df * (std::pow(w, -2.0 / df) - 1.0) / w);
  }

 private:
  std::uint64_t key_;
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace graphbss

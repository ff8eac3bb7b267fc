// common.hpp - error taxonomy and seeded random streams shared by all modules.
#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

namespace jssm {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Tensor shapes do not fit the operation.
struct ShapeError : Error {
  using Error::Error;
};

/// A documented precondition was violated by the caller.
struct ContractError : Error {
  using Error::Error;
};

/// A configuration value is out of its legal range or inconsistent.
struct ConfigError : Error {
  using Error::Error;
};

/// Input text/file could not be parsed; message carries the location.
struct ParseError : Error {
  using Error::Error;
};

/// Parsed data violates schema-level constraints.
struct ValidationError : Error {
  using Error::Error;
};

/// Numerically degenerate input (e.g. zero-norm vector for cosine).
struct DegenerateInputError : Error {
  using Error::Error;
};

/// Training produced a non-finite loss.
struct DivergenceError : Error {
  using Error::Error;
};

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

/// Deterministic random stream. All randomness in the project flows through
/// this class so that a seed pins every generated value bit-for-bit.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed), gen_(seed) {}

  std::uint64_t next_u64() { return gen_(); }

  /// Uniform double in [0, 1), 53-bit resolution.
  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [lo, hi], inclusive, unbiased.
  int uniform_int(int lo, int hi) {
    if (hi < lo) throw ContractError("Rng::uniform_int: empty range");
    const std::uint64_t span = static_cast<std::uint64_t>(hi) - static_cast<std::uint64_t>(lo) + 1;
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % span;
    std::uint64_t v;
    do {
      v = gen_();
    } while (v >= limit);
    return lo + static_cast<int>(v % span);
  }

  bool bernoulli(double p) { return uniform() < p; }

  /// Standard normal via Box-Muller (independent of libstdc++ internals).
  double gaussian() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * 3.14159265358979323846 * u2;
    spare_ = r * std::sin(theta);
    have_spare_ = true;
    return r * std::cos(theta);
  }

  /// Derive an independent sub-stream; forking never perturbs this stream.
  Rng fork(std::uint64_t stream) const {
    return Rng(splitmix64(seed_ ^ splitmix64(stream + 1)));
  }

  std::uint64_t seed() const { return seed_; }

 private:
  std::uint64_t seed_;
  std::mt19937_64 gen_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace jssm

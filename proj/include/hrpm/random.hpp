#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace hrpm {

/// Name of the only generator accepted in config files.
inline constexpr std::string_view kRngName = "mt19937_64";

/// Integer-seeded generator with hand-written distributions.
///
/// std::mt19937_64 has a standard-mandated output sequence, but the
/// std::*_distribution adaptors do not, so every transform lives here to keep
/// generated data identical across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n); n must be positive.
  std::uint64_t uniform_index(std::uint64_t n);

  /// Standard normal via Box-Muller (no cached second variate).
  double normal();

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  /// log of a Gamma(shape, 1) variate, finite even for tiny shapes.
  double log_gamma_variate(double shape);

  double gamma_variate(double shape);

 private:
  std::mt19937_64 engine_;
};

/// splitmix64 finalizer.
std::uint64_t mix64(std::uint64_t x);

/// Child seed for a labelled consumer of the root seed.
std::uint64_t derive_seed(std::uint64_t root, std::string_view label);

/// 64-bit FNV-1a; used for seed labels and content hashes.
std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t basis = 0xcbf29ce484222325ULL);

}  // namespace hrpm

#pragma once

#include <cstdint>
#include <random>

namespace oodbench {

/// Seeded generator with library-defined (not implementation-defined)
/// distributions, so a seed reproduces the same bits on every platform.
class Rng {
 public:
  /// Stream keyed by (seed, tag); distinct tags give independent streams.
  Rng(std::uint64_t seed, std::uint64_t tag);

  /// Uniform in [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Standard normal (Box-Muller).
  double normal();
  /// Uniform integer in [0, n), n > 0.
  std::uint64_t below(std::uint64_t n);
  /// Uniform integer in [lo, hi].
  std::int64_t integer(std::int64_t lo, std::int64_t hi) {
    return lo + static_cast<std::int64_t>(below(static_cast<std::uint64_t>(hi - lo) + 1));
  }

 private:
  std::mt19937_64 engine_;
  double cached_normal_ = 0.0;
  bool has_cached_ = false;
};

/// Per-item seed: master seed XOR item index.
constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) noexcept { return master ^ index; }

}  // namespace oodbench

#pragma once

#include <cmath>
#include <cstdint>

#include "skp/error.hpp"

namespace skp {

/// Counter-based pseudo-random stream. Each draw hashes (key, counter) with
/// the splitmix64 finalizer, so a given (seed, stream) pair always produces
/// the same sequence regardless of platform or call site. Streams with
/// different ids are decorrelated even for nearby seeds.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed, std::uint64_t stream = 0)
      : key_(mix(seed ^ mix(stream + 0x9E3779B97F4A7C15ull))) {}

  std::uint64_t next_u64() {
    std::uint64_t z = key_ + (++counter_) * 0x9E3779B97F4A7C15ull;
    return mix(z);
  }

  /// Uniform double in [0, 1) with 53 random bits.
  double next_double() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  /// Uniform integer in [0, bound) via the multiply-shift reduction.
  std::uint64_t next_below(std::uint64_t bound) {
    if (bound == 0) throw invalid_input("RngStream::next_below: bound must be positive");
    return static_cast<std::uint64_t>(
        (static_cast<unsigned __int128>(next_u64()) * bound) >> 64);
  }

  /// Standard normal draw (Box-Muller; the second variate is cached).
  double next_normal() {
    if (has_cached_) {
      has_cached_ = false;
      return cached_;
    }
    double u1;
    do {
      u1 = next_double();
    } while (u1 <= 0.0);
    const double u2 = next_double();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 6.283185307179586476925286766559 * u2;
    cached_ = r * std::sin(a);
    has_cached_ = true;
    return r * std::cos(a);
  }

 private:
  static std::uint64_t mix(std::uint64_t z) {
    z ^= z >> 30;
    z *= 0xBF58476D1CE4E5B9ull;
    z ^= z >> 27;
    z *= 0x94D049BB133111EBull;
    z ^= z >> 31;
    return z;
  }

  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  double cached_ = 0.0;
  bool has_cached_ = false;
};

/// Stream ids used to keep solution generation independent of solver draws.
inline constexpr std::uint64_t kSolutionStream = 0x534f4c5645ull;  // "SOLVE"
inline constexpr std::uint64_t kProbeStream = 0x50524f4245ull;     // "PROBE"

}  // namespace skp

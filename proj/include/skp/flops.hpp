#pragma once

#include <algorithm>
#include <cstdint>

#include "skp/error.hpp"
#include "skp/samplers.hpp"

namespace skp {

enum class Method { kKaczmarz, kCoordinateDescent, kGeneral };

/// Per-iteration flop cost model. The counts assume dense operators and are
/// the leading-order figures used for the error-versus-flops axis; they are
/// charged per accepted step regardless of what the implementation exploits
/// (sparsity, single-coordinate updates).
struct FlopModel {
  Method method = Method::kGeneral;
  Index tau = 1;
  Index q = 1;
  Index m = 1;
  Index n = 1;
};

inline std::uint64_t flops_per_iteration(const FlopModel& fm, RuleKind rule) {
  if (fm.tau < 1 || fm.q < 1 || fm.m < 1 || fm.n < 1)
    throw invalid_input("flops_per_iteration: dimensions must be >= 1");
  const std::uint64_t tau = static_cast<std::uint64_t>(fm.tau);
  const std::uint64_t q = static_cast<std::uint64_t>(fm.q);
  const std::uint64_t m = static_cast<std::uint64_t>(fm.m);
  const std::uint64_t n = static_cast<std::uint64_t>(fm.n);
  const bool fixed = !rule_is_adaptive(rule);

  switch (fm.method) {
    case Method::kKaczmarz:
      if (fixed) return 2 * std::min(n, m) + 2 * n;
      switch (rule) {
        case RuleKind::kMaxDistance: return 3 * m + 2 * n;
        case RuleKind::kProportionalToLoss: return 5 * m + 2 * n;
        case RuleKind::kCapped: return 9 * m + 2 * n;
        default: break;
      }
      break;
    case Method::kCoordinateDescent:
      if (fixed) return 2 * n;
      switch (rule) {
        case RuleKind::kMaxDistance: return 3 * n;
        case RuleKind::kProportionalToLoss: return 5 * n;
        case RuleKind::kCapped: return 9 * n;
        default: break;
      }
      break;
    case Method::kGeneral:
      if (fixed) return 2 * tau * std::min(n, tau * q) + 2 * tau * n;
      switch (rule) {
        case RuleKind::kMaxDistance:
          return tau > 1 ? (2 * tau * tau + 2 * tau) * q + 2 * tau * n : 3 * q + 2 * n;
        case RuleKind::kProportionalToLoss:
          return (2 * tau * tau + 2 * tau + 1) * q + 2 * tau * n;
        case RuleKind::kCapped:
          return (2 * tau * tau + 2 * tau + 5) * q + 2 * tau * n;
        default: break;
      }
      break;
  }
  throw invalid_input("flops_per_iteration: unknown rule");
}

}  // namespace skp

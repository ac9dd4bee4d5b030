#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "skp/error.hpp"
#include "skp/rng.hpp"
#include "skp/sketch.hpp"

namespace skp {

enum class RuleKind {
  kFixed,
  kUniform,
  kNormProportional,
  kMaxDistance,
  kProportionalToLoss,
  kCapped,
};

inline bool rule_is_adaptive(RuleKind k) {
  return k == RuleKind::kMaxDistance || k == RuleKind::kProportionalToLoss ||
         k == RuleKind::kCapped;
}

inline const char* rule_name(RuleKind k) {
  switch (k) {
    case RuleKind::kFixed: return "fixed";
    case RuleKind::kUniform: return "uniform";
    case RuleKind::kNormProportional: return "rownorm";
    case RuleKind::kMaxDistance: return "maxdist";
    case RuleKind::kProportionalToLoss: return "proportional";
    case RuleKind::kCapped: return "capped";
  }
  return "?";
}

/// Index-selection rule. Fixed carries its own distribution; Capped carries
/// the cap parameter theta and, optionally, an explicit reference
/// distribution (the norm-proportional one is used when absent).
struct SamplingRule {
  RuleKind kind = RuleKind::kUniform;
  Eigen::VectorXd p;      // kFixed: sampling distribution; kCapped: reference
  double theta = 0.5;     // kCapped

  static SamplingRule uniform() { return {RuleKind::kUniform, {}, 0.0}; }
  static SamplingRule norm_proportional() { return {RuleKind::kNormProportional, {}, 0.0}; }
  static SamplingRule max_distance() { return {RuleKind::kMaxDistance, {}, 0.0}; }
  static SamplingRule proportional_to_loss() { return {RuleKind::kProportionalToLoss, {}, 0.0}; }
  static SamplingRule fixed(Eigen::VectorXd dist) {
    return {RuleKind::kFixed, std::move(dist), 0.0};
  }
  static SamplingRule capped(double theta, Eigen::VectorXd reference = {}) {
    if (!(theta >= 0.0 && theta <= 1.0))
      throw invalid_input("SamplingRule: theta must lie in [0, 1]");
    return {RuleKind::kCapped, std::move(reference), theta};
  }
};

inline void check_simplex(const Eigen::VectorXd& p) {
  if (p.size() < 1) throw invalid_input("probability vector is empty");
  if (p.minCoeff() < 0.0) throw invalid_input("probability vector has a negative entry");
  if (std::abs(p.sum() - 1.0) > 1e-12)
    throw invalid_input("probability vector does not sum to 1 within 1e-12");
}

/// Walker/Vose alias table: O(q) construction, O(1) per draw.
class AliasTable {
 public:
  explicit AliasTable(const Eigen::VectorXd& p) {
    check_simplex(p);
    const Index q = p.size();
    prob_.resize(q);
    alias_.resize(q);
    std::vector<Index> small, large;
    std::vector<double> scaled(q);
    for (Index i = 0; i < q; ++i) {
      scaled[i] = p[i] * static_cast<double>(q);
      (scaled[i] < 1.0 ? small : large).push_back(i);
    }
    while (!small.empty() && !large.empty()) {
      const Index s = small.back();
      small.pop_back();
      const Index l = large.back();
      prob_[s] = scaled[s];
      alias_[s] = l;
      scaled[l] -= 1.0 - scaled[s];
      if (scaled[l] < 1.0) {
        large.pop_back();
        small.push_back(l);
      }
    }
    for (Index l : large) {
      prob_[l] = 1.0;
      alias_[l] = l;
    }
    for (Index s : small) {  // leftovers from rounding
      prob_[s] = 1.0;
      alias_[s] = s;
    }
  }

  Index draw(RngStream& rng) const {
    const Index q = static_cast<Index>(prob_.size());
    const Index i = static_cast<Index>(rng.next_below(static_cast<std::uint64_t>(q)));
    return rng.next_double() < prob_[i] ? i : alias_[i];
  }

 private:
  std::vector<double> prob_;
  std::vector<Index> alias_;
};

/// Draws from a fixed distribution via a freshly built alias table. Rule
/// objects inside the solver build the table once; this form covers the
/// one-off use.
inline Index sample_fixed(const Eigen::VectorXd& p, RngStream& rng) {
  return AliasTable(p).draw(rng);
}

/// Smallest index attaining the maximal loss, or nullopt when every loss is
/// below abs_tol (solution reached).
inline std::optional<Index> select_max_distance(const Eigen::VectorXd& f,
                                                double abs_tol = 1e-14) {
  if (f.size() < 1) throw invalid_input("select_max_distance: empty loss vector");
  if (f.minCoeff() < 0.0) throw invalid_input("select_max_distance: negative loss");
  Index best = 0;
  for (Index i = 1; i < f.size(); ++i)
    if (f[i] > f[best]) best = i;
  if (f[best] <= abs_tol) return std::nullopt;
  return best;
}

/// Inversion by sequential search over the unnormalized losses: draws
/// r in [0, sum f) and scans prefix sums. nullopt when sum f <= abs_tol.
inline std::optional<Index> sample_proportional(const Eigen::VectorXd& f, RngStream& rng,
                                                double abs_tol = 1e-14) {
  if (f.size() < 1) throw invalid_input("sample_proportional: empty loss vector");
  if (f.minCoeff() < 0.0) throw invalid_input("sample_proportional: negative loss");
  const double total = f.sum();
  if (total <= abs_tol) return std::nullopt;
  const double r = rng.next_double() * total;
  double acc = 0.0;
  for (Index i = 0; i < f.size(); ++i) {
    acc += f[i];
    if (r < acc) return i;
  }
  return f.size() - 1;  // r landed on the rounding slack past the last prefix
}

/// Capped rule: threshold t = theta * max f + (1 - theta) * <reference, f>,
/// candidate set W = { i : f_i >= t } (never empty, the argmax qualifies),
/// then loss-proportional sampling restricted to W. Returns the index and
/// |W|; nullopt when max f <= abs_tol.
inline std::optional<std::pair<Index, Index>> sample_capped(const Eigen::VectorXd& f,
                                                            const Eigen::VectorXd& reference,
                                                            double theta, RngStream& rng,
                                                            double abs_tol = 1e-14) {
  if (f.size() < 1) throw invalid_input("sample_capped: empty loss vector");
  if (f.minCoeff() < 0.0) throw invalid_input("sample_capped: negative loss");
  if (reference.size() != f.size())
    throw invalid_input("sample_capped: reference length mismatch");
  check_simplex(reference);
  if (!(theta >= 0.0 && theta <= 1.0))
    throw invalid_input("sample_capped: theta must lie in [0, 1]");

  Index arg_max = 0;
  for (Index i = 1; i < f.size(); ++i)
    if (f[i] > f[arg_max]) arg_max = i;
  if (f[arg_max] <= abs_tol) return std::nullopt;

  const double threshold = theta * f[arg_max] + (1.0 - theta) * reference.dot(f);
  double in_set_total = 0.0;
  Index w_size = 0;
  for (Index i = 0; i < f.size(); ++i) {
    if (f[i] >= threshold) {
      in_set_total += f[i];
      ++w_size;
    }
  }
  if (w_size == 0 || !(in_set_total > 0.0)) return std::make_pair(arg_max, Index{1});

  const double r = rng.next_double() * in_set_total;
  double acc = 0.0;
  Index last = arg_max;
  for (Index i = 0; i < f.size(); ++i) {
    if (f[i] < threshold) continue;
    acc += f[i];
    last = i;
    if (r < acc) return std::make_pair(i, w_size);
  }
  return std::make_pair(last, w_size);
}

/// gamma = 1 / max_i sum_{j != i} p_j = 1 / (1 - min_i p_i); the boost factor
/// adaptive rules earn because the just-used index is never re-chosen.
inline double gamma_factor(const Eigen::VectorXd& p) {
  check_simplex(p);
  if (p.size() < 2) throw invalid_input("gamma_factor: needs q >= 2");
  if (p.maxCoeff() >= 1.0 - 1e-15)
    throw invalid_input("gamma_factor: a point mass makes q effectively 1");
  return 1.0 / (1.0 - p.minCoeff());
}

/// A rule bound to a concrete sketch family: fixed distributions get their
/// alias table here, the norm-proportional and default capped reference
/// vectors are resolved from the precomputed Gram traces.
class Sampler {
 public:
  Sampler(const SamplingRule& rule, const PrecomputedOperators& ops) : kind_(rule.kind) {
    const Index q = ops.q();
    switch (kind_) {
      case RuleKind::kFixed:
        if (rule.p.size() != q) throw invalid_input("Sampler: fixed distribution length mismatch");
        p_ = rule.p;
        alias_.emplace(p_);
        break;
      case RuleKind::kUniform:
        p_ = Eigen::VectorXd::Constant(q, 1.0 / static_cast<double>(q));
        break;
      case RuleKind::kNormProportional:
        p_ = ops.norm_proportional_p();
        alias_.emplace(p_);
        break;
      case RuleKind::kCapped:
        theta_ = rule.theta;
        p_ = rule.p.size() ? rule.p : ops.norm_proportional_p();
        if (p_.size() != q) throw invalid_input("Sampler: capped reference length mismatch");
        check_simplex(p_);
        break;
      default:
        break;
    }
  }

  RuleKind kind() const { return kind_; }
  bool adaptive() const { return rule_is_adaptive(kind_); }
  double theta() const { return theta_; }
  const Eigen::VectorXd& distribution() const { return p_; }

  /// Draw for fixed rules; no losses involved.
  Index draw_fixed(RngStream& rng) const {
    if (kind_ == RuleKind::kUniform)
      return static_cast<Index>(rng.next_below(static_cast<std::uint64_t>(p_.size())));
    return alias_->draw(rng);
  }

  struct Pick {
    Index index;
    Index w_size;  // capped candidate-set size; q elsewhere
  };

  /// Selection from the current losses; nullopt signals convergence.
  std::optional<Pick> pick(const Eigen::VectorXd& f, double abs_tol, RngStream& rng) const {
    switch (kind_) {
      case RuleKind::kMaxDistance: {
        auto i = select_max_distance(f, abs_tol);
        if (!i) return std::nullopt;
        return Pick{*i, f.size()};
      }
      case RuleKind::kProportionalToLoss: {
        auto i = sample_proportional(f, rng, abs_tol);
        if (!i) return std::nullopt;
        return Pick{*i, f.size()};
      }
      case RuleKind::kCapped: {
        auto iw = sample_capped(f, p_, theta_, rng, abs_tol);
        if (!iw) return std::nullopt;
        return Pick{iw->first, iw->second};
      }
      default: {
        if (f.maxCoeff() <= abs_tol) return std::nullopt;
        return Pick{draw_fixed(rng), f.size()};
      }
    }
  }

  /// E_{p^k}[f] for this rule's conditional distribution at the current loss
  /// vector; the numerator of the expected step size factor.
  double expected_loss(const Eigen::VectorXd& f) const {
    switch (kind_) {
      case RuleKind::kUniform:
        return f.mean();
      case RuleKind::kFixed:
      case RuleKind::kNormProportional:
        return p_.dot(f);
      case RuleKind::kMaxDistance:
        return f.maxCoeff();
      case RuleKind::kProportionalToLoss: {
        const double total = f.sum();
        return total > 0.0 ? f.squaredNorm() / total : 0.0;
      }
      case RuleKind::kCapped: {
        const double threshold = theta_ * f.maxCoeff() + (1.0 - theta_) * p_.dot(f);
        double num = 0.0, den = 0.0;
        for (Index i = 0; i < f.size(); ++i) {
          if (f[i] >= threshold) {
            num += f[i] * f[i];
            den += f[i];
          }
        }
        return den > 0.0 ? num / den : 0.0;
      }
    }
    return 0.0;
  }

 private:
  RuleKind kind_;
  Eigen::VectorXd p_;
  double theta_ = 0.5;
  std::optional<AliasTable> alias_;
};

}  // namespace skp

#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <vector>

#include "skp/error.hpp"
#include "skp/flops.hpp"
#include "skp/linsys.hpp"
#include "skp/rng.hpp"
#include "skp/samplers.hpp"
#include "skp/sketch.hpp"

namespace skp {

enum class RunStatus { kConverged, kMaxIters };

struct StopCriteria {
  Index max_iters = 1000;
  /// On ||x - x*||_B^2 when x* is known, otherwise on max_i f_i.
  double error_tol = 0.0;
  /// Period of the direct recomputation of every sketched residual; guards
  /// the auxiliary recursion against floating-point drift. <= 0 disables.
  Index refresh_every = 1000;
};

struct RunOptions {
  bool record_trace = false;
  /// Maintain all residuals (hence losses and step factors) even for fixed
  /// rules. Implied by record_trace.
  bool instrument_losses = false;
  /// Verify the one-step identities at every step; test and debug use only.
  bool check_identities = false;
};

struct TraceRow {
  Index k = 0;          // completed steps when this row was recorded
  int index = -1;       // sketch chosen by the step that produced this state
  double err_b_sq = std::numeric_limits<double>::quiet_NaN();
  double sum_loss = std::numeric_limits<double>::quiet_NaN();
  double max_loss = std::numeric_limits<double>::quiet_NaN();
  double step_factor = std::numeric_limits<double>::quiet_NaN();
  std::uint64_t flops = 0;
};

struct TrialTrace {
  std::vector<TraceRow> rows;
  RunStatus status = RunStatus::kMaxIters;
  Index iterations = 0;
  double final_err_b_sq = std::numeric_limits<double>::quiet_NaN();
  std::uint64_t flops = 0;
  double max_residual_drift = 0.0;
};

/// Rows whose error is at or below this scale-aware floor are excluded from
/// step-factor statistics; the ratio is numerically meaningless past it.
inline double step_factor_exclusion_tol(const LinearSystem& sys) {
  return 1e-12 * (1.0 + sys.b.squaredNorm());
}

/// Loss level at or below which the iterate solves the sketched system.
inline double convergence_tol(const LinearSystem& sys) {
  return 1e-14 * (1.0 + sys.b.squaredNorm());
}

/// Sigma p_i f_i / err for one trace point; nullopt when the error is at the
/// exclusion floor.
inline std::optional<double> step_size_factor(double expected_loss, double err_b_sq,
                                              double exclusion_tol) {
  if (!(err_b_sq > exclusion_tol)) return std::nullopt;
  return expected_loss / err_b_sq;
}

enum class MaintainMode { kAllAux, kChosenDirect };

struct SolverState {
  Eigen::VectorXd x;
  Eigen::MatrixXd r;  // tau x q sketched residuals (kAllAux mode)
  Index k = 0;
  std::uint64_t flops = 0;
  int last_index = -1;
  RngStream rng;
  MaintainMode mode = MaintainMode::kAllAux;
  double loss_tol = 0.0;
  double max_drift = 0.0;
};

inline SolverState init_state(const LinearSystem& sys, const PrecomputedOperators& ops,
                              const Eigen::VectorXd& x0, RngStream rng) {
  if (x0.size() != sys.cols()) throw invalid_input("init_state: x0 has the wrong length");
  SolverState st{.x = x0, .r = ops.residuals_at(x0), .rng = rng};
  st.loss_tol = convergence_tol(sys);
  return st;
}

inline Eigen::VectorXd sketched_losses(const SolverState& st) {
  return st.r.colwise().squaredNorm().transpose();
}

struct StepReport {
  bool converged = false;
  Index index = -1;
  Index w_size = 0;
  double f_before = 0.0;
  double err_drop = std::numeric_limits<double>::quiet_NaN();
  double dx_b_sq = std::numeric_limits<double>::quiet_NaN();
  double f_after = std::numeric_limits<double>::quiet_NaN();
};

inline Method method_for(const PrecomputedOperators& ops) {
  switch (ops.kind()) {
    case SketchKind::kRowIdentity: return Method::kKaczmarz;
    case SketchKind::kColumnOfA: return Method::kCoordinateDescent;
    default: return Method::kGeneral;
  }
}

inline FlopModel flop_model_for(const LinearSystem& sys, const PrecomputedOperators& ops) {
  return FlopModel{method_for(ops), ops.tau(), ops.q(), sys.rows(), sys.cols()};
}

/// One projection step: losses, selection, iterate update, residual
/// maintenance, model-flop accounting. Leaves the state untouched and
/// reports convergence when the selection finds no loss above tolerance.
inline StepReport step(const LinearSystem& sys, const PrecomputedOperators& ops,
                       const Sampler& sampler, SolverState& st,
                       const RunOptions& opts = {}, Index refresh_every = 1000,
                       std::uint64_t model_flops_per_iter = 0) {
  StepReport rep;
  if (model_flops_per_iter == 0)
    model_flops_per_iter = flops_per_iteration(flop_model_for(sys, ops), sampler.kind());

  Index ik = -1;
  Eigen::VectorXd r_old;
  if (st.mode == MaintainMode::kAllAux) {
    const Eigen::VectorXd f = sketched_losses(st);
    auto pick = sampler.pick(f, st.loss_tol, st.rng);
    if (!pick) {
      rep.converged = true;
      return rep;
    }
    ik = pick->index;
    rep.w_size = pick->w_size;
    r_old = st.r.col(ik);
  } else {
    ik = sampler.draw_fixed(st.rng);
    r_old = ops.residual_at(ik, st.x);
  }
  rep.index = ik;
  rep.f_before = r_old.squaredNorm();

  const bool track_err = sys.x_star.has_value() && opts.check_identities;
  double err_before = std::numeric_limits<double>::quiet_NaN();
  if (track_err) err_before = sys.error_b_sq(st.x);

  Eigen::VectorXd x_prev;
  if (opts.check_identities) x_prev = st.x;

  ops.apply_update(ik, r_old, st.x);

  if (st.mode == MaintainMode::kAllAux) {
    ops.update_residuals(st.r, ik, r_old);
    if (refresh_every > 0 && (st.k + 1) % refresh_every == 0) {
      Eigen::MatrixXd direct = ops.residuals_at(st.x);
      const double drift = (st.r - direct).colwise().norm().maxCoeff();
      if (drift > st.max_drift) st.max_drift = drift;
      st.r = std::move(direct);
    }
  }

  st.flops += model_flops_per_iter;
  st.last_index = static_cast<int>(ik);
  ++st.k;

  if (track_err) rep.err_drop = err_before - sys.error_b_sq(st.x);
  if (opts.check_identities) {
    rep.dx_b_sq = b_norm_sq(st.x - x_prev, sys.inner, &sys.a);
    rep.f_after = ops.residual_at(ik, st.x).squaredNorm();
  }
  return rep;
}

/// Full solve loop around `step`. Adaptive rules always maintain the whole
/// residual set through the auxiliary recursion; fixed rules do so only when
/// tau q <= n or when instrumentation needs the losses, falling back to
/// computing the chosen residual directly otherwise.
inline TrialTrace run(const LinearSystem& sys, const PrecomputedOperators& ops,
                      const SamplingRule& rule, const StopCriteria& stop,
                      const Eigen::VectorXd& x0, RngStream rng,
                      const RunOptions& opts = {}) {
  const Sampler sampler(rule, ops);
  SolverState st = init_state(sys, ops, x0, rng);
  const bool instrument = opts.record_trace || opts.instrument_losses || opts.check_identities;
  if (!sampler.adaptive() && !instrument && ops.tau() * ops.q() > sys.cols())
    st.mode = MaintainMode::kChosenDirect;

  const std::uint64_t per_iter = flops_per_iteration(flop_model_for(sys, ops), sampler.kind());
  const double exclusion = step_factor_exclusion_tol(sys);
  const bool has_xs = sys.x_star.has_value();

  TrialTrace trace;
  trace.status = RunStatus::kMaxIters;

  auto record = [&](int chosen_index) {
    if (!opts.record_trace) return;
    TraceRow row;
    row.k = st.k;
    row.index = chosen_index;
    row.flops = st.flops;
    if (has_xs) row.err_b_sq = sys.error_b_sq(st.x);
    if (st.mode == MaintainMode::kAllAux) {
      const Eigen::VectorXd f = sketched_losses(st);
      row.sum_loss = f.sum();
      row.max_loss = f.maxCoeff();
      if (has_xs) {
        auto sf = step_size_factor(sampler.expected_loss(f), row.err_b_sq, exclusion);
        if (sf) row.step_factor = *sf;
      }
    }
    trace.rows.push_back(row);
  };

  record(-1);
  while (st.k < stop.max_iters) {
    const StepReport rep = step(sys, ops, sampler, st, opts, stop.refresh_every, per_iter);
    if (rep.converged) {
      trace.status = RunStatus::kConverged;
      break;
    }
    record(static_cast<int>(rep.index));

    if (stop.error_tol > 0.0) {
      if (has_xs) {
        if (sys.error_b_sq(st.x) <= stop.error_tol) {
          trace.status = RunStatus::kConverged;
          break;
        }
      } else if (st.mode == MaintainMode::kAllAux) {
        if (sketched_losses(st).maxCoeff() <= stop.error_tol) {
          trace.status = RunStatus::kConverged;
          break;
        }
      } else if (stop.refresh_every > 0 && st.k % stop.refresh_every == 0) {
        if (ops.residuals_at(st.x).colwise().squaredNorm().maxCoeff() <= stop.error_tol) {
          trace.status = RunStatus::kConverged;
          break;
        }
      }
    }
  }

  trace.iterations = st.k;
  trace.flops = st.flops;
  trace.max_residual_drift = st.max_drift;
  if (has_xs) trace.final_err_b_sq = sys.error_b_sq(st.x);
  return trace;
}

}  // namespace skp

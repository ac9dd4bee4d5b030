#pragma once

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <map>
#include <string>

#include "skp/error.hpp"
#include "skp/linsys.hpp"
#include "skp/rng.hpp"
#include "skp/samplers.hpp"
#include "skp/sketch.hpp"

namespace skp {

inline constexpr Index kDenseEigGuard = 2000;
inline constexpr double kEigZeroCutoff = 1e-10;

namespace detail {

/// Smallest eigenvalue above cutoff * lambda_max of a symmetric matrix.
inline double lambda_min_plus(const Eigen::MatrixXd& sym) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es((sym + sym.transpose()) / 2.0,
                                                    Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) throw invalid_input("lambda_min_plus: eigensolver failed");
  const Eigen::VectorXd& lam = es.eigenvalues();
  const double lam_max = lam.maxCoeff();
  if (!(lam_max > 0.0)) return 0.0;
  const double cutoff = kEigZeroCutoff * lam_max;
  double best = lam_max;
  for (Index i = 0; i < lam.size(); ++i)
    if (lam[i] > cutoff && lam[i] < best) best = lam[i];
  return best;
}

}  // namespace detail

/// sigma_p^2 = lambda_min^+(E[Z_i]) for the fixed distribution p: assembles
/// M = A^T (sum_i p_i H_i) A = sum_i p_i D_i^T D_i and solves the generalized
/// problem M v = lambda B v restricted to range(B^{-1} A^T). Guarded to
/// dense-capable instances (n <= 2000).
inline double sigma_p_sq(const LinearSystem& sys, const PrecomputedOperators& ops,
                         const Eigen::VectorXd& p) {
  check_simplex(p);
  if (p.size() != ops.q()) throw invalid_input("sigma_p_sq: p length mismatch");
  const Index n = sys.cols();
  if (n > kDenseEigGuard)
    throw unsupported("sigma_p_sq: instance too large for a dense eigensolve");

  switch (ops.kind()) {
    case SketchKind::kColumnOfA: {
      // E[Z] is similar to P Atil^T Atil; use the symmetric congruence
      // P^{1/2} (Atil^T Atil) P^{1/2}, whose nonzero spectrum agrees.
      Eigen::MatrixXd g = ops.g_is_sparse() ? Eigen::MatrixXd(ops.g_sparse())
                                            : ops.g_dense();
      const Eigen::VectorXd sqrtp = p.cwiseSqrt();
      return detail::lambda_min_plus(sqrtp.asDiagonal() * g * sqrtp.asDiagonal());
    }
    case SketchKind::kRowIdentity: {
      if (static_cast<std::int64_t>(sys.rows()) * n > kDenseEntryLimit)
        throw unsupported("sigma_p_sq: instance too large for a dense eigensolve");
      DenseMat ad = sys.a.to_dense();
      Eigen::VectorXd w(ops.q());
      for (Index i = 0; i < ops.q(); ++i) w[i] = std::sqrt(p[i]) * ops.inv_nu(i);
      Eigen::MatrixXd scaled = w.asDiagonal() * ad;  // sqrt(p_i) * D_i rows
      Eigen::MatrixXd msym = scaled.transpose() * scaled;
      if (sys.inner.kind() == InnerProductKind::kExplicitSpd) {
        const Eigen::MatrixXd l = sys.inner.llt().matrixL();
        const Eigen::MatrixXd li = l.triangularView<Eigen::Lower>().solve(
            Eigen::MatrixXd::Identity(n, n));
        msym = li * msym * li.transpose();
      }
      return detail::lambda_min_plus(msym);
    }
    default: {
      Eigen::MatrixXd msym = Eigen::MatrixXd::Zero(n, n);
      const Index tau = ops.tau();
      for (Index i = 0; i < ops.q(); ++i) {
        const auto di = ops.d_stack().middleRows(i * tau, tau);
        msym.noalias() += p[i] * di.transpose() * di;
      }
      if (sys.inner.kind() == InnerProductKind::kExplicitSpd) {
        const Eigen::MatrixXd l = sys.inner.llt().matrixL();
        const Eigen::MatrixXd li = l.triangularView<Eigen::Lower>().solve(
            Eigen::MatrixXd::Identity(n, n));
        msym = li * msym * li.transpose();
      }
      return detail::lambda_min_plus(msym);
    }
  }
}

/// Random-probe estimate of sigma_inf^2 = min_v max_i f_i over unit
/// directions in range(B^{-1} A^T). Each probe evaluates
/// max_i ||C_i^T S_i^T A v||^2 / ||v||_B^2; the minimum over probes is an
/// upper bound on the true min-max, reported as such.
inline double estimate_sigma_inf_sq(const LinearSystem& sys, const PrecomputedOperators& ops,
                                    Index n_probes, RngStream& rng) {
  if (n_probes < 1) throw invalid_input("estimate_sigma_inf_sq: need at least one probe");
  double best = std::numeric_limits<double>::infinity();
  const Index m = sys.rows();
  for (Index t = 0; t < n_probes; ++t) {
    Eigen::VectorXd g(m);
    for (Index i = 0; i < m; ++i) g[i] = rng.next_normal();
    Eigen::VectorXd v = sys.a.transpose_times(g);
    if (sys.inner.kind() == InnerProductKind::kExplicitSpd) v = sys.inner.solve(v);
    const double denom = b_norm_sq(v, sys.inner, &sys.a);
    if (!(denom > 0.0)) continue;  // degenerate draw
    const double ratio =
        ops.residuals_homogeneous(v).colwise().squaredNorm().maxCoeff() / denom;
    best = std::min(best, ratio);
  }
  if (!std::isfinite(best))
    throw invalid_input("estimate_sigma_inf_sq: all probe directions degenerate");
  return best;
}

struct SpectralInputs {
  double sigma_p_sq = 0.0;        // for the reference/fixed distribution
  double sigma_u_sq = 0.0;        // for the uniform distribution
  double sigma_inf_sq_est = 0.0;  // probe upper bound
  double gamma = 1.0;
  double theta = 0.5;
};

/// One bound per rule, as the per-step contraction factor 1 - sigma^2 form.
/// Both capped bounds are reported; which is tighter is instance-dependent.
inline std::map<std::string, double> rate_bounds(const SpectralInputs& in) {
  auto clamp01 = [](double v) { return std::clamp(v, 0.0, 1.0); };
  std::map<std::string, double> out;
  out["fixed"] = clamp01(1.0 - in.sigma_p_sq);
  out["maxdist"] = clamp01(1.0 - in.sigma_inf_sq_est);
  out["proportional"] = clamp01(1.0 - 2.0 * in.sigma_u_sq);
  out["capped_convex"] =
      clamp01(1.0 - in.theta * in.sigma_inf_sq_est - (1.0 - in.theta) * in.sigma_p_sq);
  out["capped_gamma"] =
      clamp01(1.0 - (in.theta * in.gamma + (1.0 - in.theta)) * in.sigma_p_sq);
  return out;
}

/// Exactness check: the null space of E[H] = sum_i p_i S_i C_i C_i^T S_i^T
/// must be annihilated by A^T, i.e. lie in the left null space of A. Dense
/// diagnostic, guarded to m <= 500.
inline bool check_exactness(const LinearSystem& sys, const PrecomputedOperators& ops,
                            const Eigen::VectorXd& p) {
  check_simplex(p);
  if (p.size() != ops.q()) throw invalid_input("check_exactness: p length mismatch");
  const Index m = sys.rows();
  if (m > 500) throw unsupported("check_exactness: instance too large for the dense check");

  Eigen::MatrixXd eh = Eigen::MatrixXd::Zero(m, m);
  switch (ops.kind()) {
    case SketchKind::kRowIdentity:
      for (Index i = 0; i < m; ++i) eh(i, i) = p[i] * ops.inv_nu(i) * ops.inv_nu(i);
      break;
    case SketchKind::kColumnOfA: {
      DenseMat ad = sys.a.to_dense();
      for (Index i = 0; i < ops.q(); ++i) {
        const double w = p[i] * ops.inv_nu(i) * ops.inv_nu(i);
        if (w > 0.0) eh.noalias() += w * ad.col(i) * ad.col(i).transpose();
      }
      break;
    }
    default: {
      const Index tau = ops.tau();
      for (Index i = 0; i < ops.q(); ++i) {
        Eigen::MatrixXd sc(m, tau);  // S_i C_i
        if (ops.kind() == SketchKind::kRowBlocks) {
          sc.setZero();
          // rows of C_i scattered to the block's row positions
          const Eigen::MatrixXd& c = ops.c_factor(i).c;
          for (Index t = 0; t < tau; ++t) sc.row(ops.row_block_indices()[i][t]) = c.row(t);
        } else {
          sc = ops.custom_sketches()[i] * ops.c_factor(i).c;
        }
        eh.noalias() += p[i] * sc * sc.transpose();
      }
      break;
    }
  }

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(eh);
  if (es.info() != Eigen::Success) throw invalid_input("check_exactness: eigensolver failed");
  const double lam_max = es.eigenvalues().maxCoeff();
  if (!(lam_max > 0.0)) return sys.a.frobenius_sq() == 0.0;
  const double cutoff = kEigZeroCutoff * lam_max;
  const double a_scale = std::sqrt(sys.a.frobenius_sq());
  for (Index j = 0; j < m; ++j) {
    if (es.eigenvalues()[j] > cutoff) continue;
    const Eigen::VectorXd null_dir = es.eigenvectors().col(j);
    if (sys.a.transpose_times(null_dir).norm() > 1e-8 * (a_scale > 0 ? a_scale : 1.0))
      return false;
  }
  return true;
}

}  // namespace skp

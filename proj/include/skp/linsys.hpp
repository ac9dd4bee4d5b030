#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <cmath>
#include <optional>
#include <utility>

#include "skp/error.hpp"
#include "skp/matrix.hpp"

namespace skp {

enum class InnerProductKind { kIdentity, kGramOfA, kExplicitSpd };

/// Descriptor of the inner product <v, B w> defining the projection geometry.
/// GramOfA stands for B = A^T A and is never materialized; every use routes
/// through products with A.
class InnerProduct {
 public:
  static InnerProduct identity() { return InnerProduct(InnerProductKind::kIdentity); }
  static InnerProduct gram_of_a() { return InnerProduct(InnerProductKind::kGramOfA); }

  static InnerProduct explicit_spd(Eigen::MatrixXd b) {
    if (b.rows() != b.cols() || b.rows() < 1)
      throw invalid_input("InnerProduct: B must be square and nonempty");
    const double scale = b.norm();
    if ((b - b.transpose()).norm() > 1e-12 * (scale > 0 ? scale : 1.0))
      throw invalid_input("InnerProduct: B is not symmetric to 1e-12 relative");
    b = ((b + b.transpose()) / 2.0).eval();
    InnerProduct ip(InnerProductKind::kExplicitSpd);
    if (b.rows() <= 2000) {
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(b, Eigen::EigenvaluesOnly);
      if (es.eigenvalues().minCoeff() <= 0.0)
        throw invalid_input("InnerProduct: B has a nonpositive eigenvalue");
    }
    ip.llt_.compute(b);
    if (ip.llt_.info() != Eigen::Success)
      throw invalid_input("InnerProduct: Cholesky of B failed; B is not positive definite");
    ip.b_ = std::move(b);
    return ip;
  }

  InnerProductKind kind() const { return kind_; }
  const Eigen::MatrixXd& spd_matrix() const { return b_; }
  const Eigen::LLT<Eigen::MatrixXd>& llt() const { return llt_; }

  /// B^{-1} v. Only meaningful for Identity and ExplicitSpd.
  Eigen::VectorXd solve(const Eigen::VectorXd& v) const {
    switch (kind_) {
      case InnerProductKind::kIdentity: return v;
      case InnerProductKind::kExplicitSpd: return llt_.solve(v);
      case InnerProductKind::kGramOfA:
        throw invalid_input("InnerProduct: GramOfA has no explicit inverse");
    }
    return v;
  }

 private:
  explicit InnerProduct(InnerProductKind k) : kind_(k) {}
  InnerProductKind kind_;
  Eigen::MatrixXd b_;
  Eigen::LLT<Eigen::MatrixXd> llt_;
};

/// <v, B v>. For GramOfA this is ||A v||^2, computed without forming A^T A;
/// `a` is required in that case.
inline double b_norm_sq(const Eigen::VectorXd& v, const InnerProduct& b,
                        const Mat* a = nullptr) {
  switch (b.kind()) {
    case InnerProductKind::kIdentity:
      return v.squaredNorm();
    case InnerProductKind::kExplicitSpd:
      if (v.size() != b.spd_matrix().rows())
        throw invalid_input("b_norm_sq: vector length does not match B");
      return v.dot(b.spd_matrix() * v);
    case InnerProductKind::kGramOfA: {
      if (a == nullptr) throw invalid_input("b_norm_sq: GramOfA requires the matrix A");
      if (v.size() != a->cols())
        throw invalid_input("b_norm_sq: vector length does not match A");
      return ((*a) * v).squaredNorm();
    }
  }
  return 0.0;
}

/// Factor of a pseudoinverse: c * c^T equals the pseudoinverse of the factored
/// Gram matrix on its retained range; rank counts the kept eigenvalues.
struct PsdFactor {
  Eigen::MatrixXd c;
  int rank = 0;
};

/// Eigendecomposes a symmetric PSD matrix and returns C = V diag(kept
/// lambda^{-1/2}, 0) so that C C^T is the truncated pseudoinverse. Eigenvalues
/// at or below rel_tol * lambda_max are truncated; rel_tol defaults to
/// tau * machine epsilon.
inline PsdFactor pinv_factor(const Eigen::MatrixXd& gram, double rel_tol = -1.0) {
  const Index tau = gram.rows();
  if (tau < 1 || gram.cols() != tau)
    throw invalid_input("pinv_factor: matrix must be square and nonempty");
  const double scale = gram.norm();
  if ((gram - gram.transpose()).norm() > 1e-10 * (scale > 0 ? scale : 1.0))
    throw invalid_input("pinv_factor: matrix is not symmetric to 1e-10 relative");
  if (rel_tol < 0) rel_tol = static_cast<double>(tau) * 2.2e-16;

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es((gram + gram.transpose()) / 2.0);
  if (es.info() != Eigen::Success) throw invalid_input("pinv_factor: eigensolver failed");
  const Eigen::VectorXd& lam = es.eigenvalues();
  const double lam_max = lam.maxCoeff();
  const double cutoff = rel_tol * (lam_max > 0 ? lam_max : 0.0);
  if (lam.minCoeff() < -(cutoff > 0 ? cutoff : rel_tol))
    throw invalid_input("pinv_factor: matrix has a negative eigenvalue beyond tolerance");

  PsdFactor out;
  Eigen::VectorXd d = Eigen::VectorXd::Zero(tau);
  for (Index j = 0; j < tau; ++j) {
    if (lam[j] > cutoff && lam[j] > 0.0) {
      d[j] = 1.0 / std::sqrt(lam[j]);
      ++out.rank;
    }
  }
  out.c = es.eigenvectors() * d.asDiagonal();
  return out;
}

/// A consistent linear system A x = b with the inner product defining the
/// projection geometry and, optionally, a known solution for error tracking.
/// Immutable after construction; safe to share across threads.
struct LinearSystem {
  Mat a;
  Eigen::VectorXd b;
  InnerProduct inner;
  std::optional<Eigen::VectorXd> x_star;

  LinearSystem(Mat a_in, Eigen::VectorXd b_in, InnerProduct inner_in,
               std::optional<Eigen::VectorXd> x_star_in = std::nullopt)
      : a(std::move(a_in)),
        b(std::move(b_in)),
        inner(std::move(inner_in)),
        x_star(std::move(x_star_in)) {
    if (!a.all_finite() || !b.allFinite())
      throw invalid_input("LinearSystem: A and b must be finite");
    if (b.size() != a.rows())
      throw invalid_input("LinearSystem: b length must equal the row count of A");
    if (inner.kind() == InnerProductKind::kExplicitSpd &&
        inner.spd_matrix().rows() != a.cols())
      throw invalid_input("LinearSystem: B dimension must match the column count of A");
    if (x_star) {
      if (x_star->size() != a.cols())
        throw invalid_input("LinearSystem: x_star length must equal the column count of A");
      const double res = (a * (*x_star) - b).norm();
      if (res > 1e-8 * (1.0 + b.norm()))
        throw invalid_input("LinearSystem: x_star does not solve A x = b");
    }
  }

  Index rows() const { return a.rows(); }
  Index cols() const { return a.cols(); }

  double error_b_sq(const Eigen::VectorXd& x) const {
    if (!x_star) throw invalid_input("LinearSystem: no known solution to measure against");
    return b_norm_sq(x - *x_star, inner, &a);
  }
};

}  // namespace skp

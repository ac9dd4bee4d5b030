#pragma once

#include <Eigen/Dense>
#include <Eigen/SparseCore>
#include <algorithm>
#include <cmath>
#include <set>
#include <utility>
#include <vector>

#include "skp/error.hpp"
#include "skp/linsys.hpp"
#include "skp/matrix.hpp"

namespace skp {

enum class SketchKind { kRowIdentity, kColumnOfA, kRowBlocks, kCustomDense };

/// The finite family of sketching matrices S_1..S_q. RowIdentity selects
/// single rows (Kaczmarz), ColumnOfA selects columns of A as sketches
/// (coordinate descent, requires the GramOfA inner product), RowBlocks
/// selects disjoint row blocks of a common size, and CustomDense carries
/// arbitrary dense m x tau sketches.
class SketchSet {
 public:
  static SketchSet row_identity() { return SketchSet(SketchKind::kRowIdentity); }
  static SketchSet column_of_a() { return SketchSet(SketchKind::kColumnOfA); }

  static SketchSet row_blocks(std::vector<std::vector<Index>> blocks) {
    if (blocks.empty()) throw invalid_input("SketchSet: empty block partition");
    const std::size_t tau = blocks.front().size();
    if (tau == 0) throw invalid_input("SketchSet: blocks must be nonempty");
    std::set<Index> seen;
    for (const auto& blk : blocks) {
      if (blk.size() != tau)
        throw invalid_input("SketchSet: every block must have exactly tau indices");
      for (Index r : blk) {
        if (r < 0) throw invalid_input("SketchSet: negative row index");
        if (!seen.insert(r).second)
          throw invalid_input("SketchSet: duplicate row index across blocks");
      }
    }
    SketchSet s(SketchKind::kRowBlocks);
    s.blocks_ = std::move(blocks);
    return s;
  }

  static SketchSet custom_dense(std::vector<Eigen::MatrixXd> sketches) {
    if (sketches.empty()) throw invalid_input("SketchSet: empty sketch list");
    const Index tau = sketches.front().cols();
    if (tau < 1) throw invalid_input("SketchSet: sketches must have at least one column");
    for (const auto& s : sketches)
      if (s.cols() != tau || s.rows() != sketches.front().rows())
        throw invalid_input("SketchSet: all sketches must share the same shape");
    SketchSet s(SketchKind::kCustomDense);
    s.custom_ = std::move(sketches);
    return s;
  }

  SketchKind kind() const { return kind_; }
  const std::vector<std::vector<Index>>& blocks() const { return blocks_; }
  const std::vector<Eigen::MatrixXd>& custom() const { return custom_; }

  /// Builds the contiguous row partition used by the block:TAU method; the
  /// remainder rows past the last full block are left out.
  static SketchSet contiguous_row_blocks(Index m, Index tau) {
    if (tau < 1 || m < tau)
      throw invalid_input("SketchSet: block size must be in [1, m]");
    std::vector<std::vector<Index>> blocks;
    for (Index start = 0; start + tau <= m; start += tau) {
      std::vector<Index> blk(tau);
      for (Index t = 0; t < tau; ++t) blk[t] = start + t;
      blocks.push_back(std::move(blk));
    }
    return row_blocks(std::move(blocks));
  }

 private:
  explicit SketchSet(SketchKind k) : kind_(k) {}
  SketchKind kind_;
  std::vector<std::vector<Index>> blocks_;
  std::vector<Eigen::MatrixXd> custom_;
};

/// Fraction of filled pairwise entries below which the grid stays sparse.
inline constexpr double kSparseGridFillCutoff = 0.25;

/// Everything the efficient iteration precomputes: pseudoinverse factors C_i,
/// update directions B^{-1} A^T S_i C_i, the q x q grid of pairwise tau x tau
/// interaction blocks, and the operators for computing sketched residuals
/// directly from an iterate. Immutable after construction and shared
/// read-only across concurrent trials. The LinearSystem must outlive this
/// object.
class PrecomputedOperators {
 public:
  static PrecomputedOperators precompute(const LinearSystem& sys, const SketchSet& sketches);

  SketchKind kind() const { return kind_; }
  Index q() const { return q_; }
  Index tau() const { return tau_; }
  const LinearSystem& system() const { return *sys_; }

  /// tr(S_i^T A B^{-1} A^T S_i); squared row norms for Kaczmarz and squared
  /// column norms for coordinate descent.
  const Eigen::VectorXd& gram_trace() const { return gram_trace_; }

  Eigen::VectorXd norm_proportional_p() const {
    const double total = gram_trace_.sum();
    if (!(total > 0.0))
      throw invalid_input("norm_proportional_p: all sketches have zero energy");
    return gram_trace_ / total;
  }

  double inv_nu(Index i) const { return inv_nu_[i]; }
  const PsdFactor& c_factor(Index i) const { return c_factors_[i]; }

  bool g_is_sparse() const { return g_sparse_flag_; }
  const Eigen::MatrixXd& g_dense() const { return g_dense_; }
  const Eigen::SparseMatrix<double>& g_sparse() const { return g_sparse_; }

  /// Pairwise block G_ij = C_i^T S_i^T A B^{-1} A^T S_j C_j as a dense
  /// tau x tau matrix (test and analysis access path).
  Eigen::MatrixXd g_block(Index i, Index j) const {
    check_index(i);
    check_index(j);
    if (tau_ == 1) {
      double v = g_dense_.size() ? g_dense_(i, j) : g_sparse_.coeff(i, j);
      Eigen::MatrixXd out(1, 1);
      out(0, 0) = v;
      return out;
    }
    return g_dense_.block(i * tau_, j * tau_, tau_, tau_);
  }

  /// All sketched residuals R_i = C_i^T S_i^T (A x - b), returned as the
  /// tau x q matrix whose column i is R_i.
  Eigen::MatrixXd residuals_at(const Eigen::VectorXd& x) const {
    if (x.size() != sys_->cols())
      throw invalid_input("residuals_at: iterate has the wrong length");
    if (kind_ == SketchKind::kRowBlocks || kind_ == SketchKind::kCustomDense) {
      Eigen::VectorXd flat = d_stack_ * x - d_vec_;
      return Eigen::Map<Eigen::MatrixXd>(flat.data(), tau_, q_);
    }
    return residuals_from_system_residual((*sys_).a * x - sys_->b);
  }

  /// Residuals of the homogeneous system (b = 0) at direction v; used by the
  /// spectral estimators, where f_i(x* + v) = ||C_i^T S_i^T A v||^2.
  Eigen::MatrixXd residuals_homogeneous(const Eigen::VectorXd& v) const {
    if (v.size() != sys_->cols())
      throw invalid_input("residuals_homogeneous: direction has the wrong length");
    if (kind_ == SketchKind::kRowBlocks || kind_ == SketchKind::kCustomDense) {
      Eigen::VectorXd flat = d_stack_ * v;
      return Eigen::Map<Eigen::MatrixXd>(flat.data(), tau_, q_);
    }
    return residuals_from_system_residual((*sys_).a * v);
  }

  /// R_i = D_i x - d_i for a single sketch.
  Eigen::VectorXd residual_at(Index i, const Eigen::VectorXd& x) const {
    check_index(i);
    if (x.size() != sys_->cols())
      throw invalid_input("residual_at: iterate has the wrong length");
    switch (kind_) {
      case SketchKind::kRowIdentity: {
        const double r = sys_->a.row_dot(i, x) - sys_->b[i];
        return Eigen::VectorXd::Constant(1, r * inv_nu_[i]);
      }
      case SketchKind::kColumnOfA: {
        const Eigen::VectorXd r = (*sys_).a * x - sys_->b;
        double dot = 0.0;
        if (sys_->a.is_dense()) {
          dot = sys_->a.dense().col(i).dot(r);
        } else {
          for (Eigen::SparseMatrix<double>::InnerIterator it(col_access_, i); it; ++it)
            dot += it.value() * r[it.row()];
        }
        return Eigen::VectorXd::Constant(1, dot * inv_nu_[i]);
      }
      default:
        return d_stack_.middleRows(i * tau_, tau_) * x - d_vec_.segment(i * tau_, tau_);
    }
  }

  /// x <- x - U_i R_i with U_i = B^{-1} A^T S_i C_i. RowIdentity under the
  /// Euclidean inner product reuses the rows of A; ColumnOfA touches a single
  /// coordinate.
  void apply_update(Index i, const Eigen::VectorXd& r_i, Eigen::VectorXd& x) const {
    check_index(i);
    switch (kind_) {
      case SketchKind::kRowIdentity:
        if (u_cols_.size() > 0) {
          x.noalias() -= u_cols_.col(i) * r_i[0];
        } else {
          sys_->a.add_scaled_row(i, -inv_nu_[i] * r_i[0], x);
        }
        return;
      case SketchKind::kColumnOfA:
        x[i] -= inv_nu_[i] * r_i[0];
        return;
      default:
        x.noalias() -= u_stack_.middleCols(i * tau_, tau_) * r_i;
        return;
    }
  }

  /// Auxiliary recursion: R_i <- R_i - G_{i,ik} R_ik for every i, applied in
  /// place on the tau x q residual matrix.
  void update_residuals(Eigen::MatrixXd& r_mat, Index ik, const Eigen::VectorXd& r_old) const {
    check_index(ik);
    if (tau_ == 1) {
      const double r0 = r_old[0];
      if (g_dense_.size()) {
        r_mat.row(0).noalias() -= r0 * g_dense_.col(ik).transpose();
      } else {
        for (Eigen::SparseMatrix<double>::InnerIterator it(g_sparse_, ik); it; ++it)
          r_mat(0, it.row()) -= r0 * it.value();
      }
      return;
    }
    Eigen::Map<Eigen::VectorXd> flat(r_mat.data(), tau_ * q_);
    flat.noalias() -= g_dense_.middleCols(ik * tau_, tau_) * r_old;
  }

  const DenseMat& d_stack() const { return d_stack_; }
  const Eigen::VectorXd& d_vec() const { return d_vec_; }
  const std::vector<std::vector<Index>>& row_block_indices() const { return blocks_; }
  const std::vector<Eigen::MatrixXd>& custom_sketches() const { return custom_; }

 private:
  PrecomputedOperators() = default;

  void check_index(Index i) const {
    if (i < 0 || i >= q_) throw invalid_input("sketch index out of range");
  }

  /// Scales the raw Gram grid by inv_nu on both sides, then keeps it sparse
  /// only while the fill stays under the cutoff.
  void store_scaled_grid(Eigen::SparseMatrix<double> g) {
    for (Index k = 0; k < g.outerSize(); ++k)
      for (Eigen::SparseMatrix<double>::InnerIterator it(g, k); it; ++it)
        it.valueRef() *= inv_nu_[it.row()] * inv_nu_[it.col()];
    const double fill = static_cast<double>(g.nonZeros()) /
                        (static_cast<double>(q_) * static_cast<double>(q_));
    if (fill < kSparseGridFillCutoff) {
      g_sparse_ = std::move(g);
      g_sparse_.makeCompressed();
      g_sparse_flag_ = true;
    } else {
      g_dense_ = Eigen::MatrixXd(g);
    }
  }

  /// R from the full system residual r = A x - b: R_i = C_i^T (S_i^T r).
  Eigen::MatrixXd residuals_from_system_residual(const Eigen::VectorXd& r) const {
    Eigen::MatrixXd out(tau_, q_);
    switch (kind_) {
      case SketchKind::kRowIdentity:
        out.row(0) = (r.array() * inv_nu_.array()).transpose();
        return out;
      case SketchKind::kColumnOfA:
        out.row(0) = (sys_->a.transpose_times(r).array() * inv_nu_.array()).transpose();
        return out;
      default:
        break;
    }
    for (Index i = 0; i < q_; ++i) {
      Eigen::VectorXd sr(tau_);
      if (kind_ == SketchKind::kRowBlocks) {
        for (Index t = 0; t < tau_; ++t) sr[t] = r[blocks_[i][t]];
      } else {
        sr = custom_[i].transpose() * r;
      }
      out.col(i) = c_factors_[i].c.transpose() * sr;
    }
    return out;
  }

  const LinearSystem* sys_ = nullptr;
  SketchKind kind_ = SketchKind::kRowIdentity;
  Index q_ = 0;
  Index tau_ = 1;

  Eigen::VectorXd gram_trace_;
  Eigen::VectorXd inv_nu_;                 // tau == 1 kinds; 0 for zero sketches
  std::vector<PsdFactor> c_factors_;       // block kinds
  std::vector<std::vector<Index>> blocks_; // kRowBlocks
  std::vector<Eigen::MatrixXd> custom_;    // kCustomDense

  DenseMat u_cols_;    // RowIdentity with explicit SPD B: column i = U_i
  DenseMat u_stack_;   // block kinds: n x (q tau), U_i = middleCols(i tau, tau)
  DenseMat d_stack_;   // block kinds: (q tau) x n
  Eigen::VectorXd d_vec_;

  Eigen::MatrixXd g_dense_;                // q x q (tau=1) or (q tau) x (q tau)
  Eigen::SparseMatrix<double> g_sparse_;   // tau=1, column-major for column access
  bool g_sparse_flag_ = false;
  Eigen::SparseMatrix<double> col_access_; // ColumnOfA on sparse A: CSC copy
};

inline PrecomputedOperators PrecomputedOperators::precompute(const LinearSystem& sys,
                                                             const SketchSet& sketches) {
  PrecomputedOperators ops;
  ops.sys_ = &sys;
  ops.kind_ = sketches.kind();
  const Index m = sys.rows();
  const Index n = sys.cols();
  const InnerProductKind bk = sys.inner.kind();

  if (ops.kind_ == SketchKind::kColumnOfA) {
    if (bk != InnerProductKind::kGramOfA)
      throw invalid_input("precompute: ColumnOfA sketches require the GramOfA inner product");
  } else if (bk == InnerProductKind::kGramOfA) {
    throw invalid_input("precompute: GramOfA is only valid with ColumnOfA sketches");
  }

  switch (ops.kind_) {
    case SketchKind::kRowIdentity: {
      ops.q_ = m;
      ops.tau_ = 1;
      Eigen::VectorXd nu_sq;
      if (bk == InnerProductKind::kIdentity) {
        nu_sq = sys.a.row_sq_norms();
      } else {
        if (static_cast<std::int64_t>(m) * n > kDenseEntryLimit)
          throw unsupported("precompute: explicit SPD B needs a dense-capable instance");
        DenseMat ad = sys.a.to_dense();
        Eigen::MatrixXd w = sys.inner.llt().solve(ad.transpose());  // n x m
        nu_sq = (ad.array() * w.transpose().array()).rowwise().sum();
        ops.u_cols_.resize(n, m);
        for (Index i = 0; i < m; ++i) {
          const double s = nu_sq[i] > 0.0 ? 1.0 / std::sqrt(nu_sq[i]) : 0.0;
          ops.u_cols_.col(i) = w.col(i) * s;
        }
        ops.gram_trace_ = nu_sq;
        ops.inv_nu_ = nu_sq.unaryExpr(
            [](double v) { return v > 0.0 ? 1.0 / std::sqrt(v) : 0.0; });
        Eigen::MatrixXd g = ad * w;  // A B^{-1} A^T
        ops.g_dense_ = ops.inv_nu_.asDiagonal() * g * ops.inv_nu_.asDiagonal();
        return ops;
      }
      ops.gram_trace_ = nu_sq;
      ops.inv_nu_ = nu_sq.unaryExpr(
          [](double v) { return v > 0.0 ? 1.0 / std::sqrt(v) : 0.0; });
      if (sys.a.is_dense()) {
        DenseMat abar = ops.inv_nu_.asDiagonal() * sys.a.dense();
        ops.g_dense_ = abar * abar.transpose();
      } else {
        const CsrMat& a = sys.a.sparse();
        CsrMat at = a.transpose();
        ops.store_scaled_grid(Eigen::SparseMatrix<double>((a * at).pruned()));
      }
      return ops;
    }

    case SketchKind::kColumnOfA: {
      ops.q_ = n;
      ops.tau_ = 1;
      Eigen::VectorXd nu_sq = sys.a.col_sq_norms();
      ops.gram_trace_ = nu_sq;
      ops.inv_nu_ = nu_sq.unaryExpr(
          [](double v) { return v > 0.0 ? 1.0 / std::sqrt(v) : 0.0; });
      if (sys.a.is_dense()) {
        Eigen::MatrixXd atil = sys.a.dense() * ops.inv_nu_.asDiagonal();
        ops.g_dense_ = atil.transpose() * atil;
      } else {
        const CsrMat& a = sys.a.sparse();
        CsrMat at = a.transpose();
        ops.store_scaled_grid(Eigen::SparseMatrix<double>((at * a).pruned()));
        ops.col_access_ = a;  // CSC copy for single-column dots
      }
      return ops;
    }

    case SketchKind::kRowBlocks:
    case SketchKind::kCustomDense: {
      const bool row_blocks = ops.kind_ == SketchKind::kRowBlocks;
      ops.blocks_ = sketches.blocks();
      ops.custom_ = sketches.custom();
      ops.q_ = row_blocks ? static_cast<Index>(ops.blocks_.size())
                          : static_cast<Index>(ops.custom_.size());
      ops.tau_ = row_blocks ? static_cast<Index>(ops.blocks_.front().size())
                            : ops.custom_.front().cols();
      if (row_blocks) {
        for (const auto& blk : ops.blocks_)
          for (Index r : blk)
            if (r >= m) throw invalid_input("precompute: block row index out of range");
      } else if (ops.custom_.front().rows() != m) {
        throw invalid_input("precompute: sketch row count must equal the row count of A");
      }
      const Index q = ops.q_;
      const Index tau = ops.tau_;
      ops.c_factors_.resize(q);
      ops.gram_trace_.resize(q);
      ops.inv_nu_ = Eigen::VectorXd::Zero(q);
      ops.u_stack_.resize(n, q * tau);
      ops.d_stack_.resize(q * tau, n);
      ops.d_vec_.resize(q * tau);
      for (Index i = 0; i < q; ++i) {
        Eigen::MatrixXd mi(tau, n);  // S_i^T A
        Eigen::VectorXd sib(tau);    // S_i^T b
        if (row_blocks) {
          for (Index t = 0; t < tau; ++t) {
            mi.row(t) = sys.a.row_dense(ops.blocks_[i][t]).transpose();
            sib[t] = sys.b[ops.blocks_[i][t]];
          }
        } else {
          for (Index t = 0; t < tau; ++t) {
            mi.row(t) = sys.a.transpose_times(ops.custom_[i].col(t)).transpose();
          }
          sib = ops.custom_[i].transpose() * sys.b;
        }
        Eigen::MatrixXd yi = bk == InnerProductKind::kExplicitSpd
                                 ? Eigen::MatrixXd(sys.inner.llt().solve(mi.transpose()))
                                 : Eigen::MatrixXd(mi.transpose());  // B^{-1} A^T S_i
        Eigen::MatrixXd gram = mi * yi;
        ops.gram_trace_[i] = gram.trace();
        ops.c_factors_[i] = pinv_factor(gram);
        const Eigen::MatrixXd& c = ops.c_factors_[i].c;
        ops.u_stack_.middleCols(i * tau, tau) = yi * c;
        ops.d_stack_.middleRows(i * tau, tau) = c.transpose() * mi;
        ops.d_vec_.segment(i * tau, tau) = c.transpose() * sib;
      }
      ops.g_dense_ = ops.d_stack_ * ops.u_stack_;  // G_ij = D_i U_j
      return ops;
    }
  }
  return ops;
}

/// Spec-facing alias for the single-sketch residual R_i = C_i^T S_i^T (A x - b).
inline Eigen::VectorXd sketched_residual_direct(const PrecomputedOperators& ops, Index i,
                                                const Eigen::VectorXd& x) {
  return ops.residual_at(i, x);
}

}  // namespace skp

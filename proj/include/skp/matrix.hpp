#pragma once

#include <Eigen/Dense>
#include <Eigen/SparseCore>
#include <cstdint>
#include <utility>
#include <variant>
#include <vector>

#include "skp/error.hpp"

namespace skp {

using Index = Eigen::Index;
using DenseMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using CsrMat = Eigen::SparseMatrix<double, Eigen::RowMajor>;

/// Entry count above which loaded matrices are kept in compressed sparse row
/// form instead of dense storage.
inline constexpr std::int64_t kDenseEntryLimit = 4'000'000;

/// System matrix, stored dense (row-major) for small instances and CSR
/// otherwise. Immutable after construction.
class Mat {
 public:
  Mat() : data_(DenseMat()) {}
  explicit Mat(DenseMat a) : data_(std::move(a)) {}
  explicit Mat(CsrMat a) : data_(std::move(a)) {
    std::get<CsrMat>(data_).makeCompressed();
  }

  static Mat from_triplets(Index rows, Index cols,
                           const std::vector<Eigen::Triplet<double>>& ts) {
    CsrMat s(rows, cols);
    s.setFromTriplets(ts.begin(), ts.end());
    s.makeCompressed();
    if (static_cast<std::int64_t>(rows) * cols <= kDenseEntryLimit) {
      return Mat(DenseMat(s));
    }
    return Mat(std::move(s));
  }

  bool is_dense() const { return std::holds_alternative<DenseMat>(data_); }
  const DenseMat& dense() const { return std::get<DenseMat>(data_); }
  const CsrMat& sparse() const { return std::get<CsrMat>(data_); }

  Index rows() const {
    return is_dense() ? dense().rows() : sparse().rows();
  }
  Index cols() const {
    return is_dense() ? dense().cols() : sparse().cols();
  }
  std::int64_t nnz() const {
    return is_dense() ? static_cast<std::int64_t>((dense().array() != 0.0).count())
                      : sparse().nonZeros();
  }

  Eigen::VectorXd operator*(const Eigen::VectorXd& x) const {
    return is_dense() ? Eigen::VectorXd(dense() * x) : Eigen::VectorXd(sparse() * x);
  }

  Eigen::VectorXd transpose_times(const Eigen::VectorXd& y) const {
    return is_dense() ? Eigen::VectorXd(dense().transpose() * y)
                      : Eigen::VectorXd(sparse().transpose() * y);
  }

  double row_dot(Index i, const Eigen::VectorXd& x) const {
    if (is_dense()) return dense().row(i).dot(x);
    double s = 0.0;
    for (CsrMat::InnerIterator it(sparse(), i); it; ++it) s += it.value() * x[it.col()];
    return s;
  }

  /// x += alpha * A(i,:)^T
  void add_scaled_row(Index i, double alpha, Eigen::VectorXd& x) const {
    if (is_dense()) {
      x += alpha * dense().row(i).transpose();
      return;
    }
    for (CsrMat::InnerIterator it(sparse(), i); it; ++it) x[it.col()] += alpha * it.value();
  }

  Eigen::VectorXd row_dense(Index i) const {
    if (is_dense()) return dense().row(i).transpose();
    Eigen::VectorXd r = Eigen::VectorXd::Zero(cols());
    for (CsrMat::InnerIterator it(sparse(), i); it; ++it) r[it.col()] = it.value();
    return r;
  }

  Eigen::VectorXd row_sq_norms() const {
    if (is_dense()) return dense().rowwise().squaredNorm();
    Eigen::VectorXd r = Eigen::VectorXd::Zero(rows());
    for (Index i = 0; i < sparse().outerSize(); ++i)
      for (CsrMat::InnerIterator it(sparse(), i); it; ++it)
        r[i] += it.value() * it.value();
    return r;
  }

  Eigen::VectorXd col_sq_norms() const {
    if (is_dense()) return dense().colwise().squaredNorm().transpose();
    Eigen::VectorXd c = Eigen::VectorXd::Zero(cols());
    for (Index i = 0; i < sparse().outerSize(); ++i)
      for (CsrMat::InnerIterator it(sparse(), i); it; ++it)
        c[it.col()] += it.value() * it.value();
    return c;
  }

  double frobenius_sq() const {
    return is_dense() ? dense().squaredNorm() : sparse().squaredNorm();
  }

  DenseMat to_dense() const {
    return is_dense() ? dense() : DenseMat(sparse());
  }

  bool all_finite() const {
    if (is_dense()) return dense().allFinite();
    for (Index i = 0; i < sparse().outerSize(); ++i)
      for (CsrMat::InnerIterator it(sparse(), i); it; ++it)
        if (!std::isfinite(it.value())) return false;
    return true;
  }

 private:
  std::variant<DenseMat, CsrMat> data_;
};

}  // namespace skp

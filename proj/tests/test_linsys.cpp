#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <cmath>

#include "skp/linsys.hpp"
#include "skp/rng.hpp"
#include "test_util.hpp"

using namespace skp;

namespace {

Eigen::VectorXd vec(std::initializer_list<double> v) {
  Eigen::VectorXd out(static_cast<Index>(v.size()));
  Index i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

}  // namespace

TEST(BNormSq, EuclideanExamples) {
  const InnerProduct id = InnerProduct::identity();
  EXPECT_DOUBLE_EQ(b_norm_sq(vec({3, 4}), id), 25.0);
  EXPECT_DOUBLE_EQ(b_norm_sq(Eigen::VectorXd::Zero(5), id), 0.0);
}

TEST(BNormSq, GramOfAUsesProductsWithA) {
  DenseMat a(2, 2);
  a << 2, 0, 0, 1;
  Mat mat(a);
  const InnerProduct gram = InnerProduct::gram_of_a();
  // ||A v||^2 = 4 + 1 for v = (1, 1)
  EXPECT_DOUBLE_EQ(b_norm_sq(vec({1, 1}), gram, &mat), 5.0);
  EXPECT_DOUBLE_EQ(b_norm_sq(Eigen::VectorXd::Zero(2), gram, &mat), 0.0);
  EXPECT_THROW(b_norm_sq(vec({1, 1}), gram, nullptr), invalid_input);
}

TEST(BNormSq, DimensionMismatch) {
  const InnerProduct spd = InnerProduct::explicit_spd(Eigen::MatrixXd::Identity(3, 3));
  EXPECT_THROW(b_norm_sq(vec({1, 2}), spd), invalid_input);
}

TEST(BNormSq, AgreesWithExplicitQuadraticForm) {
  for (std::uint64_t s = 0; s < 20; ++s) {
    const Index n = 3 + static_cast<Index>(s % 48);
    Eigen::MatrixXd b = test::random_spd(n, 100 + s);
    const InnerProduct spd = InnerProduct::explicit_spd(b);
    RngStream rng(s);
    Eigen::VectorXd v(n);
    for (Index i = 0; i < n; ++i) v[i] = rng.next_normal();
    const double direct = v.dot(b * v);
    EXPECT_NEAR(b_norm_sq(v, spd), direct, 1e-10 * (1.0 + std::abs(direct)));
    EXPECT_GE(b_norm_sq(v, spd), 0.0);
  }
}

TEST(InnerProduct, RejectsAsymmetricAndIndefinite) {
  Eigen::MatrixXd asym(2, 2);
  asym << 1, 0.5, 0.1, 1;
  EXPECT_THROW(InnerProduct::explicit_spd(asym), invalid_input);
  Eigen::MatrixXd indef(2, 2);
  indef << 1, 0, 0, -1;
  EXPECT_THROW(InnerProduct::explicit_spd(indef), invalid_input);
}

TEST(PinvFactor, ScalarExamples) {
  Eigen::MatrixXd g(1, 1);
  g << 4;
  PsdFactor f = pinv_factor(g);
  EXPECT_EQ(f.rank, 1);
  EXPECT_NEAR(std::abs(f.c(0, 0)), 0.5, 1e-14);

  g << 0;
  f = pinv_factor(g);
  EXPECT_EQ(f.rank, 0);
  EXPECT_DOUBLE_EQ(f.c(0, 0), 0.0);
}

TEST(PinvFactor, RankDeficientExample) {
  Eigen::MatrixXd g(2, 2);
  g << 2, 0, 0, 0;
  PsdFactor f = pinv_factor(g);
  EXPECT_EQ(f.rank, 1);
  Eigen::MatrixXd pinv = f.c * f.c.transpose();
  Eigen::MatrixXd expected(2, 2);
  expected << 0.5, 0, 0, 0;
  EXPECT_LT((pinv - expected).norm(), 1e-12);
}

TEST(PinvFactor, RejectsBadInput) {
  Eigen::MatrixXd asym(2, 2);
  asym << 1, 1, 0, 1;
  EXPECT_THROW(pinv_factor(asym), invalid_input);
  Eigen::MatrixXd neg(2, 2);
  neg << 1, 0, 0, -1;
  EXPECT_THROW(pinv_factor(neg), invalid_input);
}

TEST(PinvFactor, ReconstructionOnRandomPsd) {
  // G (C C^T) G = G across random PSD matrices, including rank-deficient ones.
  int done = 0;
  for (std::uint64_t s = 0; done < 1000; ++s) {
    const Index tau = 1 + static_cast<Index>(s % 8);
    RngStream rng(s, 5);
    const Index rank = static_cast<Index>(rng.next_below(static_cast<std::uint64_t>(tau) + 1));
    DenseMat w = generate_gaussian(tau, std::max<Index>(rank, 1), 900 + s);
    Eigen::MatrixXd g = rank == 0 ? Eigen::MatrixXd::Zero(tau, tau).eval()
                                  : Eigen::MatrixXd(w * w.transpose());
    PsdFactor f = pinv_factor(g);
    const double gnorm = g.norm();
    EXPECT_LE((g * (f.c * f.c.transpose()) * g - g).norm(), 1e-8 * (gnorm > 0 ? gnorm : 1.0));
    EXPECT_LE(f.rank, tau);
    ++done;
  }
}

TEST(LinearSystem, Validation) {
  DenseMat a(2, 2);
  a << 1, 0, 0, 1;
  EXPECT_THROW(LinearSystem(Mat(a), vec({1, 2, 3}), InnerProduct::identity()), invalid_input);

  DenseMat bad = a;
  bad(0, 0) = std::nan("");
  EXPECT_THROW(LinearSystem(Mat(bad), vec({1, 1}), InnerProduct::identity()), invalid_input);

  // x_star must actually solve the system
  EXPECT_THROW(LinearSystem(Mat(a), vec({1, 1}), InnerProduct::identity(), vec({5, 5})),
               invalid_input);
  const LinearSystem ok(Mat(a), vec({1, 1}), InnerProduct::identity(), vec({1, 1}));
  EXPECT_DOUBLE_EQ(ok.error_b_sq(vec({1, 1})), 0.0);
}

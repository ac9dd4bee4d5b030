#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <vector>

#include "skp/samplers.hpp"

using namespace skp;

namespace {

Eigen::VectorXd vec(std::initializer_list<double> v) {
  Eigen::VectorXd out(static_cast<Index>(v.size()));
  Index i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

/// Pearson chi-square statistic of observed counts against expected
/// probabilities.
double chi_square(const std::vector<long>& counts, const Eigen::VectorXd& p, long n) {
  double stat = 0.0;
  for (Index i = 0; i < p.size(); ++i) {
    const double expected = p[i] * static_cast<double>(n);
    if (expected == 0.0) {
      EXPECT_EQ(counts[static_cast<std::size_t>(i)], 0);
      continue;
    }
    const double d = static_cast<double>(counts[static_cast<std::size_t>(i)]) - expected;
    stat += d * d / expected;
  }
  return stat;
}

}  // namespace

TEST(SampleFixed, DegenerateDistribution) {
  RngStream rng(1);
  const Eigen::VectorXd p = vec({1, 0});
  for (int i = 0; i < 100; ++i) EXPECT_EQ(sample_fixed(p, rng), 0);
}

TEST(SampleFixed, UniformChiSquare) {
  const Eigen::VectorXd p = Eigen::VectorXd::Constant(4, 0.25);
  AliasTable table(p);
  RngStream rng(2);
  std::vector<long> counts(4, 0);
  const long n = 100000;
  for (long i = 0; i < n; ++i) ++counts[static_cast<std::size_t>(table.draw(rng))];
  // 3 degrees of freedom, significance 0.001
  EXPECT_LT(chi_square(counts, p, n), 16.266);
  for (Index i = 0; i < 4; ++i)
    EXPECT_NEAR(static_cast<double>(counts[static_cast<std::size_t>(i)]) / n, 0.25, 0.01);
}

TEST(SampleFixed, SkewedAliasChiSquare) {
  const Eigen::VectorXd p = vec({0.6, 0.25, 0.1, 0.04, 0.01});
  AliasTable table(p);
  RngStream rng(3);
  std::vector<long> counts(5, 0);
  const long n = 200000;
  for (long i = 0; i < n; ++i) ++counts[static_cast<std::size_t>(table.draw(rng))];
  // 4 degrees of freedom, significance 0.001
  EXPECT_LT(chi_square(counts, p, n), 18.467);
}

TEST(SampleFixed, DeterministicGivenSeed) {
  const Eigen::VectorXd p = vec({0.3, 0.3, 0.4});
  AliasTable table(p);
  RngStream a(77), b(77);
  for (int i = 0; i < 500; ++i) EXPECT_EQ(table.draw(a), table.draw(b));
}

TEST(SampleFixed, RejectsNonSimplex) {
  RngStream rng(1);
  EXPECT_THROW(sample_fixed(vec({0.5, 0.6}), rng), invalid_input);
  EXPECT_THROW(sample_fixed(vec({1.2, -0.2}), rng), invalid_input);
}

TEST(SelectMaxDistance, ExamplesAndTieBreak) {
  EXPECT_EQ(select_max_distance(vec({1, 3, 2})).value(), 1);
  EXPECT_EQ(select_max_distance(vec({2, 2})).value(), 0);  // lowest index wins
  EXPECT_FALSE(select_max_distance(vec({0, 0})).has_value());
  EXPECT_THROW(select_max_distance(vec({1, -1})), invalid_input);
}

TEST(SelectMaxDistance, ArgmaxMembershipExhaustive) {
  RngStream rng(4);
  for (int trial = 0; trial < 2000; ++trial) {
    const Index q = 1 + static_cast<Index>(rng.next_below(6));
    Eigen::VectorXd f(q);
    for (Index i = 0; i < q; ++i)
      f[i] = static_cast<double>(rng.next_below(4));  // ties are likely
    f[static_cast<Index>(rng.next_below(static_cast<std::uint64_t>(q)))] += 1.0;
    const auto pick = select_max_distance(f);
    ASSERT_TRUE(pick.has_value());
    EXPECT_DOUBLE_EQ(f[*pick], f.maxCoeff());
  }
}

TEST(SampleProportional, ExamplesAndChiSquare) {
  RngStream rng(5);
  EXPECT_EQ(sample_proportional(vec({0, 5}), rng).value(), 1);
  EXPECT_FALSE(sample_proportional(vec({0, 0, 0}), rng).has_value());

  const Eigen::VectorXd f = vec({1, 1, 2});
  std::vector<long> counts(3, 0);
  const long n = 100000;
  for (long i = 0; i < n; ++i) ++counts[static_cast<std::size_t>(*sample_proportional(f, rng))];
  EXPECT_NEAR(static_cast<double>(counts[2]) / n, 0.5, 0.01);
  // 2 degrees of freedom, significance 0.001
  EXPECT_LT(chi_square(counts, f / f.sum(), n), 13.816);
}

TEST(SampleCapped, HandExamples) {
  RngStream rng(6);
  const Eigen::VectorXd uniform2 = Eigen::VectorXd::Constant(2, 0.5);
  // t = 0.5 * 3 + 0.5 * 2 = 2.5, so W = {1}
  for (int i = 0; i < 50; ++i) {
    const auto pick = sample_capped(vec({1, 3}), uniform2, 0.5, rng);
    ASSERT_TRUE(pick.has_value());
    EXPECT_EQ(pick->first, 1);
    EXPECT_EQ(pick->second, 1);
  }
  EXPECT_FALSE(sample_capped(vec({0, 0}), uniform2, 0.5, rng).has_value());
}

TEST(SampleCapped, ThetaOneMatchesMaxDistance) {
  RngStream rng(7);
  RngStream draws(8);
  for (int trial = 0; trial < 2000; ++trial) {
    const Index q = 2 + static_cast<Index>(rng.next_below(5));
    Eigen::VectorXd f(q);
    for (Index i = 0; i < q; ++i) f[i] = static_cast<double>(rng.next_below(5));
    const Eigen::VectorXd ref = Eigen::VectorXd::Constant(q, 1.0 / static_cast<double>(q));
    const auto greedy = select_max_distance(f);
    const auto capped = sample_capped(f, ref, 1.0, draws);
    ASSERT_EQ(greedy.has_value(), capped.has_value());
    if (greedy) {
      EXPECT_EQ(*greedy, capped->first);
      EXPECT_EQ(capped->second, 1);
    }
  }
}

TEST(SampleCapped, ThetaZeroEnumeration) {
  // f = (1, 2, 3), uniform reference: t = mean = 2, W = {1, 2},
  // in-set probabilities 2/5 and 3/5.
  const Eigen::VectorXd f = vec({1, 2, 3});
  const Eigen::VectorXd ref = Eigen::VectorXd::Constant(3, 1.0 / 3.0);
  RngStream rng(9);
  std::vector<long> counts(3, 0);
  const long n = 100000;
  for (long i = 0; i < n; ++i) {
    const auto pick = sample_capped(f, ref, 0.0, rng);
    ASSERT_TRUE(pick.has_value());
    EXPECT_EQ(pick->second, 2);
    ++counts[static_cast<std::size_t>(pick->first)];
  }
  EXPECT_EQ(counts[0], 0);
  EXPECT_NEAR(static_cast<double>(counts[1]) / n, 0.4, 0.01);
  EXPECT_NEAR(static_cast<double>(counts[2]) / n, 0.6, 0.01);
}

TEST(SampleCapped, CandidateSetShrinksWithTheta) {
  RngStream rng(10);
  RngStream draws(11);
  for (int trial = 0; trial < 200; ++trial) {
    const Index q = 3 + static_cast<Index>(rng.next_below(8));
    Eigen::VectorXd f(q);
    for (Index i = 0; i < q; ++i) f[i] = rng.next_double() * 3.0;
    const Eigen::VectorXd ref = Eigen::VectorXd::Constant(q, 1.0 / static_cast<double>(q));
    Index prev = q + 1;
    Index arg_max = 0;
    for (Index i = 1; i < q; ++i)
      if (f[i] > f[arg_max]) arg_max = i;
    for (double theta : {0.0, 0.25, 0.5, 0.75, 1.0}) {
      const auto pick = sample_capped(f, ref, theta, draws);
      ASSERT_TRUE(pick.has_value());
      EXPECT_LE(pick->second, prev);
      prev = pick->second;
      EXPECT_GE(f[pick->first], f[arg_max] * theta);  // argmax always qualifies
    }
  }
}

TEST(GammaFactor, ExamplesAndProperties) {
  EXPECT_DOUBLE_EQ(gamma_factor(Eigen::VectorXd::Constant(2, 0.5)), 2.0);
  for (Index q : {3, 4, 7, 30}) {
    const Eigen::VectorXd u = Eigen::VectorXd::Constant(q, 1.0 / static_cast<double>(q));
    EXPECT_NEAR(gamma_factor(u), static_cast<double>(q) / static_cast<double>(q - 1), 1e-14);
    EXPECT_GT(gamma_factor(u), 1.0);
  }
  EXPECT_NEAR(gamma_factor(vec({0.9, 0.1})), 1.0 / 0.9, 1e-14);
  EXPECT_THROW(gamma_factor(vec({1.0, 0.0})), invalid_input);
  EXPECT_THROW(gamma_factor(vec({1.0})), invalid_input);
}

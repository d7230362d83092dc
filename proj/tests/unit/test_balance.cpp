#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "asif/balance.hpp"
#include "asif/error.hpp"
#include "test_data.hpp"

using namespace asif;
using namespace asif::balance;
using asif::testing::av;

namespace {

std::vector<double> col(std::initializer_list<double> v) { return v; }

Eigen::MatrixXd gaussian(std::size_t n, std::size_t k, std::mt19937_64& gen) {
  std::normal_distribution<double> normal;
  Eigen::MatrixXd x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(k));
  for (Eigen::Index i = 0; i < x.rows(); ++i)
    for (Eigen::Index j = 0; j < x.cols(); ++j) x(i, j) = normal(gen);
  return x;
}

AssignmentVector random_split(std::size_t n, std::size_t treated, std::mt19937_64& gen) {
  std::vector<std::uint8_t> z(n, 0);
  std::fill(z.begin(), z.begin() + static_cast<std::ptrdiff_t>(treated), 1);
  std::shuffle(z.begin(), z.end(), gen);
  return AssignmentVector(std::move(z));
}

// Well-conditioned random matrix: orthogonal * diag(1..10) * orthogonal.
Eigen::MatrixXd well_conditioned(std::size_t k, std::mt19937_64& gen) {
  const auto a = gaussian(k, k, gen);
  const auto b = gaussian(k, k, gen);
  Eigen::HouseholderQR<Eigen::MatrixXd> qa(a), qb(b);
  Eigen::MatrixXd ua = qa.householderQ();
  Eigen::MatrixXd ub = qb.householderQ();
  std::uniform_real_distribution<double> sv(1.0, 10.0);
  Eigen::VectorXd s(static_cast<Eigen::Index>(k));
  for (Eigen::Index i = 0; i < s.size(); ++i) s(i) = sv(gen);
  return ua * s.asDiagonal() * ub.transpose();
}

double rel(double a, double b) { return std::abs(a - b) / std::max(1.0, std::abs(b)); }

}  // namespace

TEST(PrevalenceDifference, Examples) {
  EXPECT_DOUBLE_EQ(prevalence_difference(col({1, 2, 3, 4}), av({1, 1, 0, 0})), -2.0);
  EXPECT_DOUBLE_EQ(prevalence_difference(col({7, 7, 7, 7}), av({1, 0, 0, 1})), 0.0);
  EXPECT_DOUBLE_EQ(prevalence_difference(col({5, 5, 0, 0}), av({1, 0, 1, 0})), 0.0);
  EXPECT_THROW(prevalence_difference(col({1, 2}), av({1, 1})), InputError);
}

TEST(Scmd, Examples) {
  EXPECT_DOUBLE_EQ(*scmd(col({0, 2, 0, 2}), av({1, 1, 0, 0})), 0.0);
  EXPECT_DOUBLE_EQ(*scmd(col({3, 3, 3, 3}), av({1, 1, 0, 0})), 0.0);
  // Hand computation: diff = 5 - 2 = 3, s1^2 = s0^2 = 2, denominator sqrt(2).
  EXPECT_NEAR(*scmd(col({4, 6, 1, 3}), av({1, 1, 0, 0})), 2.1213203435596424, 1e-14);
}

TEST(Scmd, ZeroPooledSdIsUndefined) {
  EXPECT_FALSE(scmd(col({1, 1, 0, 0}), av({1, 1, 0, 0})).has_value());
}

TEST(Scmd, ScaleFree) {
  std::mt19937_64 gen(3);
  const auto x = gaussian(40, 1, gen);
  const auto z = random_split(40, 17, gen);
  const std::vector<double> v(x.data(), x.data() + 40);
  const double base = *scmd(v, z);
  for (double c : {3.0, -0.25, 1e6, -7e-5}) {
    std::vector<double> scaled(v);
    for (auto& s : scaled) s *= c;
    EXPECT_NEAR(*scmd(scaled, z), std::copysign(1.0, c) * base, 1e-12 * std::abs(base));
  }
}

TEST(IvBias, Examples) {
  const auto x = col({0.2, 0.2, 0.0, 0.0});
  const auto z = av({1, 1, 0, 0});
  EXPECT_NEAR(*iv_bias(x, z, av({1, 0, 0, 0}), BiasDenominator::per_draw()), 0.4, 1e-15);
  EXPECT_NEAR(*iv_bias(x, z, av({1, 0, 0, 0}), BiasDenominator::fixed(0.5)), 0.4, 1e-15);
  EXPECT_DOUBLE_EQ(*iv_bias(col({1, 0, 1, 0}), z, av({1, 0, 0, 0}), BiasDenominator::fixed(0.5)), 0.0);
  // Z = D: strength 1, bias equals balance.
  const auto y = col({3, 1, 4, 1});
  EXPECT_DOUBLE_EQ(*iv_bias(y, z, z, BiasDenominator::per_draw()), prevalence_difference(y, z));
  // Zero strength: undefined.
  EXPECT_FALSE(iv_bias(y, z, av({1, 0, 1, 0}), BiasDenominator::per_draw()).has_value());
  EXPECT_FALSE(iv_bias(y, z, z, BiasDenominator::fixed(0.0)).has_value());
}

TEST(MeanDifferenceCovariance, Examples) {
  Eigen::MatrixXd x(4, 1);
  x << 0, 2, 0, 2;
  // s^2_pooled = 2, (1/2 + 1/2) = 1.
  EXPECT_NEAR(mean_difference_covariance(x, av({1, 1, 0, 0}))(0, 0), 2.0, 1e-15);

  Eigen::MatrixXd c(6, 3);
  c << 1, 5, 2, 2, 5, 7, 3, 5, 1, 4, 5, 8, 5, 5, 2, 6, 5, 9;
  const auto cov = mean_difference_covariance(c, av({1, 0, 1, 0, 1, 0}));
  EXPECT_TRUE(cov.row(1).isZero(0.0));
  EXPECT_TRUE(cov.col(1).isZero(0.0));

  Eigen::MatrixXd dup(6, 2);
  dup.col(0) = c.col(0);
  dup.col(1) = c.col(0);
  EXPECT_EQ(pseudo_inverse(mean_difference_covariance(dup, av({1, 0, 1, 0, 1, 0}))).rank, 1u);

  EXPECT_THROW(mean_difference_covariance(x, av({1, 0, 0, 0})), InputError);
}

TEST(Mahalanobis, ZeroDifference) {
  Eigen::MatrixXd x(6, 2);
  x << 1, 2, 3, 5, 2, 1, 3, 5, 2, 1, 1, 2;
  const auto g = mahalanobis(x, av({1, 1, 1, 0, 0, 0}));
  EXPECT_NEAR(g.mahalanobis, 0.0, 1e-24);
  EXPECT_FALSE(g.pseudo_inverse_used);
}

TEST(Mahalanobis, ScalarOracle) {
  Eigen::MatrixXd x(4, 1);
  x << 4, 6, 1, 3;
  // diff = 3; var(diff) = s^2_pooled (1/2 + 1/2) = 2; M = 9 / 2.
  const auto g = mahalanobis(x, av({1, 1, 0, 0}));
  EXPECT_NEAR(g.mahalanobis, 4.5, 1e-13);
  EXPECT_NEAR(g.sqrt_mahalanobis, std::sqrt(4.5), 1e-13);
  EXPECT_EQ(g.covariance_rank, 1u);
}

TEST(MahalanobisProperty, AffineInvariance) {
  std::mt19937_64 gen(21);
  std::normal_distribution<double> normal;
  for (int rep = 0; rep < 30; ++rep) {
    const auto x = gaussian(60, 4, gen);
    const auto z = random_split(60, 25, gen);
    const auto a = well_conditioned(4, gen);
    Eigen::RowVectorXd b(4);
    for (Eigen::Index j = 0; j < 4; ++j) b(j) = 10 * normal(gen);
    const Eigen::MatrixXd y = (x * a.transpose()).rowwise() + b;
    const double m0 = mahalanobis(x, z).mahalanobis;
    EXPECT_LE(std::abs(mahalanobis(y, z).mahalanobis - m0), 1e-8 * std::max(1.0, m0));
  }
}

TEST(MahalanobisProperty, Antisymmetry) {
  std::mt19937_64 gen(5);
  const auto x = gaussian(30, 3, gen);
  const auto z = random_split(30, 12, gen);
  const auto zc = z.complement();
  for (Eigen::Index j = 0; j < 3; ++j) {
    std::vector<double> v(x.col(j).data(), x.col(j).data() + 30);
    EXPECT_NEAR(prevalence_difference(v, zc), -prevalence_difference(v, z), 1e-14);
    EXPECT_NEAR(*scmd(v, zc), -*scmd(v, z), 1e-13);
  }
  EXPECT_NEAR(mahalanobis(x, zc).mahalanobis, mahalanobis(x, z).mahalanobis, 1e-10);
}

TEST(MahalanobisProperty, BiasBalanceIdentity) {
  std::mt19937_64 gen(8);
  for (int rep = 0; rep < 20; ++rep) {
    const auto x = gaussian(50, 5, gen);
    const auto z = random_split(50, 20, gen);
    const Eigen::VectorXd diff = mean_difference(x, z);
    const Eigen::MatrixXd cov = mean_difference_covariance(x, z);
    for (double c : {0.37, -0.05, 0.9}) {
      const double m_balance = quadratic_form(diff, cov).mahalanobis;
      const double m_bias = quadratic_form(diff / c, cov / (c * c)).mahalanobis;
      EXPECT_LE(std::abs(m_bias - m_balance), 1e-10 * m_balance);
    }
  }
}

TEST(MahalanobisProperty, PseudoInverseMatchesFullRankProjection) {
  std::mt19937_64 gen(13);
  for (int rep = 0; rep < 20; ++rep) {
    const auto base = gaussian(40, 3, gen);
    Eigen::MatrixXd x(40, 5);
    x.leftCols(3) = base;
    x.col(3) = base.col(0);                            // duplicate
    x.col(4) = (2.0 * base.col(1) - base.col(2)).array() + 1.0;  // affine combination
    const auto z = random_split(40, 18, gen);
    const auto g = mahalanobis(x, z);
    const auto reduced = mahalanobis(base, z);
    EXPECT_TRUE(g.pseudo_inverse_used);
    EXPECT_EQ(g.covariance_rank, 3u);
    EXPECT_LE(std::abs(g.mahalanobis - reduced.mahalanobis), 1e-8 * reduced.mahalanobis);
  }
}

TEST(MahalanobisEvaluator, AgreesWithDirectRoute) {
  std::mt19937_64 gen(99);
  for (int rep = 0; rep < 40; ++rep) {
    const std::size_t n = 20 + gen() % 60;
    auto x = gaussian(n, 4, gen);
    x.col(1) = x.col(1) * 1e4 + Eigen::VectorXd::Constant(static_cast<Eigen::Index>(n), 3e5);
    const MahalanobisEvaluator eval(x);
    for (int d = 0; d < 5; ++d) {
      const auto z = random_split(n, 2 + gen() % (n - 4), gen);
      const auto fast = eval(z);
      const auto direct = mahalanobis(x, z);
      EXPECT_LE(rel(fast.mahalanobis, direct.mahalanobis), 1e-8);
      EXPECT_EQ(fast.covariance_rank, direct.covariance_rank);
    }
  }
}

TEST(MahalanobisEvaluator, RankDeficientAndFallback) {
  std::mt19937_64 gen(4);
  const auto base = gaussian(30, 2, gen);
  Eigen::MatrixXd x(30, 4);
  x.leftCols(2) = base;
  x.col(2) = base.col(0);
  x.col(3).setConstant(0.1);
  const MahalanobisEvaluator eval(x);
  for (int d = 0; d < 10; ++d) {
    const auto z = random_split(30, 11, gen);
    const auto fast = eval(z);
    const auto direct = mahalanobis(x, z);
    EXPECT_TRUE(fast.pseudo_inverse_used);
    EXPECT_EQ(fast.covariance_rank, 2u);
    EXPECT_LE(rel(fast.mahalanobis, direct.mahalanobis), 1e-8);
  }
  // A covariate equal to the assignment has zero within-group variance: the
  // rank-one update degenerates and the direct route takes over.
  const auto z = random_split(30, 11, gen);
  Eigen::MatrixXd y(30, 2);
  y.col(0) = base.col(0);
  for (Eigen::Index i = 0; i < 30; ++i) y(i, 1) = z[static_cast<std::size_t>(i)];
  const auto fast = MahalanobisEvaluator(y)(z);
  const auto direct = mahalanobis(y, z);
  EXPECT_TRUE(std::isfinite(fast.mahalanobis));
  EXPECT_LE(rel(fast.mahalanobis, direct.mahalanobis), 1e-8);
}

TEST(CovariateMoments, AgreesWithDirectRoute) {
  std::mt19937_64 gen(17);
  auto x = gaussian(50, 3, gen);
  x.col(2) = (x.col(2).array() > 0.5).cast<double>();
  x.col(0) = x.col(0) * 100.0 + Eigen::VectorXd::Constant(50, 1e4);
  const CovariateMoments moments(x);
  for (int d = 0; d < 20; ++d) {
    const auto z = random_split(50, 3 + gen() % 44, gen);
    const auto g = moments(z);
    for (Eigen::Index j = 0; j < 3; ++j) {
      std::vector<double> v(x.col(j).data(), x.col(j).data() + 50);
      EXPECT_LE(rel(g.diff(j), prevalence_difference(v, z)), 1e-10);
      const auto a = moments.scmd(g, j);
      const auto b = scmd(v, z);
      ASSERT_EQ(a.has_value(), b.has_value());
      if (a) EXPECT_LE(rel(*a, *b), 1e-9);
    }
  }
  // Constant column: exact zero, not undefined.
  Eigen::MatrixXd c = Eigen::MatrixXd::Constant(10, 1, 0.1);
  const CovariateMoments cm(c);
  const auto z = random_split(10, 4, gen);
  EXPECT_EQ(*cm.scmd(cm(z), 0), 0.0);
}

TEST(BalanceVector, Kinds) {
  Eigen::MatrixXd x(4, 2);
  x << 4, 1, 6, 0, 1, 1, 3, 0;
  const auto z = av({1, 1, 0, 0});
  const auto d = av({1, 0, 0, 0});
  const auto pd = balance_vector(x, z, VectorKind::prevalence_diff);
  EXPECT_DOUBLE_EQ(*pd.per_covariate[0], 3.0);
  EXPECT_DOUBLE_EQ(*pd.per_covariate[1], 0.0);
  const auto bias = balance_vector(x, z, VectorKind::bias, &d, BiasDenominator::per_draw());
  EXPECT_DOUBLE_EQ(*bias.per_covariate[0], 6.0);
}

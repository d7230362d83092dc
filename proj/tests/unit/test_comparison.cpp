#include <gtest/gtest.h>

#include <random>

#include "asif/comparison.hpp"
#include "asif/error.hpp"
#include "asif/synth.hpp"
#include "test_data.hpp"

using namespace asif;

TEST(ClassifyCase, TableExamples) {
  const auto c1 = classify_case(0.01, 0.20, 0.05);
  EXPECT_EQ(c1.label, StudyCase::case1);
  EXPECT_EQ(c1.recommendation, "Use IV analysis");
  const auto c2 = classify_case(0.20, 0.01, 0.05);
  EXPECT_EQ(c2.label, StudyCase::case2);
  EXPECT_EQ(c2.recommendation, "Reject IV analysis");
  const auto c3 = classify_case(0.20, 0.30, 0.05);
  EXPECT_EQ(c3.label, StudyCase::case3);
  EXPECT_EQ(c3.recommendation, "Use IV analysis or exposure analysis");
  const auto c4 = classify_case(0.01, 0.01, 0.05);
  EXPECT_EQ(c4.label, StudyCase::case4);
  EXPECT_EQ(c4.recommendation, "Compare balance or bias of D and Z");
  EXPECT_EQ(to_string(StudyCase::case4), "Case 4");
}

TEST(ClassifyCase, BoundaryIsRejection) {
  EXPECT_EQ(classify_case(0.05, 0.5, 0.05).label, StudyCase::case1);
}

TEST(ClassifyCase, RandomTriples) {
  std::mt19937_64 gen(8);
  std::uniform_real_distribution<double> u(1e-6, 1.0);
  for (int i = 0; i < 5000; ++i) {
    const double pe = u(gen), pi = u(gen), a = std::min(u(gen), 0.999);
    const auto c = classify_case(pe, pi, a);
    const bool rd = pe <= a, rz = pi <= a;
    const StudyCase expected = rd && !rz   ? StudyCase::case1
                               : !rd && rz ? StudyCase::case2
                               : !rd       ? StudyCase::case3
                                           : StudyCase::case4;
    ASSERT_EQ(c.label, expected);
    ASSERT_EQ(c.reject_exposure, rd);
    ASSERT_EQ(c.reject_instrument, rz);
    ASSERT_EQ(c.recommendation, recommendation(expected));
  }
}

TEST(ClassifyCase, Preconditions) {
  EXPECT_THROW(classify_case(0.0, 0.5, 0.05), InputError);
  EXPECT_THROW(classify_case(0.5, 1.5, 0.05), InputError);
  EXPECT_THROW(classify_case(0.5, 0.5, 1.0), InputError);
}

TEST(Separation, Identical) {
  std::vector<double> a = {1, 2, 2, 3, 4, 4, 5};
  const auto s = separation_diagnostics(a, a);
  EXPECT_FALSE(s.intervals_disjoint);
  EXPECT_DOUBLE_EQ(s.overlap_fraction, 1.0);
  EXPECT_DOUBLE_EQ(s.mean_gap, 0.0);
}

TEST(Separation, Disjoint) {
  std::mt19937_64 gen(1);
  std::uniform_real_distribution<double> u;
  std::vector<double> a(500), b(500);
  for (auto& v : a) v = u(gen);
  for (auto& v : b) v = 5 + u(gen);
  const auto s = separation_diagnostics(a, b);
  EXPECT_TRUE(s.intervals_disjoint);
  EXPECT_DOUBLE_EQ(s.overlap_fraction, 0.0);
  EXPECT_NEAR(s.mean_gap, 5.0, 0.1);
}

TEST(Separation, ShiftedNormalOverlap) {
  std::mt19937_64 gen(2);
  std::normal_distribution<double> normal;
  std::vector<double> a(10000), b(10000);
  for (auto& v : a) v = normal(gen);
  for (auto& v : b) v = normal(gen) + 0.5;
  const auto s = separation_diagnostics(a, b);
  EXPECT_NEAR(s.overlap_fraction, 0.8025873486341526, 0.02);
  const auto r = separation_diagnostics(b, a);
  EXPECT_DOUBLE_EQ(r.overlap_fraction, s.overlap_fraction);
  std::shuffle(a.begin(), a.end(), gen);
  EXPECT_DOUBLE_EQ(separation_diagnostics(a, b).overlap_fraction, s.overlap_fraction);
}

namespace {

ComparisonConfig small_config(std::uint64_t seed, std::size_t m = 1000) {
  ComparisonConfig c;
  c.n_draws = m;
  c.seed = seed;
  return c;
}

}  // namespace

TEST(CompareMechanisms, BenchmarkMatchesRunTest) {
  const auto g = synth::generate(*synth::scenario("confounded-exposure", 400, 4, 3));
  const auto cfg = small_config(17, 500);
  const auto r = compare_mechanisms(g.data, cfg);
  auto tc = cfg.test_config();
  tc.statistic = StatisticKind::sqrt_mahalanobis;
  const CompleteMechanism cr{g.data.n_units(), g.data.instrument().n_treated()};
  const auto direct = run_test(g.data, Target::instrument, cr, tc);
  EXPECT_EQ(r.cr_distribution.draws, direct.draws[0]);
  EXPECT_EQ(r.p_iv, *direct.components[0].p_value);
  EXPECT_EQ(r.observed_iv, *direct.components[0].observed);
  EXPECT_EQ(r.classification.label,
            classify_case(r.p_exp, r.p_iv, cfg.alpha).label);
  EXPECT_GE(r.separation.overlap_fraction, 0.0);
  EXPECT_LE(r.separation.overlap_fraction, 1.0);
  if (r.separation.intervals_disjoint) EXPECT_EQ(r.separation.overlap_fraction, 0.0);
  EXPECT_EQ(r.separation.significantly_closer,
            r.separation.intervals_disjoint && r.separation.iv_closer);
}

TEST(CompareMechanisms, Deterministic) {
  const auto g = synth::generate(*synth::scenario("null", 300, 3, 5));
  const auto a = compare_mechanisms(g.data, small_config(4, 300));
  const auto b = compare_mechanisms(g.data, small_config(4, 300));
  EXPECT_EQ(a.cr_distribution.draws, b.cr_distribution.draws);
  EXPECT_EQ(a.iv_bt_distribution.draws, b.iv_bt_distribution.draws);
  EXPECT_EQ(a.exp_bt_distribution.draws, b.exp_bt_distribution.draws);
}

TEST(CompareMechanisms, ConfoundedExposureSeparates) {
  const auto g = synth::generate(*synth::scenario("confounded-exposure", 2000, 5, 10));
  const auto r = compare_mechanisms(g.data, small_config(10));
  EXPECT_EQ(r.classification.label, StudyCase::case1);
  EXPECT_TRUE(r.separation.iv_closer);
  EXPECT_TRUE(r.separation.intervals_disjoint);
}

namespace {

// Every covariate row appears twice, once in each arm of both vectors, so the
// observed mean differences vanish and both fitted propensities equal 1/2.
Dataset paired_dataset(std::size_t pairs, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> normal;
  const auto n = static_cast<Eigen::Index>(2 * pairs);
  Eigen::MatrixXd x(n, 3);
  std::vector<std::uint8_t> z(2 * pairs), d(2 * pairs);
  for (std::size_t i = 0; i < pairs; ++i) {
    for (Eigen::Index j = 0; j < 3; ++j) {
      x(static_cast<Eigen::Index>(2 * i), j) = x(static_cast<Eigen::Index>(2 * i + 1), j) =
          normal(gen);
    }
    z[2 * i] = 1;
    d[2 * i + (i % 2)] = 1;
  }
  return Dataset(std::move(x), asif::testing::names(3), AssignmentVector(z), AssignmentVector(d));
}

}  // namespace

TEST(CompareMechanisms, ConstantPropensities) {
  int rejections = 0;
  for (std::uint64_t rep = 0; rep < 5; ++rep) {
    const auto data = paired_dataset(200, 50 + rep);
    const auto r = compare_mechanisms(data, small_config(rep, 1000));
    for (double p : r.instrument_fit.prediction.probabilities) ASSERT_NEAR(p, 0.5, 1e-8);
    for (double p : r.exposure_fit.prediction.probabilities) ASSERT_NEAR(p, 0.5, 1e-8);
    const auto& cr = r.cr_distribution.draws;
    const auto& iv = r.iv_bt_distribution.draws;
    const auto& ex = r.exp_bt_distribution.draws;
    rejections += stats::ks_two_sample(cr, iv).p_value < 0.001;
    rejections += stats::ks_two_sample(cr, ex).p_value < 0.001;
    rejections += stats::ks_two_sample(iv, ex).p_value < 0.001;
  }
  EXPECT_LE(rejections, 1);
}

TEST(CompareMechanisms, IdenticalVectorsSymmetric) {
  const auto base = asif::testing::random_dataset(300, 3, 77);
  const Dataset data(base.covariates(), base.covariate_names(), base.instrument(),
                     base.instrument());
  const auto r = compare_mechanisms(data, small_config(6, 1000));
  EXPECT_GT(stats::ks_two_sample(r.iv_bt_distribution.draws, r.exp_bt_distribution.draws).p_value,
            0.001);
  EXPECT_EQ(r.observed_iv, r.observed_exp);
  // Separate substreams, so the two p-values agree only up to Monte Carlo error.
  EXPECT_NEAR(r.p_iv, r.p_exp, 0.05);
  EXPECT_EQ(r.classification.reject_exposure, r.classification.reject_instrument);
}

TEST(FitPropensity, FallbackPolicy) {
  Eigen::MatrixXd x(40, 1);
  std::vector<std::uint8_t> y(40);
  for (int i = 0; i < 40; ++i) {
    x(i, 0) = i - 19.5;
    y[static_cast<std::size_t>(i)] = i >= 20;
  }
  ComparisonConfig cfg;
  EXPECT_THROW(fit_propensity(x, AssignmentVector(y), cfg, "exposure"), NumericalError);
  cfg.allow_ridge_fallback = true;
  const auto f = fit_propensity(x, AssignmentVector(y), cfg, "exposure");
  EXPECT_TRUE(f.ridge_fallback);
  EXPECT_TRUE(f.model.converged);
}

#include "asif/comparison.hpp"

#include <algorithm>
#include <cmath>

#include "asif/error.hpp"

namespace asif {

std::string_view to_string(StudyCase c) {
  switch (c) {
    case StudyCase::case1: return "Case 1";
    case StudyCase::case2: return "Case 2";
    case StudyCase::case3: return "Case 3";
    case StudyCase::case4: return "Case 4";
  }
  return "unknown";
}

std::string_view recommendation(StudyCase c) {
  switch (c) {
    case StudyCase::case1: return "Use IV analysis";
    case StudyCase::case2: return "Reject IV analysis";
    case StudyCase::case3: return "Use IV analysis or exposure analysis";
    case StudyCase::case4: return "Compare balance or bias of D and Z";
  }
  return "";
}

CaseClassification classify_case(double p_exposure, double p_instrument, double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw InputError("alpha must lie strictly inside (0, 1)");
  for (double p : {p_exposure, p_instrument}) {
    if (!(p > 0.0 && p <= 1.0)) throw InputError("p-values must lie in (0, 1]");
  }
  CaseClassification out;
  out.reject_exposure = p_exposure <= alpha;
  out.reject_instrument = p_instrument <= alpha;
  if (out.reject_exposure) {
    out.label = out.reject_instrument ? StudyCase::case4 : StudyCase::case1;
  } else {
    out.label = out.reject_instrument ? StudyCase::case2 : StudyCase::case3;
  }
  out.recommendation = recommendation(out.label);
  return out;
}

SeparationDiagnostics separation_diagnostics(std::span<const double> a,
                                             std::span<const double> b, std::size_t bins) {
  if (a.empty() || b.empty()) throw InputError("separation diagnostics need two nonempty samples");
  std::vector<double> sa(a.begin(), a.end());
  std::vector<double> sb(b.begin(), b.end());
  std::sort(sa.begin(), sa.end());
  std::sort(sb.begin(), sb.end());
  const double a_lo = stats::quantile_sorted(sa, 0.025);
  const double a_hi = stats::quantile_sorted(sa, 0.975);
  const double b_lo = stats::quantile_sorted(sb, 0.025);
  const double b_hi = stats::quantile_sorted(sb, 0.975);
  SeparationDiagnostics d;
  d.intervals_disjoint = a_hi < b_lo || b_hi < a_lo;
  d.overlap_fraction = d.intervals_disjoint ? 0.0 : stats::overlap_coefficient(sa, sb, bins);
  d.mean_gap = std::abs(stats::mean(sa) - stats::mean(sb));
  return d;
}

TestConfig ComparisonConfig::test_config() const {
  TestConfig t;
  t.n_draws = n_draws;
  t.alpha = alpha;
  t.seed = seed;
  t.statistic = StatisticKind::sqrt_mahalanobis;
  t.threads = threads;
  t.histogram_bins = histogram_bins;
  return t;
}

PropensityFit fit_propensity(const Eigen::MatrixXd& covariates, const AssignmentVector& labels,
                             const ComparisonConfig& config, std::string_view what) {
  PropensityFit fit;
  fit.model = fit_logistic(covariates, labels, config.logistic);
  if (!fit.model.converged) {
    if (!config.allow_ridge_fallback) {
      throw NumericalError(std::string(what) + " propensity model did not converge" +
                           (fit.model.separation_flag ? " (separation detected)" : "") +
                           "; refit with a ridge penalty");
    }
    LogisticOptions ridge = config.logistic;
    ridge.ridge = std::max(config.fallback_ridge, config.logistic.ridge);
    fit.model = fit_logistic(covariates, labels, ridge);
    fit.ridge_fallback = true;
    if (!fit.model.converged) {
      throw NumericalError(std::string(what) +
                           " propensity model did not converge even with the ridge fallback");
    }
  }
  fit.prediction = predict(fit.model, covariates);
  return fit;
}

namespace {

Distribution make_distribution(const TestResult& test) {
  Distribution d;
  d.draws = test.draws.at(0);
  d.q025 = test.components.at(0).summary.q025;
  d.q975 = test.components.at(0).summary.q975;
  d.mean = test.components.at(0).summary.mean;
  return d;
}

}  // namespace

ComparisonResult compare_mechanisms(const Dataset& data, const ComparisonConfig& config) {
  const TestConfig tc = config.test_config();
  tc.validate();
  ComparisonResult r;

  // Step 1: propensity scores for exposure and instrument.
  r.exposure_fit = fit_propensity(data.covariates(), data.exposure(), config, "exposure");
  r.instrument_fit = fit_propensity(data.covariates(), data.instrument(), config, "instrument");

  // Steps 2-3: draws from each fitted Bernoulli mechanism, sqrt(M) per draw.
  BernoulliMechanism iv_bt{r.instrument_fit.prediction.probabilities, config.max_redraws};
  BernoulliMechanism exp_bt{r.exposure_fit.prediction.probabilities, config.max_redraws};
  r.iv_bt_test = run_test(data, Target::instrument, iv_bt, tc);
  r.exp_bt_test = run_test(data, Target::exposure, exp_bt, tc);

  // Benchmark: complete randomization with the instrument's treated count,
  // plus the exposure's own complete-randomization test for the case table.
  r.cr_instrument_test = run_test(
      data, Target::instrument, CompleteMechanism{data.n_units(), data.instrument().n_treated()},
      tc);
  r.cr_exposure_test = run_test(
      data, Target::exposure, CompleteMechanism{data.n_units(), data.exposure().n_treated()}, tc);

  r.cr_distribution = make_distribution(r.cr_instrument_test);
  r.iv_bt_distribution = make_distribution(r.iv_bt_test);
  r.exp_bt_distribution = make_distribution(r.exp_bt_test);

  // Shared histogram grid across the three distributions.
  std::vector<double> pooled;
  for (const auto* d : {&r.cr_distribution, &r.iv_bt_distribution, &r.exp_bt_distribution}) {
    for (double v : d->draws) {
      if (!std::isnan(v)) pooled.push_back(v);
    }
  }
  if (pooled.empty()) throw NumericalError("no defined Mahalanobis draws");
  const auto [lo, hi] = std::minmax_element(pooled.begin(), pooled.end());
  const std::size_t bins =
      config.histogram_bins > 0 ? config.histogram_bins : stats::freedman_diaconis_bins(pooled);
  for (auto* d : {&r.cr_distribution, &r.iv_bt_distribution, &r.exp_bt_distribution}) {
    d->histogram = stats::histogram(d->draws, *lo, *hi, bins);
  }

  const auto& iv_obs = r.cr_instrument_test.components.at(0);
  const auto& exp_obs = r.cr_exposure_test.components.at(0);
  if (!iv_obs.observed || !exp_obs.observed || !iv_obs.p_value || !exp_obs.p_value) {
    throw NumericalError("observed Mahalanobis distance is undefined (a group has < 2 units)");
  }
  r.observed_iv = *iv_obs.observed;
  r.observed_exp = *exp_obs.observed;
  r.p_iv = *iv_obs.p_value;
  r.p_exp = *exp_obs.p_value;
  r.classification = classify_case(r.p_exp, r.p_iv, config.alpha);

  // Step 4: compare the distributions.
  auto defined = [](const std::vector<double>& v) {
    std::vector<double> out;
    out.reserve(v.size());
    for (double x : v) {
      if (!std::isnan(x)) out.push_back(x);
    }
    return out;
  };
  const auto iv = defined(r.iv_bt_distribution.draws);
  const auto ex = defined(r.exp_bt_distribution.draws);
  const auto sep = separation_diagnostics(iv, ex, config.histogram_bins);
  r.separation.intervals_disjoint = sep.intervals_disjoint;
  r.separation.overlap_fraction = sep.overlap_fraction;
  r.separation.mean_gap = sep.mean_gap;
  r.separation.iv_gap_to_cr = std::abs(r.iv_bt_distribution.mean - r.cr_distribution.mean);
  r.separation.exp_gap_to_cr = std::abs(r.exp_bt_distribution.mean - r.cr_distribution.mean);
  r.separation.iv_closer = r.separation.iv_gap_to_cr < r.separation.exp_gap_to_cr;
  r.separation.significantly_closer = r.separation.intervals_disjoint && r.separation.iv_closer;
  return r;
}

}  // namespace asif

#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "asif/dataset.hpp"
#include "asif/propensity.hpp"
#include "asif/randomization_test.hpp"
#include "asif/stats.hpp"

namespace asif {

/// The four reject / fail-to-reject combinations for exposure and instrument.
enum class StudyCase { case1 = 1, case2 = 2, case3 = 3, case4 = 4 };

std::string_view to_string(StudyCase c);
/// Analysis recommendation for a case, e.g. "Use IV analysis".
std::string_view recommendation(StudyCase c);

struct CaseClassification {
  StudyCase label = StudyCase::case3;
  std::string_view recommendation;
  bool reject_exposure = false;
  bool reject_instrument = false;
};

/// Case 1: reject D only; Case 2: reject Z only; Case 3: neither; Case 4: both.
/// Throws InputError for p-values outside (0, 1] or alpha outside (0, 1).
CaseClassification classify_case(double p_exposure, double p_instrument, double alpha);

struct SeparationDiagnostics {
  bool intervals_disjoint = false;  // [q2.5, q97.5] bands do not intersect
  double overlap_fraction = 0.0;    // histogram overlap coefficient, shared bins
  double mean_gap = 0.0;            // |mean(a) - mean(b)|
};

SeparationDiagnostics separation_diagnostics(std::span<const double> a,
                                             std::span<const double> b, std::size_t bins = 0);

/// A stored randomization distribution of sqrt(Mahalanobis).
struct Distribution {
  std::vector<double> draws;
  stats::Histogram histogram;  // on the grid shared by all three distributions
  double q025 = 0.0;
  double q975 = 0.0;
  double mean = 0.0;
};

struct PropensityFit {
  PropensityModel model;
  Prediction prediction;
  bool ridge_fallback = false;
};

struct ComparisonConfig {
  std::size_t n_draws = kDefaultDraws;
  double alpha = 0.05;
  std::uint64_t seed = 20190101;
  unsigned threads = 0;
  LogisticOptions logistic;
  /// Refit with `fallback_ridge` when a fit fails to converge or separates.
  bool allow_ridge_fallback = false;
  double fallback_ridge = 1.0;
  std::size_t max_redraws = kDefaultMaxRedraws;
  std::size_t histogram_bins = 0;  // 0 = Freedman-Diaconis on the pooled draws

  TestConfig test_config() const;
};

struct ComparisonResult {
  Distribution cr_distribution;
  Distribution iv_bt_distribution;
  Distribution exp_bt_distribution;
  double observed_iv = 0.0;   // sqrt(M) for the observed instrument
  double observed_exp = 0.0;  // sqrt(M) for the observed exposure
  double p_iv = 1.0;          // complete-randomization p-values
  double p_exp = 1.0;
  CaseClassification classification;

  struct Separation {
    bool intervals_disjoint = false;  // instrument vs exposure Bernoulli bands
    double overlap_fraction = 0.0;
    double mean_gap = 0.0;
    double iv_gap_to_cr = 0.0;
    double exp_gap_to_cr = 0.0;
    bool iv_closer = false;  // instrument distribution nearer the benchmark
    bool significantly_closer = false;  // disjoint bands and iv_closer
  } separation;

  PropensityFit exposure_fit;
  PropensityFit instrument_fit;
  TestResult cr_instrument_test;
  TestResult cr_exposure_test;
  TestResult iv_bt_test;
  TestResult exp_bt_test;
};

/// Fits both propensity models, draws from both fitted Bernoulli mechanisms
/// and from complete randomization (conditioning on the instrument's treated
/// count), and classifies the study from the complete-randomization tests.
ComparisonResult compare_mechanisms(const Dataset& data, const ComparisonConfig& config);

/// Propensity fit with the optional ridge fallback applied. Throws
/// NumericalError when the fit does not converge and no fallback is allowed.
PropensityFit fit_propensity(const Eigen::MatrixXd& covariates, const AssignmentVector& labels,
                             const ComparisonConfig& config, std::string_view what);

}  // namespace asif

#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace asif::stats {

/// Empirical quantile with linear interpolation between order statistics
/// (position (n-1)p in the sorted sample). `sorted` must be ascending.
double quantile_sorted(std::span<const double> sorted, double p);

/// Copies, sorts, and evaluates quantile_sorted.
double quantile(std::span<const double> values, double p);

double mean(std::span<const double> values);

/// Equal-width bins on [lower, upper]; the last bin is closed on the right.
struct Histogram {
  std::vector<double> edges;         // bins + 1 entries
  std::vector<std::size_t> counts;   // one per bin
  std::size_t bins() const noexcept { return counts.size(); }
  std::size_t total() const noexcept;
};

/// Freedman-Diaconis bin count for a sample, clamped to [1, max_bins]. Falls
/// back to Sturges' rule when the interquartile range is zero.
std::size_t freedman_diaconis_bins(std::span<const double> values, std::size_t max_bins = 200);

/// Histogram over [min, max] of `values` with `bins` bins (0 = Freedman-Diaconis).
Histogram histogram(std::span<const double> values, std::size_t bins = 0);

/// Histogram over explicit equal-width range. Values outside are dropped.
Histogram histogram(std::span<const double> values, double lower, double upper,
                    std::size_t bins);

/// Overlap coefficient sum_b min(p_a(b), p_b(b)) of two samples binned on a
/// shared equal-width grid spanning both. With `bins` = 0 the count is the
/// Freedman-Diaconis choice for the pooled sample.
double overlap_coefficient(std::span<const double> a, std::span<const double> b,
                           std::size_t bins = 0);

/// Standard normal CDF.
double normal_cdf(double x);

/// Asymptotic Kolmogorov survival function P(K > lambda).
double kolmogorov_survival(double lambda);

struct KsResult {
  double statistic;
  double p_value;
};

/// One-sample KS test of `values` against Uniform(0, 1).
KsResult ks_uniform(std::span<const double> values);

/// Two-sample KS test (asymptotic p-value with the Stephens correction).
KsResult ks_two_sample(std::span<const double> a, std::span<const double> b);

}  // namespace asif::stats

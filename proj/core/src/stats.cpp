#include "asif/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "asif/error.hpp"

namespace asif::stats {

double quantile_sorted(std::span<const double> sorted, double p) {
  if (sorted.empty()) throw InputError("quantile of an empty sample");
  if (sorted.size() == 1) return sorted[0];
  const double h = (static_cast<double>(sorted.size()) - 1.0) * std::clamp(p, 0.0, 1.0);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = h - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

double quantile(std::span<const double> values, double p) {
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  return quantile_sorted(sorted, p);
}

double mean(std::span<const double> values) {
  if (values.empty()) throw InputError("mean of an empty sample");
  return std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
}

std::size_t Histogram::total() const noexcept {
  return std::accumulate(counts.begin(), counts.end(), std::size_t{0});
}

std::size_t freedman_diaconis_bins(std::span<const double> values, std::size_t max_bins) {
  if (values.size() < 2) return 1;
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  const double range = sorted.back() - sorted.front();
  if (!(range > 0.0)) return 1;
  const double iqr = quantile_sorted(sorted, 0.75) - quantile_sorted(sorted, 0.25);
  std::size_t bins = 0;
  if (iqr > 0.0) {
    const double width = 2.0 * iqr / std::cbrt(static_cast<double>(sorted.size()));
    bins = static_cast<std::size_t>(std::ceil(range / width));
  } else {
    bins = static_cast<std::size_t>(std::ceil(std::log2(static_cast<double>(sorted.size())))) + 1;
  }
  return std::clamp<std::size_t>(bins, 1, std::max<std::size_t>(max_bins, 1));
}

Histogram histogram(std::span<const double> values, double lower, double upper,
                    std::size_t bins) {
  bins = std::max<std::size_t>(bins, 1);
  Histogram h;
  if (!(upper > lower)) {
    // Degenerate range: a single unit-width bin centred on the value.
    lower -= 0.5;
    upper += 0.5;
    bins = 1;
  }
  h.edges.resize(bins + 1);
  const double width = (upper - lower) / static_cast<double>(bins);
  for (std::size_t b = 0; b <= bins; ++b) h.edges[b] = lower + width * static_cast<double>(b);
  h.edges.back() = upper;
  h.counts.assign(bins, 0);
  for (double v : values) {
    if (!(v >= lower && v <= upper)) continue;
    auto b = static_cast<std::size_t>((v - lower) / width);
    if (b >= bins) b = bins - 1;
    ++h.counts[b];
  }
  return h;
}

Histogram histogram(std::span<const double> values, std::size_t bins) {
  if (values.empty()) return histogram(values, 0.0, 1.0, 1);
  const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  if (bins == 0) bins = freedman_diaconis_bins(values);
  return histogram(values, *lo, *hi, bins);
}

double overlap_coefficient(std::span<const double> a, std::span<const double> b,
                           std::size_t bins) {
  if (a.empty() || b.empty()) throw InputError("overlap coefficient needs two nonempty samples");
  const auto [alo, ahi] = std::minmax_element(a.begin(), a.end());
  const auto [blo, bhi] = std::minmax_element(b.begin(), b.end());
  const double lower = std::min(*alo, *blo);
  const double upper = std::max(*ahi, *bhi);
  if (bins == 0) {
    std::vector<double> pooled(a.begin(), a.end());
    pooled.insert(pooled.end(), b.begin(), b.end());
    bins = freedman_diaconis_bins(pooled);
  }
  const auto ha = histogram(a, lower, upper, bins);
  const auto hb = histogram(b, lower, upper, bins);
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  double overlap = 0.0;
  for (std::size_t i = 0; i < ha.bins(); ++i) {
    overlap += std::min(static_cast<double>(ha.counts[i]) / na,
                        static_cast<double>(hb.counts[i]) / nb);
  }
  return std::clamp(overlap, 0.0, 1.0);
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

double kolmogorov_survival(double lambda) {
  if (lambda <= 0.0) return 1.0;
  if (lambda < 0.2) return 1.0;
  double sum = 0.0;
  for (int k = 1; k <= 100; ++k) {
    const double term = std::exp(-2.0 * k * k * lambda * lambda);
    sum += (k % 2 == 1 ? 2.0 : -2.0) * term;
    if (term < 1e-16) break;
  }
  return std::clamp(sum, 0.0, 1.0);
}

KsResult ks_uniform(std::span<const double> values) {
  if (values.empty()) throw InputError("KS test of an empty sample");
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  const double n = static_cast<double>(sorted.size());
  double d = 0.0;
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    const double u = std::clamp(sorted[i], 0.0, 1.0);
    d = std::max({d, (static_cast<double>(i) + 1.0) / n - u, u - static_cast<double>(i) / n});
  }
  const double sqrt_n = std::sqrt(n);
  return {d, kolmogorov_survival((sqrt_n + 0.12 + 0.11 / sqrt_n) * d)};
}

KsResult ks_two_sample(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) throw InputError("KS test needs two nonempty samples");
  std::vector<double> sa(a.begin(), a.end());
  std::vector<double> sb(b.begin(), b.end());
  std::sort(sa.begin(), sa.end());
  std::sort(sb.begin(), sb.end());
  const double na = static_cast<double>(sa.size());
  const double nb = static_cast<double>(sb.size());
  std::size_t i = 0;
  std::size_t j = 0;
  double d = 0.0;
  while (i < sa.size() && j < sb.size()) {
    const double v = std::min(sa[i], sb[j]);
    while (i < sa.size() && sa[i] == v) ++i;
    while (j < sb.size() && sb[j] == v) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  const double ne = std::sqrt(na * nb / (na + nb));
  return {d, kolmogorov_survival((ne + 0.12 + 0.11 / ne) * d)};
}

}  // namespace asif::stats

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace asif {

/// A binary treatment-style vector (instrument, exposure, or a hypothetical
/// draw of either) together with its treated count.
class AssignmentVector {
 public:
  AssignmentVector() = default;
  /// Throws InputError when any entry is not 0 or 1.
  explicit AssignmentVector(std::vector<std::uint8_t> values);

  std::size_t size() const noexcept { return values_.size(); }
  std::size_t n_treated() const noexcept { return n_treated_; }
  std::size_t n_control() const noexcept { return values_.size() - n_treated_; }
  bool treated(std::size_t i) const { return values_[i] != 0; }
  std::uint8_t operator[](std::size_t i) const { return values_[i]; }
  std::span<const std::uint8_t> values() const noexcept { return values_; }

  /// Swaps the treated and control labels.
  AssignmentVector complement() const;

  friend bool operator==(const AssignmentVector&, const AssignmentVector&) = default;

 private:
  std::vector<std::uint8_t> values_;
  std::size_t n_treated_ = 0;
};

/// Which observed vector a test is about.
enum class Target { instrument, exposure };

enum class StatisticKind {
  prevalence_diff,
  scmd,
  iv_bias,
  mahalanobis,
  sqrt_mahalanobis
};

/// How the IV-bias denominator behaves across hypothetical draws.
enum class BiasDenominatorMode {
  fixed_observed,  // strength from the observed instrument, reused per draw
  per_draw         // strength recomputed from each drawn vector
};

enum class MechanismKind { complete, block, bernoulli };

std::string_view to_string(Target t);
std::string_view to_string(StatisticKind s);
std::string_view to_string(BiasDenominatorMode m);
std::string_view to_string(MechanismKind m);

std::optional<StatisticKind> parse_statistic(std::string_view name);
std::optional<Target> parse_target(std::string_view name);
std::optional<BiasDenominatorMode> parse_bias_mode(std::string_view name);

/// True for statistics that yield one value per covariate.
bool is_per_covariate(StatisticKind s);

/// Number of Monte Carlo draws used when nothing else is requested.
inline constexpr std::size_t kDefaultDraws = 10'000;
/// Below this the Monte Carlo distribution is considered coarse.
inline constexpr std::size_t kAdvisoryMinDraws = 5'000;

/// Run-level settings for a randomization test.
struct TestConfig {
  std::size_t n_draws = kDefaultDraws;
  double alpha = 0.05;
  std::uint64_t seed = 20190101;
  StatisticKind statistic = StatisticKind::sqrt_mahalanobis;
  BiasDenominatorMode bias_mode = BiasDenominatorMode::fixed_observed;
  /// 0 selects the default (ASIF_THREADS or hardware concurrency).
  unsigned threads = 0;
  /// Number of histogram bins for stored draw summaries; 0 = Freedman-Diaconis.
  std::size_t histogram_bins = 0;

  /// Throws InputError when n_draws == 0 or alpha is outside (0, 1).
  void validate() const;
};

}  // namespace asif

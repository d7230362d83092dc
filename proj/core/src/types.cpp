#include "asif/types.hpp"

#include <numeric>

#include "asif/error.hpp"

namespace asif {

namespace {

std::string join_issues(const std::vector<ValidationIssue>& issues) {
  std::string out = "dataset validation failed (" + std::to_string(issues.size()) +
                    (issues.size() == 1 ? " issue)" : " issues)");
  for (const auto& issue : issues) {
    out += "\n  - ";
    out += issue.message;
  }
  return out;
}

}  // namespace

ValidationError::ValidationError(std::vector<ValidationIssue> issues)
    : InputError(join_issues(issues)), issues_(std::move(issues)) {}

AssignmentVector::AssignmentVector(std::vector<std::uint8_t> values)
    : values_(std::move(values)) {
  for (std::size_t i = 0; i < values_.size(); ++i) {
    if (values_[i] > 1) {
      throw InputError("assignment entry " + std::to_string(i) + " is not binary");
    }
  }
  n_treated_ = std::accumulate(values_.begin(), values_.end(), std::size_t{0});
}

AssignmentVector AssignmentVector::complement() const {
  std::vector<std::uint8_t> flipped(values_.size());
  for (std::size_t i = 0; i < values_.size(); ++i) flipped[i] = values_[i] ? 0 : 1;
  return AssignmentVector(std::move(flipped));
}

std::string_view to_string(Target t) {
  return t == Target::instrument ? "instrument" : "exposure";
}

std::string_view to_string(StatisticKind s) {
  switch (s) {
    case StatisticKind::prevalence_diff: return "prevalence_diff";
    case StatisticKind::scmd: return "scmd";
    case StatisticKind::iv_bias: return "bias";
    case StatisticKind::mahalanobis: return "mahalanobis";
    case StatisticKind::sqrt_mahalanobis: return "sqrt_mahalanobis";
  }
  return "unknown";
}

std::string_view to_string(BiasDenominatorMode m) {
  return m == BiasDenominatorMode::fixed_observed ? "fixed_observed" : "per_draw";
}

std::string_view to_string(MechanismKind m) {
  switch (m) {
    case MechanismKind::complete: return "complete";
    case MechanismKind::block: return "block";
    case MechanismKind::bernoulli: return "bernoulli";
  }
  return "unknown";
}

std::optional<StatisticKind> parse_statistic(std::string_view name) {
  if (name == "prevalence_diff" || name == "balance") return StatisticKind::prevalence_diff;
  if (name == "scmd") return StatisticKind::scmd;
  if (name == "bias" || name == "iv_bias") return StatisticKind::iv_bias;
  if (name == "mahalanobis") return StatisticKind::mahalanobis;
  if (name == "sqrt_mahalanobis") return StatisticKind::sqrt_mahalanobis;
  return std::nullopt;
}

std::optional<Target> parse_target(std::string_view name) {
  if (name == "instrument" || name == "Z") return Target::instrument;
  if (name == "exposure" || name == "D") return Target::exposure;
  return std::nullopt;
}

std::optional<BiasDenominatorMode> parse_bias_mode(std::string_view name) {
  if (name == "fixed_observed" || name == "fixed") return BiasDenominatorMode::fixed_observed;
  if (name == "per_draw") return BiasDenominatorMode::per_draw;
  return std::nullopt;
}

bool is_per_covariate(StatisticKind s) {
  return s == StatisticKind::prevalence_diff || s == StatisticKind::scmd ||
         s == StatisticKind::iv_bias;
}

void TestConfig::validate() const {
  if (n_draws == 0) throw InputError("number of draws must be at least 1");
  if (!(alpha > 0.0 && alpha < 1.0)) throw InputError("alpha must lie strictly inside (0, 1)");
}

}  // namespace asif

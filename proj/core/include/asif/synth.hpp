#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "asif/dataset.hpp"

namespace asif::synth {

/// How the instrument is assigned.
struct InstrumentModel {
  enum class Kind { randomized, confounded } kind = Kind::randomized;
  /// Slope on the confounding index (confounded only).
  double strength = 0.0;
  /// Treated fraction under complete randomization (randomized only).
  double treated_fraction = 0.5;
};

/// logit P(D = 1) = intercept + instrument_effect * Z + confounding_strength * c(x).
struct ExposureModel {
  double instrument_effect = 1.0;
  double confounding_strength = 0.0;
  double intercept = -0.5;
};

/// Scenario family. Covariates: the first min(K, 2) are standard normal, the
/// rest Bernoulli(0.3). c(x) = sum_j standardized x_j / sqrt(K), so Var c = 1.
struct ScenarioSpec {
  std::size_t n_units = 2000;
  std::size_t k_covariates = 5;
  InstrumentModel instrument;
  ExposureModel exposure;
  std::uint64_t seed = 1;

  /// Throws InputError for n_units < 20, k_covariates == 0, non-finite
  /// strengths, or a treated fraction outside (0, 1).
  void validate() const;
};

inline constexpr double kBinaryPrevalence = 0.3;
inline constexpr std::size_t kContinuousCovariates = 2;

/// Everything needed to recompute each unit's generating probabilities.
struct GroundTruth {
  ScenarioSpec spec;
  std::vector<double> index_weights;   // weight of each covariate in c(x)
  std::vector<double> index_centers;   // population mean of each covariate
  std::vector<double> index_scales;    // population SD of each covariate
  std::vector<double> instrument_probabilities;  // empty when randomized
  std::vector<double> exposure_probabilities;
  std::size_t n_regenerations = 0;     // degenerate vectors redrawn
  std::uint64_t final_subseed = 0;
};

struct Generated {
  Dataset data;
  GroundTruth truth;
};

/// Deterministic in spec (including seed).
Generated generate(const ScenarioSpec& spec);

/// c(x) for one unit under the frozen scenario family.
double confounding_index(const GroundTruth& truth, const Eigen::Ref<const Eigen::RowVectorXd>& x);

/// Named scenarios; see scenario_names().
std::optional<ScenarioSpec> scenario(const std::string& name, std::size_t n_units,
                                     std::size_t k_covariates, std::uint64_t seed);
std::vector<std::string> scenario_names();

/// Ground truth as a JSON document.
void write_ground_truth(std::ostream& out, const GroundTruth& truth);

}  // namespace asif::synth

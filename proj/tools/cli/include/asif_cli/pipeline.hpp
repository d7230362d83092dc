#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "asif/mechanisms.hpp"
#include "asif/types.hpp"

namespace asif::cli {

inline constexpr int kSchemaVersion = 1;
/// Rule-of-thumb SCMD threshold, recorded as annotation only.
inline constexpr double kScmdThreshold = 0.1;

struct PipelineOptions {
  std::string data_path;
  std::string instrument = "Z";
  std::string exposure = "D";
  std::vector<std::string> covariates;  // empty: every other column
  std::vector<std::string> indicator_columns;
  std::vector<StatisticKind> statistics = {StatisticKind::scmd, StatisticKind::iv_bias,
                                           StatisticKind::sqrt_mahalanobis};
  std::string mechanism = "complete";  // complete | block:<column> | bernoulli
  std::size_t draws = kDefaultDraws;
  double alpha = 0.05;
  std::uint64_t seed = 20190101;
  std::string out = "report.json";
  std::string plots_dir;  // empty: "plots" next to the report
  unsigned threads = 0;
  char delimiter = ',';
  BiasDenominatorMode bias_mode = BiasDenominatorMode::fixed_observed;
  double ridge = 0.0;
  bool ridge_fallback = false;
  std::size_t max_redraws = kDefaultMaxRedraws;
  std::size_t bins = 0;
  bool exact = false;
  std::uint64_t cap = kDefaultEnumerationCap;
};

/// Runs ingestion, the per-covariate and global tests, and (Monte Carlo mode
/// only) the mechanism comparison; writes the report and plot-data tables.
/// Progress lines go to `log`.
void run_pipeline(const PipelineOptions& options, std::ostream& log);

/// Plot-data file names written into the plots directory.
namespace files {
inline constexpr const char* propensity = "propensity_histograms.csv";
inline constexpr const char* scmd = "scmd_dotplot.csv";
inline constexpr const char* bands = "covariate_bands.csv";
inline constexpr const char* permutation = "permutation_histograms.csv";
inline constexpr const char* mahalanobis = "mahalanobis_histograms.csv";
inline constexpr const char* markers = "mahalanobis_markers.csv";
}  // namespace files

}  // namespace asif::cli

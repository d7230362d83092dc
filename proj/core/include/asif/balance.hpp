#pragma once

#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "asif/types.hpp"

namespace asif::balance {

/// Balance of a covariate between groups: mean over treated minus mean over
/// control. Throws InputError if either group is empty or sizes differ.
double prevalence_difference(std::span<const double> x, const AssignmentVector& z);

/// Standardized covariate mean difference using sqrt((s1^2 + s0^2) / 2) with
/// N-1 variance denominators. Returns 0 when the group means coincide and
/// nullopt ("undefined") when the means differ but the pooled SD is zero.
std::optional<double> scmd(std::span<const double> x, const AssignmentVector& z);

/// Instrument strength: mean of d over z = 1 minus mean of d over z = 0.
double instrument_strength(const AssignmentVector& z, const AssignmentVector& d);

/// Denominator policy for IV bias.
struct BiasDenominator {
  BiasDenominatorMode mode = BiasDenominatorMode::fixed_observed;
  double observed_strength = 1.0;  // used when mode == fixed_observed

  static BiasDenominator fixed(double strength) {
    return {BiasDenominatorMode::fixed_observed, strength};
  }
  static BiasDenominator per_draw() { return {BiasDenominatorMode::per_draw, 0.0}; }
};

/// IV bias: prevalence difference of x across z divided by the instrument
/// strength (fixed or recomputed from z and d). nullopt when the denominator
/// is zero.
std::optional<double> iv_bias(std::span<const double> x, const AssignmentVector& z,
                              const AssignmentVector& d, const BiasDenominator& denominator);

/// cov(mean_1 - mean_0) estimated as S_pooled * (1/N1 + 1/N0), S_pooled the
/// pooled within-group sample covariance. Requires N1 >= 2 and N0 >= 2.
Eigen::MatrixXd mean_difference_covariance(const Eigen::MatrixXd& x, const AssignmentVector& z);

/// Per-covariate mean differences (treated minus control).
Eigen::VectorXd mean_difference(const Eigen::MatrixXd& x, const AssignmentVector& z);

struct GlobalBalance {
  double mahalanobis = 0.0;
  double sqrt_mahalanobis = 0.0;
  std::size_t covariance_rank = 0;
  bool pseudo_inverse_used = false;
};

/// Relative cutoff for discarding small eigenvalues in the pseudo-inverse.
inline constexpr double kPinvRelativeCutoff = 1e-10;

struct SymmetricPseudoInverse {
  Eigen::MatrixXd inverse;
  std::size_t rank = 0;
};

/// Moore-Penrose inverse of a symmetric matrix; eigenvalues below
/// kPinvRelativeCutoff * (largest |eigenvalue|) are treated as zero.
SymmetricPseudoInverse pseudo_inverse(const Eigen::MatrixXd& symmetric);

/// diff' * pinv(cov) * diff.
GlobalBalance quadratic_form(const Eigen::VectorXd& diff, const Eigen::MatrixXd& cov);

/// Global balance via the Mahalanobis distance of the mean-difference vector.
GlobalBalance mahalanobis(const Eigen::MatrixXd& x, const AssignmentVector& z);

enum class VectorKind { prevalence_diff, scmd, bias };

struct BalanceVector {
  VectorKind kind = VectorKind::prevalence_diff;
  std::vector<std::optional<double>> per_covariate;
};

/// Evaluates one covariate-specific statistic for every column of x.
BalanceVector balance_vector(const Eigen::MatrixXd& x, const AssignmentVector& z,
                             VectorKind kind, const AssignmentVector* exposure = nullptr,
                             const BiasDenominator& denominator = {});

/// Precomputes centred data so that every later draw costs O(N K). Used by
/// the randomization engine; results agree with the free functions above.
class CovariateMoments {
 public:
  explicit CovariateMoments(const Eigen::MatrixXd& x);

  struct Groups {
    std::size_t n1 = 0;
    std::size_t n0 = 0;
    Eigen::VectorXd diff;   // mean_1 - mean_0
    Eigen::VectorXd var1;   // N1 - 1 denominators; NaN when N1 < 2
    Eigen::VectorXd var0;
  };

  Groups operator()(const AssignmentVector& z) const;
  std::size_t n_covariates() const noexcept { return static_cast<std::size_t>(centred_.cols()); }

  /// SCMD of covariate j from precomputed group moments (same rules as scmd()).
  std::optional<double> scmd(const Groups& g, Eigen::Index j) const;

 private:
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> centred_;
  Eigen::VectorXd total_squares_;
  Eigen::VectorXd overall_var_;
};

/// Mahalanobis evaluator using one pseudo-inverse of the total scatter and a
/// rank-one update per draw; falls back to the direct computation when the
/// update is ill-conditioned.
class MahalanobisEvaluator {
 public:
  explicit MahalanobisEvaluator(const Eigen::MatrixXd& x);
  GlobalBalance operator()(const AssignmentVector& z) const;

 private:
  Eigen::MatrixXd x_;
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> centred_;
  Eigen::MatrixXd scatter_;
  SymmetricPseudoInverse scatter_pinv_;
};

}  // namespace asif::balance

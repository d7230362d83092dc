#pragma once

#include <cstddef>
#include <vector>

#include <Eigen/Dense>

#include "asif/types.hpp"

namespace asif {

struct LogisticOptions {
  std::size_t max_iter = 100;
  double tolerance = 1e-8;  // on the absolute change in (penalized) deviance
  double ridge = 0.0;       // L2 penalty on standardized slopes; intercept unpenalized
};

/// A fitted logistic propensity model for e(x) = P(label = 1 | x).
struct PropensityModel {
  /// Original-scale coefficients, intercept first (K + 1 entries).
  Eigen::VectorXd coefficients;
  /// Coefficients on the internally standardized design, intercept first.
  Eigen::VectorXd standardized_coefficients;
  /// Per-covariate centre and scale used internally.
  Eigen::VectorXd centers;
  Eigen::VectorXd scales;
  bool converged = false;
  std::size_t n_iterations = 0;
  double deviance = 0.0;
  /// Deviance after each accepted iteration, starting from the initial fit.
  std::vector<double> deviance_trace;
  bool separation_flag = false;
  double ridge = 0.0;

  std::size_t n_covariates() const noexcept { return static_cast<std::size_t>(centers.size()); }
};

/// Maximum-likelihood (optionally ridge-penalized) logistic regression by
/// iteratively reweighted least squares with step halving. Throws InputError
/// for constant labels, N <= K + 1, or a rank-deficient design (naming the
/// offending columns). Non-convergence is reported through `converged`.
PropensityModel fit_logistic(const Eigen::MatrixXd& covariates, const AssignmentVector& labels,
                             const LogisticOptions& options = {});

/// Clamp applied to predicted propensities before Bernoulli sampling.
inline constexpr double kPropensityClamp = 1e-6;

struct Prediction {
  std::vector<double> probabilities;
  std::size_t n_clamped = 0;
};

/// Inverse-logit of the linear predictor, clamped to [eps, 1 - eps].
Prediction predict(const PropensityModel& model, const Eigen::MatrixXd& covariates,
                   double eps = kPropensityClamp);

/// Unclamped fitted probabilities (for diagnostics and tests).
Eigen::VectorXd fitted_probabilities(const PropensityModel& model,
                                     const Eigen::MatrixXd& covariates);

}  // namespace asif

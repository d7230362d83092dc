#include "asif/propensity.hpp"

#include <algorithm>
#include <cmath>

#include "asif/error.hpp"

namespace asif {

namespace {

// Separation heuristics: a standardized slope this large together with
// fitted probabilities pinned to 0 or 1 (|eta| beyond the limit).
constexpr double kSeparationCoefficient = 10.0;
constexpr double kSeparationEta = 30.0;
constexpr int kMaxHalvings = 30;

double softplus(double t) { return t > 0 ? t + std::log1p(std::exp(-t)) : std::log1p(std::exp(t)); }

double logistic(double t) {
  if (t >= 0) return 1.0 / (1.0 + std::exp(-t));
  const double e = std::exp(t);
  return e / (1.0 + e);
}

double deviance(const Eigen::VectorXd& eta, const Eigen::VectorXd& y) {
  double dev = 0.0;
  for (Eigen::Index i = 0; i < eta.size(); ++i) dev += softplus(eta(i)) - y(i) * eta(i);
  return 2.0 * dev;
}

double penalty(const Eigen::VectorXd& beta, double ridge) {
  return ridge > 0.0 ? ridge * beta.tail(beta.size() - 1).squaredNorm() : 0.0;
}

}  // namespace

PropensityModel fit_logistic(const Eigen::MatrixXd& covariates, const AssignmentVector& labels,
                             const LogisticOptions& options) {
  const Eigen::Index n = covariates.rows();
  const Eigen::Index k = covariates.cols();
  if (static_cast<std::size_t>(n) != labels.size()) {
    throw InputError("label length does not match covariate rows");
  }
  if (labels.n_treated() == 0 || labels.n_control() == 0) {
    throw InputError("logistic regression needs non-constant labels");
  }
  if (n <= k + 1) {
    throw InputError("logistic regression needs more units than coefficients (N > K + 1)");
  }
  if (options.ridge < 0.0 || !std::isfinite(options.ridge)) {
    throw InputError("ridge penalty must be finite and nonnegative");
  }

  PropensityModel model;
  model.ridge = options.ridge;
  model.centers = covariates.colwise().mean().transpose();
  model.scales.resize(k);
  std::vector<Eigen::Index> constant;
  for (Eigen::Index j = 0; j < k; ++j) {
    const double ss = (covariates.col(j).array() - model.centers(j)).square().sum();
    model.scales(j) = std::sqrt(ss / static_cast<double>(n - 1));
    if (!(model.scales(j) > 0.0)) constant.push_back(j);
  }
  if (!constant.empty()) {
    std::string cols;
    for (auto j : constant) cols += (cols.empty() ? "" : ", ") + std::to_string(j);
    throw InputError("rank-deficient design: constant covariate column(s) " + cols);
  }

  Eigen::MatrixXd design(n, k + 1);
  design.col(0).setOnes();
  for (Eigen::Index j = 0; j < k; ++j) {
    design.col(j + 1) = (covariates.col(j).array() - model.centers(j)) / model.scales(j);
  }
  if (options.ridge == 0.0) {
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
    qr.setThreshold(1e-10);
    if (qr.rank() < k + 1) {
      std::string cols;
      const auto& perm = qr.colsPermutation().indices();
      for (Eigen::Index r = qr.rank(); r < k + 1; ++r) {
        const auto c = perm(r);
        cols += (cols.empty() ? "" : ", ") + (c == 0 ? std::string("intercept")
                                                     : std::to_string(c - 1));
      }
      throw InputError("rank-deficient design: linearly dependent covariate column(s) " + cols);
    }
  }

  Eigen::VectorXd y(n);
  for (Eigen::Index i = 0; i < n; ++i) y(i) = labels[static_cast<std::size_t>(i)];
  const double ybar = y.mean();

  Eigen::VectorXd beta = Eigen::VectorXd::Zero(k + 1);
  beta(0) = std::log(ybar / (1.0 - ybar));
  Eigen::VectorXd eta = design * beta;
  double objective = deviance(eta, y) + penalty(beta, options.ridge);
  model.deviance_trace.push_back(deviance(eta, y));

  Eigen::MatrixXd penalty_matrix = Eigen::MatrixXd::Identity(k + 1, k + 1) * options.ridge;
  penalty_matrix(0, 0) = 0.0;

  bool converged = false;
  double last_change = 0.0;
  std::size_t iter = 0;
  while (iter < options.max_iter) {
    ++iter;
    Eigen::VectorXd p(n), w(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      p(i) = logistic(eta(i));
      w(i) = std::max(p(i) * (1.0 - p(i)), 1e-12);
    }
    const Eigen::MatrixXd hessian =
        design.transpose() * w.asDiagonal() * design + penalty_matrix;
    const Eigen::VectorXd gradient = design.transpose() * (y - p) - penalty_matrix * beta;
    const Eigen::VectorXd step = hessian.ldlt().solve(gradient);
    if (!step.allFinite()) throw NumericalError("IRLS step is not finite");

    double t = 1.0;
    Eigen::VectorXd candidate = beta + step;
    Eigen::VectorXd candidate_eta = design * candidate;
    double candidate_obj = deviance(candidate_eta, y) + penalty(candidate, options.ridge);
    int halvings = 0;
    while (!(candidate_obj <= objective) && halvings < kMaxHalvings) {
      t *= 0.5;
      candidate = beta + t * step;
      candidate_eta = design * candidate;
      candidate_obj = deviance(candidate_eta, y) + penalty(candidate, options.ridge);
      ++halvings;
    }
    if (!(candidate_obj <= objective)) {
      // No descent along the Newton direction: at the optimum to rounding.
      converged = true;
      last_change = 0.0;
      break;
    }
    last_change = objective - candidate_obj;
    beta = candidate;
    eta = candidate_eta;
    objective = candidate_obj;
    model.deviance_trace.push_back(deviance(eta, y));
    if (last_change < options.tolerance) {
      converged = true;
      break;
    }
  }

  model.n_iterations = iter;
  model.standardized_coefficients = beta;
  model.deviance = deviance(eta, y);

  const double max_slope = k > 0 ? beta.tail(k).cwiseAbs().maxCoeff() : 0.0;
  const double max_eta = eta.cwiseAbs().maxCoeff();
  if (max_slope > kSeparationCoefficient && (!converged || max_eta > kSeparationEta)) {
    model.separation_flag = true;
    converged = false;
  }
  model.converged = converged;

  model.coefficients.resize(k + 1);
  double intercept = beta(0);
  for (Eigen::Index j = 0; j < k; ++j) {
    model.coefficients(j + 1) = beta(j + 1) / model.scales(j);
    intercept -= beta(j + 1) * model.centers(j) / model.scales(j);
  }
  model.coefficients(0) = intercept;
  return model;
}

Eigen::VectorXd fitted_probabilities(const PropensityModel& model,
                                     const Eigen::MatrixXd& covariates) {
  if (static_cast<std::size_t>(covariates.cols()) != model.n_covariates()) {
    throw InputError("covariate column count " + std::to_string(covariates.cols()) +
                     " does not match the fitted model (" +
                     std::to_string(model.n_covariates()) + ")");
  }
  const Eigen::Index k = covariates.cols();
  Eigen::VectorXd eta =
      covariates * model.coefficients.tail(k) +
      Eigen::VectorXd::Constant(covariates.rows(), model.coefficients(0));
  return eta.unaryExpr([](double t) { return logistic(t); });
}

Prediction predict(const PropensityModel& model, const Eigen::MatrixXd& covariates, double eps) {
  const Eigen::VectorXd p = fitted_probabilities(model, covariates);
  Prediction out;
  out.probabilities.resize(static_cast<std::size_t>(p.size()));
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    double v = p(i);
    if (v < eps) {
      v = eps;
      ++out.n_clamped;
    } else if (v > 1.0 - eps) {
      v = 1.0 - eps;
      ++out.n_clamped;
    }
    out.probabilities[static_cast<std::size_t>(i)] = v;
  }
  return out;
}

}  // namespace asif

#include "asif/balance.hpp"

#include <algorithm>
#include <cmath>

#include "asif/error.hpp"

namespace asif::balance {

namespace {

// Pooled variance at or below this fraction of the covariate's overall
// variance counts as zero.
constexpr double kZeroVarianceFraction = 1e-13;

// Below this, 1 - c*a is too close to cancellation for the rank-one update.
constexpr double kRankOneConditioning = 1e-6;

void require_groups(std::size_t n, const AssignmentVector& z) {
  if (z.size() != n) throw InputError("assignment length does not match covariate rows");
  if (z.n_treated() == 0 || z.n_control() == 0) {
    throw InputError("both assignment groups must be nonempty");
  }
}

struct GroupStats {
  double mean1 = 0.0, mean0 = 0.0, var1 = 0.0, var0 = 0.0, overall_var = 0.0;
};

GroupStats group_stats(std::span<const double> x, const AssignmentVector& z) {
  require_groups(x.size(), z);
  GroupStats g;
  double sum1 = 0.0, sum0 = 0.0, total = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    (z.treated(i) ? sum1 : sum0) += x[i];
    total += x[i];
  }
  const auto n1 = static_cast<double>(z.n_treated());
  const auto n0 = static_cast<double>(z.n_control());
  g.mean1 = sum1 / n1;
  g.mean0 = sum0 / n0;
  const double grand = total / static_cast<double>(x.size());
  double ss1 = 0.0, ss0 = 0.0, ss = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dev = x[i] - (z.treated(i) ? g.mean1 : g.mean0);
    (z.treated(i) ? ss1 : ss0) += dev * dev;
    ss += (x[i] - grand) * (x[i] - grand);
  }
  g.var1 = n1 > 1 ? ss1 / (n1 - 1) : std::nan("");
  g.var0 = n0 > 1 ? ss0 / (n0 - 1) : std::nan("");
  g.overall_var = x.size() > 1 ? ss / static_cast<double>(x.size() - 1) : 0.0;
  return g;
}

std::optional<double> standardize(double diff, double var1, double var0, double overall_var) {
  if (diff == 0.0) return 0.0;
  const double pooled = 0.5 * (std::max(var1, 0.0) + std::max(var0, 0.0));
  if (!std::isfinite(pooled) || pooled <= kZeroVarianceFraction * overall_var) {
    return std::nullopt;
  }
  return diff / std::sqrt(pooled);
}

std::span<const double> column(const Eigen::MatrixXd& x, Eigen::Index j) {
  return {x.col(j).data(), static_cast<std::size_t>(x.rows())};
}

}  // namespace

double prevalence_difference(std::span<const double> x, const AssignmentVector& z) {
  require_groups(x.size(), z);
  double sum1 = 0.0, sum0 = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) (z.treated(i) ? sum1 : sum0) += x[i];
  return sum1 / static_cast<double>(z.n_treated()) - sum0 / static_cast<double>(z.n_control());
}

std::optional<double> scmd(std::span<const double> x, const AssignmentVector& z) {
  const auto g = group_stats(x, z);
  return standardize(g.mean1 - g.mean0, g.var1, g.var0, g.overall_var);
}

double instrument_strength(const AssignmentVector& z, const AssignmentVector& d) {
  if (d.size() != z.size()) throw InputError("exposure length does not match assignment");
  require_groups(z.size(), z);
  std::size_t d1 = 0, d0 = 0;
  for (std::size_t i = 0; i < z.size(); ++i) (z.treated(i) ? d1 : d0) += d[i];
  return static_cast<double>(d1) / static_cast<double>(z.n_treated()) -
         static_cast<double>(d0) / static_cast<double>(z.n_control());
}

std::optional<double> iv_bias(std::span<const double> x, const AssignmentVector& z,
                              const AssignmentVector& d, const BiasDenominator& denominator) {
  const double strength = denominator.mode == BiasDenominatorMode::fixed_observed
                              ? denominator.observed_strength
                              : instrument_strength(z, d);
  const double diff = prevalence_difference(x, z);
  if (strength == 0.0) return std::nullopt;
  return diff / strength;
}

Eigen::VectorXd mean_difference(const Eigen::MatrixXd& x, const AssignmentVector& z) {
  require_groups(static_cast<std::size_t>(x.rows()), z);
  Eigen::VectorXd diff(x.cols());
  for (Eigen::Index j = 0; j < x.cols(); ++j) diff(j) = prevalence_difference(column(x, j), z);
  return diff;
}

Eigen::MatrixXd mean_difference_covariance(const Eigen::MatrixXd& x, const AssignmentVector& z) {
  require_groups(static_cast<std::size_t>(x.rows()), z);
  const std::size_t n1 = z.n_treated();
  const std::size_t n0 = z.n_control();
  if (n1 < 2 || n0 < 2) {
    throw InputError("pooled covariance needs at least two units in each group");
  }
  const Eigen::Index k = x.cols();
  Eigen::RowVectorXd mean1 = Eigen::RowVectorXd::Zero(k);
  Eigen::RowVectorXd mean0 = Eigen::RowVectorXd::Zero(k);
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    (z.treated(static_cast<std::size_t>(i)) ? mean1 : mean0) += x.row(i);
  }
  mean1 /= static_cast<double>(n1);
  mean0 /= static_cast<double>(n0);
  Eigen::MatrixXd scatter = Eigen::MatrixXd::Zero(k, k);
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const Eigen::RowVectorXd dev =
        x.row(i) - (z.treated(static_cast<std::size_t>(i)) ? mean1 : mean0);
    scatter.noalias() += dev.transpose() * dev;
  }
  const double dof = static_cast<double>(n1 + n0 - 2);
  const double scale = 1.0 / static_cast<double>(n1) + 1.0 / static_cast<double>(n0);
  return scatter * (scale / dof);
}

SymmetricPseudoInverse pseudo_inverse(const Eigen::MatrixXd& symmetric) {
  SymmetricPseudoInverse out;
  const Eigen::Index k = symmetric.rows();
  out.inverse = Eigen::MatrixXd::Zero(k, k);
  if (k == 0) return out;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(symmetric);
  if (eig.info() != Eigen::Success) throw NumericalError("eigendecomposition failed");
  const Eigen::VectorXd& values = eig.eigenvalues();
  const double largest = values.cwiseAbs().maxCoeff();
  if (!(largest > 0.0)) return out;
  const double cutoff = kPinvRelativeCutoff * largest;
  Eigen::VectorXd inv = Eigen::VectorXd::Zero(k);
  for (Eigen::Index i = 0; i < k; ++i) {
    if (std::abs(values(i)) > cutoff) {
      inv(i) = 1.0 / values(i);
      ++out.rank;
    }
  }
  const Eigen::MatrixXd& vectors = eig.eigenvectors();
  out.inverse = vectors * inv.asDiagonal() * vectors.transpose();
  return out;
}

GlobalBalance quadratic_form(const Eigen::VectorXd& diff, const Eigen::MatrixXd& cov) {
  const auto pinv = pseudo_inverse(cov);
  GlobalBalance g;
  g.mahalanobis = std::max(0.0, diff.dot(pinv.inverse * diff));
  g.sqrt_mahalanobis = std::sqrt(g.mahalanobis);
  g.covariance_rank = pinv.rank;
  g.pseudo_inverse_used = pinv.rank < static_cast<std::size_t>(cov.rows());
  return g;
}

GlobalBalance mahalanobis(const Eigen::MatrixXd& x, const AssignmentVector& z) {
  return quadratic_form(mean_difference(x, z), mean_difference_covariance(x, z));
}

BalanceVector balance_vector(const Eigen::MatrixXd& x, const AssignmentVector& z,
                             VectorKind kind, const AssignmentVector* exposure,
                             const BiasDenominator& denominator) {
  BalanceVector out;
  out.kind = kind;
  out.per_covariate.reserve(static_cast<std::size_t>(x.cols()));
  if (kind == VectorKind::bias && exposure == nullptr &&
      denominator.mode == BiasDenominatorMode::per_draw) {
    throw InputError("per-draw bias needs the exposure vector");
  }
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    const auto col = column(x, j);
    switch (kind) {
      case VectorKind::prevalence_diff:
        out.per_covariate.emplace_back(prevalence_difference(col, z));
        break;
      case VectorKind::scmd:
        out.per_covariate.push_back(scmd(col, z));
        break;
      case VectorKind::bias:
        if (exposure != nullptr) {
          out.per_covariate.push_back(iv_bias(col, z, *exposure, denominator));
        } else {
          const double diff = prevalence_difference(col, z);
          out.per_covariate.push_back(
              denominator.observed_strength == 0.0
                  ? std::nullopt
                  : std::optional<double>(diff / denominator.observed_strength));
        }
        break;
    }
  }
  return out;
}

// --- fast evaluators -------------------------------------------------------

namespace {

// Shift every column by its first entry: constant columns become exact zeros.
Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> shifted(
    const Eigen::MatrixXd& x) {
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> y = x;
  if (x.rows() > 0) y.rowwise() -= x.row(0);
  return y;
}

}  // namespace

CovariateMoments::CovariateMoments(const Eigen::MatrixXd& x) : centred_(shifted(x)) {
  total_squares_ = centred_.colwise().squaredNorm().transpose();
  const auto n = centred_.rows();
  overall_var_ = Eigen::VectorXd::Zero(centred_.cols());
  if (n > 1) {
    const Eigen::RowVectorXd mean = centred_.colwise().sum() / static_cast<double>(n);
    overall_var_ = ((centred_.rowwise() - mean).colwise().squaredNorm() /
                    static_cast<double>(n - 1)).transpose();
  }
}

std::optional<double> CovariateMoments::scmd(const Groups& g, Eigen::Index j) const {
  return standardize(g.diff(j), g.var1(j), g.var0(j), overall_var_(j));
}

CovariateMoments::Groups CovariateMoments::operator()(const AssignmentVector& z) const {
  const auto n = static_cast<std::size_t>(centred_.rows());
  require_groups(n, z);
  const Eigen::Index k = centred_.cols();
  Eigen::VectorXd s1 = Eigen::VectorXd::Zero(k);
  Eigen::VectorXd q1 = Eigen::VectorXd::Zero(k);
  Eigen::VectorXd total = Eigen::VectorXd::Zero(k);
  const auto values = z.values();
  for (std::size_t i = 0; i < n; ++i) {
    const auto row = centred_.row(static_cast<Eigen::Index>(i)).transpose();
    total += row;
    if (values[i]) {
      s1 += row;
      q1 += row.cwiseAbs2();
    }
  }
  Groups g;
  g.n1 = z.n_treated();
  g.n0 = z.n_control();
  const double n1 = static_cast<double>(g.n1);
  const double n0 = static_cast<double>(g.n0);
  const Eigen::VectorXd s0 = total - s1;
  const Eigen::VectorXd q0 = total_squares_ - q1;
  g.diff = s1 / n1 - s0 / n0;
  const double nan = std::nan("");
  g.var1 = g.n1 > 1 ? Eigen::VectorXd((q1 - s1.cwiseAbs2() / n1) / (n1 - 1))
                    : Eigen::VectorXd::Constant(k, nan);
  g.var0 = g.n0 > 1 ? Eigen::VectorXd((q0 - s0.cwiseAbs2() / n0) / (n0 - 1))
                    : Eigen::VectorXd::Constant(k, nan);
  return g;
}

MahalanobisEvaluator::MahalanobisEvaluator(const Eigen::MatrixXd& x)
    : x_(x), centred_(shifted(x)) {
  const auto n = static_cast<double>(centred_.rows());
  const Eigen::RowVectorXd mean = centred_.colwise().sum() / std::max(n, 1.0);
  Eigen::MatrixXd dev = centred_.rowwise() - mean;
  scatter_ = dev.transpose() * dev;
  scatter_pinv_ = pseudo_inverse(scatter_);
  centred_ = dev;  // rows now sum to zero
}

GlobalBalance MahalanobisEvaluator::operator()(const AssignmentVector& z) const {
  const auto n = static_cast<std::size_t>(centred_.rows());
  require_groups(n, z);
  const std::size_t n1 = z.n_treated();
  const std::size_t n0 = z.n_control();
  if (n1 < 2 || n0 < 2) {
    throw InputError("pooled covariance needs at least two units in each group");
  }
  Eigen::VectorXd s = Eigen::VectorXd::Zero(centred_.cols());
  const auto values = z.values();
  for (std::size_t i = 0; i < n; ++i) {
    if (values[i]) s += centred_.row(static_cast<Eigen::Index>(i)).transpose();
  }
  // diff = c s, cov = c (Q - c s s') / (N - 2); Sherman-Morrison gives
  // M = (N - 2) c a / (1 - c a) with a = s' pinv(Q) s.
  const double c = static_cast<double>(n) / (static_cast<double>(n1) * static_cast<double>(n0));
  const double a = s.dot(scatter_pinv_.inverse * s);
  const double ca = c * a;
  const double denom = 1.0 - ca;
  if (!(denom > kRankOneConditioning)) return mahalanobis(x_, z);
  GlobalBalance g;
  g.mahalanobis = std::max(0.0, static_cast<double>(n - 2) * ca / denom);
  g.sqrt_mahalanobis = std::sqrt(g.mahalanobis);
  g.covariance_rank = scatter_pinv_.rank;
  g.pseudo_inverse_used = scatter_pinv_.rank < static_cast<std::size_t>(centred_.cols());
  return g;
}

}  // namespace asif::balance

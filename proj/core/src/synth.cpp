#include "asif/synth.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <random>

#include "asif/error.hpp"
#include "asif/mechanisms.hpp"
#include "asif/rng.hpp"
#include "json.hpp"

namespace asif::synth {

namespace {

constexpr std::size_t kMaxRegenerations = 1000;

double logistic(double t) {
  if (t >= 0) return 1.0 / (1.0 + std::exp(-t));
  const double e = std::exp(t);
  return e / (1.0 + e);
}

std::vector<std::string> default_names(std::size_t k) {
  std::vector<std::string> names;
  for (std::size_t j = 0; j < k; ++j) {
    names.push_back(j < kContinuousCovariates ? "cont" + std::to_string(j + 1)
                                              : "bin" + std::to_string(j + 1 - kContinuousCovariates));
  }
  return names;
}

}  // namespace

void ScenarioSpec::validate() const {
  if (n_units < 20) throw InputError("scenario needs at least 20 units");
  if (k_covariates == 0) throw InputError("scenario needs at least one covariate");
  if (!std::isfinite(instrument.strength) || !std::isfinite(exposure.instrument_effect) ||
      !std::isfinite(exposure.confounding_strength) || !std::isfinite(exposure.intercept)) {
    throw InputError("scenario strengths must be finite");
  }
  if (!(instrument.treated_fraction > 0.0 && instrument.treated_fraction < 1.0)) {
    throw InputError("instrument treated fraction must lie strictly inside (0, 1)");
  }
}

double confounding_index(const GroundTruth& truth,
                         const Eigen::Ref<const Eigen::RowVectorXd>& x) {
  double c = 0.0;
  for (std::size_t j = 0; j < truth.index_weights.size(); ++j) {
    c += truth.index_weights[j] * (x(static_cast<Eigen::Index>(j)) - truth.index_centers[j]) /
         truth.index_scales[j];
  }
  return c;
}

Generated generate(const ScenarioSpec& spec) {
  spec.validate();
  const std::size_t n = spec.n_units;
  const std::size_t k = spec.k_covariates;

  GroundTruth truth;
  truth.spec = spec;
  const double weight = 1.0 / std::sqrt(static_cast<double>(k));
  for (std::size_t j = 0; j < k; ++j) {
    const bool continuous = j < kContinuousCovariates;
    truth.index_weights.push_back(weight);
    truth.index_centers.push_back(continuous ? 0.0 : kBinaryPrevalence);
    truth.index_scales.push_back(
        continuous ? 1.0 : std::sqrt(kBinaryPrevalence * (1.0 - kBinaryPrevalence)));
  }

  for (std::size_t attempt = 0; attempt <= kMaxRegenerations; ++attempt) {
    const std::uint64_t subseed = spec.seed + attempt;
    Rng rng(mix64(subseed));
    std::normal_distribution<double> normal(0.0, 1.0);

    Eigen::MatrixXd x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(k));
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < k; ++j) {
        x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
            j < kContinuousCovariates ? normal(rng)
                                      : (rng.uniform() < kBinaryPrevalence ? 1.0 : 0.0);
      }
    }
    bool degenerate = false;
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
      if (x.col(j).minCoeff() == x.col(j).maxCoeff()) degenerate = true;
    }

    std::vector<double> index(n);
    for (std::size_t i = 0; i < n; ++i) {
      index[i] = confounding_index(truth, x.row(static_cast<Eigen::Index>(i)));
    }

    std::vector<std::uint8_t> z(n, 0);
    truth.instrument_probabilities.clear();
    if (spec.instrument.kind == InstrumentModel::Kind::randomized) {
      auto n_treated = static_cast<std::size_t>(
          std::llround(spec.instrument.treated_fraction * static_cast<double>(n)));
      n_treated = std::clamp<std::size_t>(n_treated, 1, n - 1);
      const auto drawn = draw_complete(n, n_treated, rng);
      z.assign(drawn.values().begin(), drawn.values().end());
    } else {
      truth.instrument_probabilities.resize(n);
      for (std::size_t i = 0; i < n; ++i) {
        const double p = logistic(spec.instrument.strength * index[i]);
        truth.instrument_probabilities[i] = p;
        z[i] = rng.uniform() < p ? 1 : 0;
      }
    }

    std::vector<std::uint8_t> d(n, 0);
    truth.exposure_probabilities.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      const double p = logistic(spec.exposure.intercept + spec.exposure.instrument_effect * z[i] +
                                spec.exposure.confounding_strength * index[i]);
      truth.exposure_probabilities[i] = p;
      d[i] = rng.uniform() < p ? 1 : 0;
    }

    AssignmentVector zv(std::move(z));
    AssignmentVector dv(std::move(d));
    // Degenerate: a constant covariate, or fewer than two units in any group.
    if (zv.n_treated() < 2 || zv.n_control() < 2 || dv.n_treated() < 2 || dv.n_control() < 2) {
      degenerate = true;
    }
    if (degenerate) {
      ++truth.n_regenerations;
      continue;
    }
    truth.final_subseed = subseed;
    return {Dataset(std::move(x), default_names(k), std::move(zv), std::move(dv)),
            std::move(truth)};
  }
  throw CapExceededError("synthetic generator produced degenerate data " +
                         std::to_string(kMaxRegenerations) + " times in a row");
}

std::vector<std::string> scenario_names() {
  return {"null", "confounded-exposure", "confounded-instrument", "both-confounded"};
}

std::optional<ScenarioSpec> scenario(const std::string& name, std::size_t n_units,
                                     std::size_t k_covariates, std::uint64_t seed) {
  ScenarioSpec s;
  s.n_units = n_units;
  s.k_covariates = k_covariates;
  s.seed = seed;
  if (name == "null") {
    s.instrument = {InstrumentModel::Kind::randomized, 0.0, 0.5};
    s.exposure = {1.0, 0.0, -0.5};
  } else if (name == "confounded-exposure") {
    s.instrument = {InstrumentModel::Kind::randomized, 0.0, 0.5};
    s.exposure = {1.0, 2.0, -0.5};
  } else if (name == "confounded-instrument") {
    s.instrument = {InstrumentModel::Kind::confounded, 2.0, 0.5};
    s.exposure = {1.0, 0.0, -0.5};
  } else if (name == "both-confounded") {
    // D follows Z for about 95% of units plus a small direct dependence on
    // c(x), which leaves D about as imbalanced as Z.
    s.instrument = {InstrumentModel::Kind::confounded, 1.0, 0.5};
    s.exposure = {6.0, 0.5, -3.0};
  } else {
    return std::nullopt;
  }
  return s;
}

void write_ground_truth(std::ostream& out, const GroundTruth& truth) {
  nlohmann::ordered_json j;
  const auto& s = truth.spec;
  j["n_units"] = s.n_units;
  j["k_covariates"] = s.k_covariates;
  j["seed"] = s.seed;
  j["instrument_model"] = {
      {"kind", s.instrument.kind == InstrumentModel::Kind::randomized ? "randomized" : "confounded"},
      {"strength", s.instrument.strength},
      {"treated_fraction", s.instrument.treated_fraction}};
  j["exposure_model"] = {{"intercept", s.exposure.intercept},
                         {"instrument_effect", s.exposure.instrument_effect},
                         {"confounding_strength", s.exposure.confounding_strength}};
  j["covariates"] = {{"continuous", std::min(s.k_covariates, kContinuousCovariates)},
                     {"binary_prevalence", kBinaryPrevalence}};
  j["index_weights"] = truth.index_weights;
  j["index_centers"] = truth.index_centers;
  j["index_scales"] = truth.index_scales;
  j["n_regenerations"] = truth.n_regenerations;
  j["final_subseed"] = truth.final_subseed;
  j["instrument_probabilities"] = truth.instrument_probabilities;
  j["exposure_probabilities"] = truth.exposure_probabilities;
  out << j.dump(2) << '\n';
}

}  // namespace asif::synth

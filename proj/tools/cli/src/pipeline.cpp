#include "asif_cli/pipeline.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>

#include "asif/comparison.hpp"
#include "asif/dataset.hpp"
#include "asif/error.hpp"
#include "asif/randomization_test.hpp"
#include "asif/stats.hpp"
#include "json.hpp"

namespace asif::cli {
namespace {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

constexpr const char* kVersion = "0.3.0";

std::string utc_now() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string num(double v) {
  if (std::isnan(v)) return "NA";
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string num(const std::optional<double>& v) { return v ? num(*v) : "NA"; }

json nullable(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write '" + path.string() + "'");
  return out;
}

// --- mechanisms -------------------------------------------------------------

struct MechanismChoice {
  MechanismKind kind = MechanismKind::complete;
  std::string block_column;
};

MechanismChoice parse_mechanism(const std::string& text) {
  if (text == "complete") return {};
  if (text == "bernoulli") return {MechanismKind::bernoulli, {}};
  if (text.rfind("block:", 0) == 0 && text.size() > 6) {
    return {MechanismKind::block, text.substr(6)};
  }
  throw InputError("unknown mechanism '" + text +
                   "' (expected complete, block:<column>, or bernoulli)");
}

struct Context {
  const PipelineOptions& opt;
  MechanismChoice mechanism;
  Dataset data;
  std::vector<std::string> block_labels;
  std::optional<PropensityFit> exposure_fit;
  std::optional<PropensityFit> instrument_fit;

  TestConfig config(StatisticKind s) const {
    TestConfig c;
    c.n_draws = opt.draws;
    c.alpha = opt.alpha;
    c.seed = opt.seed;
    c.statistic = s;
    c.bias_mode = opt.bias_mode;
    c.threads = opt.threads;
    c.histogram_bins = opt.bins;
    return c;
  }

  ComparisonConfig comparison_config() const {
    ComparisonConfig c;
    c.n_draws = opt.draws;
    c.alpha = opt.alpha;
    c.seed = opt.seed;
    c.threads = opt.threads;
    c.logistic.ridge = opt.ridge;
    c.allow_ridge_fallback = opt.ridge_fallback;
    c.max_redraws = opt.max_redraws;
    c.histogram_bins = opt.bins;
    return c;
  }

  MechanismSpec mechanism_for(Target t) const {
    const auto& v = data.vector_for(t);
    switch (mechanism.kind) {
      case MechanismKind::complete:
        return CompleteMechanism{data.n_units(), v.n_treated()};
      case MechanismKind::block:
        return BlockMechanism::from_observed(block_labels, v);
      case MechanismKind::bernoulli: {
        const auto& fit = t == Target::instrument ? instrument_fit : exposure_fit;
        return BernoulliMechanism{fit->prediction.probabilities, opt.max_redraws};
      }
    }
    throw InputError("unsupported mechanism");
  }
};

Context ingest(const PipelineOptions& opt) {
  const auto mech = parse_mechanism(opt.mechanism);
  const Table table = read_table_file(opt.data_path, opt.delimiter);
  std::vector<std::string> covariates = opt.covariates;
  if (covariates.empty()) {
    for (const auto& h : table.header) {
      if (h != opt.instrument && h != opt.exposure && h != mech.block_column) {
        covariates.push_back(h);
      }
    }
  }
  IngestOptions ingest_options;
  ingest_options.indicator_columns = opt.indicator_columns;
  Context ctx{opt, mech,
              validate_dataset(table, opt.instrument, opt.exposure, covariates, ingest_options),
              {}, {}, {}};
  if (mech.kind == MechanismKind::block) {
    const auto idx = table.column_index(mech.block_column);
    if (idx >= table.header.size()) {
      throw ValidationError({{ValidationIssue::Code::missing_column, mech.block_column, 0,
                              "block column '" + mech.block_column + "' not found in header"}});
    }
    for (const auto& row : table.rows) ctx.block_labels.push_back(row[idx]);
  }
  return ctx;
}

// --- report sections ----------------------------------------------------------

json mechanism_json(const Context& ctx) {
  json m;
  m["kind"] = to_string(ctx.mechanism.kind);
  if (ctx.mechanism.kind == MechanismKind::block) {
    m["column"] = ctx.mechanism.block_column;
    json blocks = json::array();
    const auto per_target = [&](Target t) {
      return BlockMechanism::from_observed(ctx.block_labels, ctx.data.vector_for(t));
    };
    const auto zb = per_target(Target::instrument);
    const auto db = per_target(Target::exposure);
    for (std::size_t b = 0; b < zb.block_names().size(); ++b) {
      blocks.push_back({{"block", zb.block_names()[b]},
                        {"size", zb.members()[b].size()},
                        {"treated_instrument", zb.treated_counts()[b]},
                        {"treated_exposure", db.treated_counts()[b]}});
    }
    m["blocks"] = std::move(blocks);
  }
  return m;
}

json dataset_summary(const Dataset& data) {
  json means = json::object();
  for (std::size_t j = 0; j < data.n_covariates(); ++j) {
    means[data.covariate_names()[j]] = data.covariates().col(static_cast<Eigen::Index>(j)).mean();
  }
  return {{"n_units", data.n_units()},
          {"n_covariates", data.n_covariates()},
          {"n_treated_instrument", data.instrument().n_treated()},
          {"n_treated_exposure", data.exposure().n_treated()},
          {"covariate_means", std::move(means)}};
}

json propensity_json(const PropensityFit& fit, const std::vector<std::string>& names) {
  json coef = json::object();
  coef["(intercept)"] = fit.model.coefficients(0);
  for (std::size_t j = 0; j < names.size(); ++j) {
    coef[names[j]] = fit.model.coefficients(static_cast<Eigen::Index>(j + 1));
  }
  const auto& p = fit.prediction.probabilities;
  const auto [lo, hi] = std::minmax_element(p.begin(), p.end());
  return {{"coefficients", std::move(coef)},
          {"converged", fit.model.converged},
          {"n_iterations", fit.model.n_iterations},
          {"deviance", fit.model.deviance},
          {"separation_flag", fit.model.separation_flag},
          {"ridge", fit.model.ridge},
          {"ridge_fallback", fit.ridge_fallback},
          {"n_clamped", fit.prediction.n_clamped},
          {"probability_min", *lo},
          {"probability_max", *hi},
          {"probability_mean", stats::mean(p)}};
}

json draw_summary(const DrawSummary& s) {
  return {{"q025", s.q025},
          {"q975", s.q975},
          {"mean", s.mean},
          {"n_effective", s.n_effective},
          {"n_undefined", s.n_undefined}};
}

struct PerCovariateRun {
  StatisticKind statistic;
  Target target;
  CovariateBands result;
};

json per_covariate_json(const PerCovariateRun& run) {
  json rows = json::array();
  for (std::size_t j = 0; j < run.result.bands.size(); ++j) {
    const auto& b = run.result.bands[j];
    const auto& c = run.result.test.components[j];
    rows.push_back({{"covariate", b.covariate},
                    {"observed_instrument", nullable(b.observed_instrument)},
                    {"observed_exposure", nullable(b.observed_exposure)},
                    {"q025", b.q025},
                    {"q975", b.q975},
                    {"mean", c.summary.mean},
                    {"p_value", nullable(b.p_value)},
                    {"reject", c.reject},
                    {"inside_band", b.target_inside_band},
                    {"n_undefined", c.summary.n_undefined}});
  }
  return {{"statistic", to_string(run.statistic)},
          {"target", to_string(run.target)},
          {"mechanism", to_string(run.result.test.mechanism)},
          {"exact", run.result.test.exact},
          {"n_draws", run.result.test.n_draws},
          {"n_undefined_draws", run.result.test.n_undefined_draws()},
          {"n_redraws", run.result.test.n_redraws},
          {"covariates", std::move(rows)}};
}

json global_json(const TestResult& r) {
  const auto& c = r.components.at(0);
  return {{"statistic", to_string(r.statistic)},
          {"target", to_string(r.target)},
          {"mechanism", to_string(r.mechanism)},
          {"exact", r.exact},
          {"n_draws", r.n_draws},
          {"observed", nullable(c.observed)},
          {"p_value", nullable(c.p_value)},
          {"reject", c.reject},
          {"draws", draw_summary(c.summary)},
          {"n_redraws", r.n_redraws}};
}

json distribution_json(const Distribution& d) {
  std::size_t n = 0;
  for (double v : d.draws) n += !std::isnan(v);
  return {{"q025", d.q025}, {"q975", d.q975}, {"mean", d.mean}, {"n_effective", n}};
}

json classification_json(const CaseClassification& c, double p_exp, double p_iv, double alpha,
                         const char* source) {
  return {{"case", to_string(c.label)},
          {"recommendation", c.recommendation},
          {"reject_exposure", c.reject_exposure},
          {"reject_instrument", c.reject_instrument},
          {"p_exposure", p_exp},
          {"p_instrument", p_iv},
          {"alpha", alpha},
          {"source", source}};
}

// --- plot data ------------------------------------------------------------------

void write_histogram_rows(std::ostream& out, const std::string& prefix, const stats::Histogram& h) {
  for (std::size_t b = 0; b < h.bins(); ++b) {
    out << prefix << b << ',' << num(h.edges[b]) << ',' << num(h.edges[b + 1]) << ','
        << h.counts[b] << '\n';
  }
}

void write_propensity_histograms(const fs::path& dir, const Context& ctx) {
  auto out = open_out(dir / files::propensity);
  out << "model,group,bin,lower,upper,count\n";
  const auto one = [&](const char* model, const PropensityFit& fit, const AssignmentVector& v) {
    const auto& p = fit.prediction.probabilities;
    const auto [lo, hi] = std::minmax_element(p.begin(), p.end());
    const std::size_t bins = ctx.opt.bins > 0 ? ctx.opt.bins : stats::freedman_diaconis_bins(p);
    std::vector<double> treated, control;
    for (std::size_t i = 0; i < p.size(); ++i) (v.treated(i) ? treated : control).push_back(p[i]);
    write_histogram_rows(out, std::string(model) + ",treated,",
                         stats::histogram(treated, *lo, *hi, bins));
    write_histogram_rows(out, std::string(model) + ",control,",
                         stats::histogram(control, *lo, *hi, bins));
  };
  one("exposure", *ctx.exposure_fit, ctx.data.exposure());
  one("instrument", *ctx.instrument_fit, ctx.data.instrument());
}

void write_scmd_table(const fs::path& dir, const json& rows) {
  auto out = open_out(dir / files::scmd);
  out << "covariate,scmd_instrument,scmd_exposure,threshold\n";
  for (const auto& r : rows) {
    const auto cell = [](const json& v) { return v.is_null() ? std::string("NA") : num(v.get<double>()); };
    out << r["covariate"].get<std::string>() << ',' << cell(r["instrument"]) << ','
        << cell(r["exposure"]) << ',' << num(kScmdThreshold) << '\n';
  }
}

void write_bands(const fs::path& dir, const std::vector<PerCovariateRun>& runs) {
  auto out = open_out(dir / files::bands);
  out << "statistic,target,covariate,q025,q975,observed_instrument,observed_exposure,p_value\n";
  for (const auto& run : runs) {
    for (const auto& b : run.result.bands) {
      out << to_string(run.statistic) << ',' << to_string(run.target) << ',' << b.covariate << ','
          << num(b.q025) << ',' << num(b.q975) << ',' << num(b.observed_instrument) << ','
          << num(b.observed_exposure) << ',' << num(b.p_value) << '\n';
    }
  }
}

void write_permutation_histograms(const fs::path& dir, const std::vector<PerCovariateRun>& runs,
                                  const std::vector<const TestResult*>& globals) {
  auto out = open_out(dir / files::permutation);
  out << "statistic,target,component,bin,lower,upper,count\n";
  const auto emit = [&](const TestResult& r) {
    for (const auto& c : r.components) {
      write_histogram_rows(out,
                           std::string(to_string(r.statistic)) + ',' +
                               std::string(to_string(r.target)) + ',' + c.name + ',',
                           c.summary.histogram);
    }
  };
  for (const auto& run : runs) emit(run.result.test);
  for (const auto* g : globals) emit(*g);
}

void write_mahalanobis(const fs::path& dir, const ComparisonResult& r) {
  auto hist = open_out(dir / files::mahalanobis);
  hist << "distribution,bin,lower,upper,count\n";
  write_histogram_rows(hist, "complete_randomization,", r.cr_distribution.histogram);
  write_histogram_rows(hist, "instrument_bernoulli,", r.iv_bt_distribution.histogram);
  write_histogram_rows(hist, "exposure_bernoulli,", r.exp_bt_distribution.histogram);

  auto markers = open_out(dir / files::markers);
  markers << "marker,value\n";
  markers << "observed_instrument," << num(r.observed_iv) << '\n';
  markers << "observed_exposure," << num(r.observed_exp) << '\n';
  const auto band = [&](const char* name, const Distribution& d) {
    markers << name << "_q025," << num(d.q025) << '\n';
    markers << name << "_q975," << num(d.q975) << '\n';
    markers << name << "_mean," << num(d.mean) << '\n';
  };
  band("complete_randomization", r.cr_distribution);
  band("instrument_bernoulli", r.iv_bt_distribution);
  band("exposure_bernoulli", r.exp_bt_distribution);
}

// --- helpers for exact mode ---------------------------------------------------

CovariateBands exact_bands(const Context& ctx, Target target, StatisticKind s) {
  CovariateBands out;
  out.test = exact_test(ctx.data, target, ctx.data.vector_for(target).n_treated(), ctx.config(s),
                        ctx.opt.cap);
  const StatisticEvaluator on_z(ctx.data, Target::instrument, s, ctx.opt.bias_mode);
  const StatisticEvaluator on_d(ctx.data, Target::exposure, s, ctx.opt.bias_mode);
  const auto z = on_z(ctx.data.instrument());
  const auto d = on_d(ctx.data.exposure());
  const auto wrap = [](double v) { return std::isnan(v) ? std::nullopt : std::optional<double>(v); };
  for (std::size_t c = 0; c < out.test.components.size(); ++c) {
    const auto& comp = out.test.components[c];
    CovariateBand b;
    b.covariate = comp.name;
    b.observed_instrument = wrap(z[c]);
    b.observed_exposure = wrap(d[c]);
    b.q025 = comp.summary.q025;
    b.q975 = comp.summary.q975;
    b.p_value = comp.p_value;
    b.target_inside_band = comp.observed && *comp.observed >= b.q025 && *comp.observed <= b.q975;
    out.bands.push_back(std::move(b));
  }
  return out;
}

std::vector<std::optional<double>> scmd_values(const Dataset& data, Target t) {
  const StatisticEvaluator eval(data, t, StatisticKind::scmd);
  std::vector<std::optional<double>> out;
  for (double v : eval(data.vector_for(t))) {
    out.push_back(std::isnan(v) ? std::nullopt : std::optional<double>(v));
  }
  return out;
}

}  // namespace

void run_pipeline(const PipelineOptions& opt, std::ostream& log) {
  const std::string started = utc_now();
  if (opt.exact && opt.mechanism != "complete") {
    throw InputError("exact mode enumerates complete randomization only");
  }
  if (opt.statistics.empty()) throw InputError("no statistics requested");
  Context ctx = ingest(opt);
  const Dataset& data = ctx.data;
  const auto& names = data.covariate_names();
  log << "ingested " << data.n_units() << " units, " << data.n_covariates() << " covariates\n";

  const fs::path out_path(opt.out);
  const fs::path plots = opt.plots_dir.empty()
                             ? (out_path.has_parent_path() ? out_path.parent_path() / "plots"
                                                           : fs::path("plots"))
                             : fs::path(opt.plots_dir);

  json report;
  report["schema_version"] = kSchemaVersion;
  json meta;
  meta["tool"] = "asif";
  meta["version"] = kVersion;
  meta["command"] = opt.exact ? "exact" : "test";
  meta["input"] = opt.data_path;
  meta["instrument_column"] = opt.instrument;
  meta["exposure_column"] = opt.exposure;
  meta["covariate_columns"] = names;
  meta["indicator_columns"] = opt.indicator_columns;
  meta["exact"] = opt.exact;
  meta["seed"] = opt.seed;
  meta["draws"] = opt.draws;
  meta["alpha"] = opt.alpha;
  json stat_names = json::array();
  for (auto s : opt.statistics) stat_names.push_back(to_string(s));
  meta["statistics"] = std::move(stat_names);
  meta["mechanism"] = mechanism_json(ctx);
  meta["bias_denominator"] = to_string(opt.bias_mode);
  if (opt.exact) {
    meta["enumeration_cap"] = opt.cap;
  } else {
    meta["logistic"] = {{"max_iter", LogisticOptions{}.max_iter},
                        {"tolerance", LogisticOptions{}.tolerance},
                        {"ridge", opt.ridge},
                        {"ridge_fallback_allowed", opt.ridge_fallback}};
    meta["max_redraws"] = opt.max_redraws;
  }
  meta["histogram_bins"] = opt.bins == 0 ? json("freedman-diaconis") : json(opt.bins);
  meta["plots_dir"] = plots.string();
  report["metadata"] = std::move(meta);
  report["dataset_summary"] = dataset_summary(data);

  if (!opt.exact) {
    const auto cc = ctx.comparison_config();
    ctx.exposure_fit = fit_propensity(data.covariates(), data.exposure(), cc, "exposure");
    ctx.instrument_fit = fit_propensity(data.covariates(), data.instrument(), cc, "instrument");
    report["propensity"] = {{"exposure", propensity_json(*ctx.exposure_fit, names)},
                            {"instrument", propensity_json(*ctx.instrument_fit, names)},
                            {"histogram_file", files::propensity}};
  }

  // SCMD dot-plot data.
  {
    const auto z = scmd_values(data, Target::instrument);
    const auto d = scmd_values(data, Target::exposure);
    json rows = json::array();
    for (std::size_t j = 0; j < names.size(); ++j) {
      rows.push_back({{"covariate", names[j]}, {"instrument", nullable(z[j])}, {"exposure", nullable(d[j])}});
    }
    report["scmd_table"] = {{"threshold", kScmdThreshold}, {"file", files::scmd}, {"rows", rows}};
  }

  // Per-covariate tests: bands from each target's own randomization distribution.
  std::vector<PerCovariateRun> runs;
  for (auto s : opt.statistics) {
    if (!is_per_covariate(s)) continue;
    for (auto t : {Target::instrument, Target::exposure}) {
      log << "per-covariate " << to_string(s) << " test of the " << to_string(t) << '\n';
      runs.push_back({s, t,
                      opt.exact ? exact_bands(ctx, t, s)
                                : per_covariate_quantiles(data, t, ctx.mechanism_for(t),
                                                          ctx.config(s))});
    }
  }
  json per_cov = json::array();
  for (const auto& r : runs) per_cov.push_back(per_covariate_json(r));
  report["per_covariate_results"] = std::move(per_cov);

  std::optional<ComparisonResult> comparison;
  if (!opt.exact) {
    log << "mechanism comparison\n";
    comparison = compare_mechanisms(data, ctx.comparison_config());
  }

  // Global tests. The complete-randomization sqrt(M) tests are the ones
  // already run for the comparison.
  std::vector<TestResult> globals;
  for (auto s : opt.statistics) {
    if (is_per_covariate(s)) continue;
    for (auto t : {Target::instrument, Target::exposure}) {
      if (comparison && s == StatisticKind::sqrt_mahalanobis &&
          ctx.mechanism.kind == MechanismKind::complete) {
        globals.push_back(t == Target::instrument ? comparison->cr_instrument_test
                                                  : comparison->cr_exposure_test);
        continue;
      }
      log << "global " << to_string(s) << " test of the " << to_string(t) << '\n';
      globals.push_back(opt.exact ? exact_test(data, t, data.vector_for(t).n_treated(),
                                               ctx.config(s), opt.cap)
                                  : run_test(data, t, ctx.mechanism_for(t), ctx.config(s)));
    }
  }
  json global = json::array();
  for (const auto& g : globals) global.push_back(global_json(g));
  report["global_results"] = std::move(global);

  if (comparison) {
    const auto& c = *comparison;
    report["comparison"] = {
        {"statistic", "sqrt_mahalanobis"},
        {"observed_iv", c.observed_iv},
        {"observed_exp", c.observed_exp},
        {"p_iv", c.p_iv},
        {"p_exp", c.p_exp},
        {"distributions",
         {{"complete_randomization", distribution_json(c.cr_distribution)},
          {"instrument_bernoulli", distribution_json(c.iv_bt_distribution)},
          {"exposure_bernoulli", distribution_json(c.exp_bt_distribution)}}},
        {"separation",
         {{"intervals_disjoint", c.separation.intervals_disjoint},
          {"overlap_fraction", c.separation.overlap_fraction},
          {"mean_gap", c.separation.mean_gap},
          {"iv_gap_to_cr", c.separation.iv_gap_to_cr},
          {"exp_gap_to_cr", c.separation.exp_gap_to_cr},
          {"iv_closer", c.separation.iv_closer},
          {"significantly_closer", c.separation.significantly_closer}}},
        {"n_redraws",
         {{"instrument", c.iv_bt_test.n_redraws}, {"exposure", c.exp_bt_test.n_redraws}}},
        {"histogram_file", files::mahalanobis},
        {"markers_file", files::markers}};
    report["case_classification"] =
        classification_json(c.classification, c.p_exp, c.p_iv, opt.alpha, "sqrt_mahalanobis");
  } else {
    // Exact mode: classify from the exact global Mahalanobis p-values if present.
    const TestResult* z = nullptr;
    const TestResult* d = nullptr;
    for (const auto& g : globals) (g.target == Target::instrument ? z : d) = &g;
    if (z && d && z->components[0].p_value && d->components[0].p_value) {
      const double pz = *z->components[0].p_value, pd = *d->components[0].p_value;
      report["case_classification"] = classification_json(classify_case(pd, pz, opt.alpha), pd, pz,
                                                          opt.alpha, to_string(z->statistic).data());
    } else {
      report["case_classification"] = nullptr;
    }
  }

  // Plot-data tables.
  if (ctx.exposure_fit) write_propensity_histograms(plots, ctx);
  write_scmd_table(plots, report["scmd_table"]["rows"]);
  write_bands(plots, runs);
  std::vector<const TestResult*> global_ptrs;
  for (const auto& g : globals) global_ptrs.push_back(&g);
  write_permutation_histograms(plots, runs, global_ptrs);
  if (comparison) write_mahalanobis(plots, *comparison);

  report["metadata"]["timestamps"] = {{"started", started}, {"finished", utc_now()}};
  auto out = open_out(out_path);
  out << report.dump(2) << '\n';
  log << "report written to " << out_path.string() << '\n';
}

}  // namespace asif::cli

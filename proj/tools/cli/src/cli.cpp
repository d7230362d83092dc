#include "asif_cli/cli.hpp"

#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>

#include "CLI11.hpp"
#include "asif/error.hpp"
#include "asif/synth.hpp"
#include "asif_cli/pipeline.hpp"
#include "json.hpp"

namespace asif::cli {
namespace {

using json = nlohmann::ordered_json;

const char* code_name(ValidationIssue::Code c) {
  switch (c) {
    case ValidationIssue::Code::missing_column: return "missing_column";
    case ValidationIssue::Code::duplicate_column: return "duplicate_column";
    case ValidationIssue::Code::non_binary: return "non_binary";
    case ValidationIssue::Code::missing_value: return "missing_value";
    case ValidationIssue::Code::non_numeric: return "non_numeric";
    case ValidationIssue::Code::non_finite: return "non_finite";
    case ValidationIssue::Code::constant_vector: return "constant_vector";
    case ValidationIssue::Code::ragged_row: return "ragged_row";
    case ValidationIssue::Code::empty_table: return "empty_table";
  }
  return "unknown";
}

const char* kind_name(int code) {
  switch (code) {
    case ExitCode::input: return "input";
    case ExitCode::numerical: return "numerical";
    case ExitCode::cap_exceeded: return "cap_exceeded";
    default: return "internal";
  }
}

void report_error(std::ostream& err, int code, const std::string& message,
                  const std::vector<ValidationIssue>* issues = nullptr) {
  json e = {{"error", kind_name(code)}, {"exit_code", code}, {"message", message}};
  if (issues != nullptr) {
    json list = json::array();
    for (const auto& i : *issues) {
      list.push_back({{"code", code_name(i.code)},
                      {"column", i.column},
                      {"row", i.row},
                      {"message", i.message}});
    }
    e["issues"] = std::move(list);
  }
  err << e.dump() << '\n';
}

char parse_delimiter(const std::string& s) {
  if (s == "tab" || s == "\\t") return '\t';
  if (s.size() == 1) return s[0];
  throw InputError("delimiter must be a single character or 'tab'");
}

std::vector<StatisticKind> parse_statistics(const std::vector<std::string>& names) {
  std::vector<StatisticKind> out;
  for (const auto& n : names) {
    const auto s = parse_statistic(n);
    if (!s) {
      throw InputError("unknown statistic '" + n +
                       "' (expected prevalence_diff, scmd, bias, mahalanobis, sqrt_mahalanobis)");
    }
    if (std::find(out.begin(), out.end(), *s) == out.end()) out.push_back(*s);
  }
  return out;
}

struct AnalysisFlags {
  PipelineOptions options;
  std::vector<std::string> statistics = {"scmd", "bias", "sqrt_mahalanobis"};
  std::string delimiter = ",";
  std::string bias_mode = "fixed_observed";
};

void add_analysis_flags(CLI::App* cmd, AnalysisFlags& f, bool exact) {
  auto& o = f.options;
  cmd->add_option("data", o.data_path, "Delimited input file with a header row")->required();
  cmd->add_option("--instrument", o.instrument, "Instrument column")->capture_default_str();
  cmd->add_option("--exposure", o.exposure, "Exposure column")->capture_default_str();
  cmd->add_option("--covariates", o.covariates, "Covariate columns (default: all others)")
      ->delimiter(',');
  cmd->add_option("--indicator-columns", o.indicator_columns,
                  "Categorical columns expanded into 0/1 indicators")
      ->delimiter(',');
  cmd->add_option("--statistic", f.statistics,
                  "prevalence_diff, scmd, bias, mahalanobis, sqrt_mahalanobis")
      ->delimiter(',')
      ->capture_default_str();
  cmd->add_option("--alpha", o.alpha, "Test level")->capture_default_str();
  cmd->add_option("--seed", o.seed, "Random seed")->capture_default_str();
  cmd->add_option("--out", o.out, "Report path")->capture_default_str();
  cmd->add_option("--plots-dir", o.plots_dir, "Plot-data directory (default: plots/ next to report)");
  cmd->add_option("--threads", o.threads, "Worker threads (default: ASIF_THREADS or all cores)");
  cmd->add_option("--delimiter", f.delimiter, "Field delimiter (a character or 'tab')")
      ->capture_default_str();
  cmd->add_option("--bias-denominator", f.bias_mode, "fixed_observed or per_draw")
      ->capture_default_str();
  cmd->add_option("--bins", o.bins, "Histogram bins (0: Freedman-Diaconis)")->capture_default_str();
  if (exact) {
    cmd->add_option("--cap", o.cap, "Largest enumeration allowed")->capture_default_str();
  } else {
    cmd->add_option("--mechanism", o.mechanism, "complete, block:<column>, or bernoulli")
        ->capture_default_str();
    cmd->add_option("--draws", o.draws, "Monte Carlo draws M")->capture_default_str();
    cmd->add_option("--ridge", o.ridge, "Ridge penalty for the propensity fits")
        ->capture_default_str();
    cmd->add_flag("--ridge-fallback", o.ridge_fallback,
                  "Refit with ridge 1 when a propensity fit fails to converge");
    cmd->add_option("--max-redraws", o.max_redraws, "Degenerate Bernoulli redraws allowed per draw")
        ->capture_default_str();
  }
}

PipelineOptions finish(AnalysisFlags& f, bool exact) {
  PipelineOptions o = f.options;
  o.statistics = parse_statistics(f.statistics);
  o.delimiter = parse_delimiter(f.delimiter);
  const auto mode = parse_bias_mode(f.bias_mode);
  if (!mode) throw InputError("unknown bias denominator '" + f.bias_mode + "'");
  o.bias_mode = *mode;
  o.exact = exact;
  return o;
}

struct SynthFlags {
  std::size_t n = 2000;
  std::size_t k = 5;
  std::string scenario = "null";
  std::uint64_t seed = 1;
  std::string out = "synth.csv";
  std::string truth;
};

std::string joined_scenarios() {
  std::string s;
  for (const auto& n : synth::scenario_names()) s += (s.empty() ? "" : ", ") + n;
  return s;
}

void run_synth(const SynthFlags& f, std::ostream& out) {
  const auto spec = synth::scenario(f.scenario, f.n, f.k, f.seed);
  if (!spec) {
    throw InputError("unknown scenario '" + f.scenario + "'; valid scenarios: " +
                     joined_scenarios());
  }
  const auto g = synth::generate(*spec);
  namespace fs = std::filesystem;
  const fs::path data_path(f.out);
  const fs::path truth_path =
      f.truth.empty() ? fs::path(data_path).replace_extension(".truth.json") : fs::path(f.truth);
  for (const auto& p : {data_path, truth_path}) {
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
  }
  std::ofstream data_out(data_path, std::ios::binary);
  std::ofstream truth_out(truth_path, std::ios::binary);
  if (!data_out || !truth_out) throw InputError("cannot write synth output files");
  write_dataset(data_out, g.data);
  synth::write_ground_truth(truth_out, g.truth);
  out << "wrote " << data_path.string() << " and " << truth_path.string() << '\n';
}

}  // namespace

int exit_code_for(const std::exception& e) {
  if (const auto* a = dynamic_cast<const Error*>(&e)) {
    switch (a->kind()) {
      case ErrorKind::input: return ExitCode::input;
      case ErrorKind::numerical: return ExitCode::numerical;
      case ErrorKind::cap_exceeded: return ExitCode::cap_exceeded;
    }
  }
  if (dynamic_cast<const std::filesystem::filesystem_error*>(&e)) return ExitCode::input;
  return ExitCode::internal;
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Randomization tests of whether an instrument or exposure is as-if randomized"};
  app.name("asif");
  app.require_subcommand(1);

  AnalysisFlags test_flags;
  auto* test = app.add_subcommand("test", "Monte Carlo tests and mechanism comparison");
  add_analysis_flags(test, test_flags, false);

  AnalysisFlags exact_flags;
  auto* exact = app.add_subcommand("exact", "Exact tests over every complete randomization");
  add_analysis_flags(exact, exact_flags, true);

  SynthFlags synth_flags;
  auto* syn = app.add_subcommand("synth", "Write a synthetic dataset and its ground truth");
  syn->add_option("--n", synth_flags.n, "Units")->capture_default_str();
  syn->add_option("--k", synth_flags.k, "Covariates")->capture_default_str();
  syn->add_option("--scenario", synth_flags.scenario, "One of: " + joined_scenarios())
      ->capture_default_str();
  syn->add_option("--seed", synth_flags.seed, "Random seed")->capture_default_str();
  syn->add_option("--out", synth_flags.out, "Dataset path")->capture_default_str();
  syn->add_option("--truth", synth_flags.truth, "Ground-truth path (default: <out>.truth.json)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return ExitCode::ok;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return ExitCode::ok;
  } catch (const CLI::ParseError& e) {
    std::string msg = e.what();
    if (const auto* sub = app.get_subcommands().empty() ? nullptr : app.get_subcommands()[0]) {
      msg += " (see 'asif " + sub->get_name() + " --help')";
    }
    report_error(err, ExitCode::input, msg);
    return ExitCode::input;
  }

  try {
    if (test->parsed()) {
      run_pipeline(finish(test_flags, false), out);
    } else if (exact->parsed()) {
      run_pipeline(finish(exact_flags, true), out);
    } else {
      run_synth(synth_flags, out);
    }
  } catch (const ValidationError& e) {
    report_error(err, ExitCode::input, e.what(), &e.issues());
    return ExitCode::input;
  } catch (const std::exception& e) {
    const int code = exit_code_for(e);
    report_error(err, code, e.what());
    return code;
  }
  return ExitCode::ok;
}

}  // namespace asif::cli

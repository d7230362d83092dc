#include "asif/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <set>

#include "asif/error.hpp"

namespace asif {

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::vector<std::string> split_record(const std::string& line, char delimiter) {
  std::vector<std::string> cells;
  std::string cell;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cell.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cell.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == delimiter) {
      cells.push_back(std::move(cell));
      cell.clear();
    } else {
      cell.push_back(c);
    }
  }
  cells.push_back(std::move(cell));
  for (auto& c : cells) c = std::string(trim(c));
  return cells;
}

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

std::optional<std::uint8_t> coerce_binary(std::string_view cell) {
  if (cell == "0") return 0;
  if (cell == "1") return 1;
  const auto l = lower(cell);
  if (l == "false") return 0;
  if (l == "true") return 1;
  return std::nullopt;
}

bool is_missing_token(std::string_view cell) {
  if (cell.empty()) return true;
  const auto l = lower(cell);
  return l == "na" || l == "null" || l == ".";
}

std::string quote(const std::string& name) { return "'" + name + "'"; }

void check_nonconstant(const AssignmentVector& v, std::string_view role,
                       const std::string& column, std::vector<ValidationIssue>& issues) {
  if (v.size() == 0) return;
  if (v.n_treated() == 0 || v.n_treated() == v.size()) {
    issues.push_back({ValidationIssue::Code::constant_vector, column, 0,
                      "column " + quote(column) + ": constant " + std::string(role) +
                          " (all " + (v.n_treated() == 0 ? "0" : "1") + ")"});
  }
}

}  // namespace

std::size_t Table::column_index(const std::string& name) const {
  const auto it = std::find(header.begin(), header.end(), name);
  return static_cast<std::size_t>(it - header.begin());
}

Table read_table(std::istream& in, char delimiter) {
  Table table;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (first) {
      if (line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
      table.header = split_record(line, delimiter);
      first = false;
      continue;
    }
    if (trim(line).empty()) continue;
    table.rows.push_back(split_record(line, delimiter));
  }
  return table;
}

Table read_table_file(const std::string& path, char delimiter) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open input file " + quote(path));
  return read_table(in, delimiter);
}

Dataset::Dataset(Eigen::MatrixXd covariates, std::vector<std::string> covariate_names,
                 AssignmentVector instrument, AssignmentVector exposure)
    : covariates_(std::move(covariates)),
      names_(std::move(covariate_names)),
      instrument_(std::move(instrument)),
      exposure_(std::move(exposure)) {
  std::vector<ValidationIssue> issues;
  const auto n = static_cast<std::size_t>(covariates_.rows());
  if (n == 0) {
    issues.push_back({ValidationIssue::Code::empty_table, "", 0, "dataset has no units"});
  }
  if (instrument_.size() != n || exposure_.size() != n) {
    issues.push_back({ValidationIssue::Code::ragged_row, "", 0,
                      "instrument/exposure length does not match covariate rows"});
  }
  if (names_.size() != static_cast<std::size_t>(covariates_.cols())) {
    issues.push_back({ValidationIssue::Code::missing_column, "", 0,
                      "covariate name count does not match covariate columns"});
  }
  if (covariates_.cols() == 0) {
    issues.push_back({ValidationIssue::Code::missing_column, "", 0, "no covariates selected"});
  }
  std::set<std::string> seen;
  for (const auto& name : names_) {
    if (!seen.insert(name).second) {
      issues.push_back({ValidationIssue::Code::duplicate_column, name, 0,
                        "duplicate covariate name " + quote(name)});
    }
  }
  for (Eigen::Index j = 0; j < covariates_.cols(); ++j) {
    for (Eigen::Index i = 0; i < covariates_.rows(); ++i) {
      if (!std::isfinite(covariates_(i, j))) {
        const std::string col = j < static_cast<Eigen::Index>(names_.size())
                                    ? names_[static_cast<std::size_t>(j)]
                                    : std::to_string(j);
        issues.push_back({ValidationIssue::Code::non_finite, col, static_cast<std::size_t>(i) + 1,
                          "row " + std::to_string(i + 1) + ", column " + quote(col) +
                              ": non-finite covariate value"});
      }
    }
  }
  check_nonconstant(instrument_, "instrument", "instrument", issues);
  check_nonconstant(exposure_, "exposure", "exposure", issues);
  if (!issues.empty()) throw ValidationError(std::move(issues));
}

bool operator==(const Dataset& a, const Dataset& b) {
  if (a.names_ != b.names_ || !(a.instrument_ == b.instrument_) ||
      !(a.exposure_ == b.exposure_)) {
    return false;
  }
  if (a.covariates_.rows() != b.covariates_.rows() ||
      a.covariates_.cols() != b.covariates_.cols()) {
    return false;
  }
  // Bitwise: -0.0 and 0.0 are distinguished, as a round trip must preserve both.
  return std::equal(a.covariates_.data(), a.covariates_.data() + a.covariates_.size(),
                    b.covariates_.data(), [](double x, double y) {
                      return std::signbit(x) == std::signbit(y) && x == y;
                    });
}

Dataset validate_dataset(const Table& raw, const std::string& instrument_col,
                         const std::string& exposure_col,
                         const std::vector<std::string>& covariate_cols,
                         const IngestOptions& options) {
  using Code = ValidationIssue::Code;
  std::vector<ValidationIssue> issues;

  if (raw.rows.empty()) {
    issues.push_back({Code::empty_table, "", 0, "input has no data rows"});
  }

  auto locate = [&](const std::string& name) -> std::optional<std::size_t> {
    const auto idx = raw.column_index(name);
    if (idx >= raw.header.size()) {
      issues.push_back({Code::missing_column, name, 0, "missing column " + quote(name)});
      return std::nullopt;
    }
    return idx;
  };

  const auto z_idx = locate(instrument_col);
  const auto d_idx = locate(exposure_col);

  std::set<std::string> requested;
  for (const auto& c : covariate_cols) {
    if (!requested.insert(c).second) {
      issues.push_back({Code::duplicate_column, c, 0, "covariate " + quote(c) + " requested twice"});
    }
  }
  if (covariate_cols.empty()) {
    issues.push_back({Code::missing_column, "", 0, "no covariates selected"});
  }
  std::vector<std::optional<std::size_t>> cov_idx;
  for (const auto& c : covariate_cols) cov_idx.push_back(locate(c));
  const std::set<std::string> indicator(options.indicator_columns.begin(),
                                        options.indicator_columns.end());
  for (const auto& c : indicator) {
    if (!requested.count(c)) {
      issues.push_back({Code::missing_column, c, 0,
                        "indicator column " + quote(c) + " is not among the covariates"});
    }
  }

  const std::size_t n = raw.rows.size();
  std::vector<bool> usable(n, true);
  for (std::size_t r = 0; r < n; ++r) {
    if (raw.rows[r].size() != raw.header.size()) {
      issues.push_back({Code::ragged_row, "", r + 1,
                        "row " + std::to_string(r + 1) + ": expected " +
                            std::to_string(raw.header.size()) + " fields, found " +
                            std::to_string(raw.rows[r].size())});
      usable[r] = false;
    }
  }

  auto read_binary = [&](std::optional<std::size_t> idx, const std::string& name) {
    std::vector<std::uint8_t> out(n, 0);
    if (!idx) return out;
    for (std::size_t r = 0; r < n; ++r) {
      if (!usable[r]) continue;
      const auto& cell = raw.rows[r][*idx];
      if (const auto v = coerce_binary(cell)) {
        out[r] = *v;
      } else {
        issues.push_back({Code::non_binary, name, r + 1,
                          "row " + std::to_string(r + 1) + ", column " + quote(name) +
                              ": value " + quote(cell) + " is not binary (0/1/true/false)"});
      }
    }
    return out;
  };
  auto z = read_binary(z_idx, instrument_col);
  auto d = read_binary(d_idx, exposure_col);

  // Expand the covariate selection into output columns.
  struct OutColumn {
    std::string name;
    std::size_t source;
    std::optional<std::string> level;  // set for indicator columns
  };
  std::vector<OutColumn> out_cols;
  for (std::size_t c = 0; c < covariate_cols.size(); ++c) {
    if (!cov_idx[c]) continue;
    const auto& name = covariate_cols[c];
    if (!indicator.count(name)) {
      out_cols.push_back({name, *cov_idx[c], std::nullopt});
      continue;
    }
    std::set<std::string> levels;
    for (std::size_t r = 0; r < n; ++r) {
      if (!usable[r]) continue;
      const auto& cell = raw.rows[r][*cov_idx[c]];
      if (is_missing_token(cell)) {
        issues.push_back({Code::missing_value, name, r + 1,
                          "row " + std::to_string(r + 1) + ", column " + quote(name) +
                              ": missing value"});
      } else {
        levels.insert(cell);
      }
    }
    bool reference = true;
    for (const auto& level : levels) {
      if (reference) {
        reference = false;
        continue;
      }
      out_cols.push_back({name + "=" + level, *cov_idx[c], level});
    }
  }

  Eigen::MatrixXd x = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n),
                                            static_cast<Eigen::Index>(out_cols.size()));
  for (std::size_t j = 0; j < out_cols.size(); ++j) {
    const auto& col = out_cols[j];
    for (std::size_t r = 0; r < n; ++r) {
      if (!usable[r]) continue;
      const std::string& cell = raw.rows[r][col.source];
      double value = 0.0;
      if (col.level) {
        value = cell == *col.level ? 1.0 : 0.0;
      } else if (is_missing_token(cell)) {
        issues.push_back({Code::missing_value, col.name, r + 1,
                          "row " + std::to_string(r + 1) + ", column " + quote(col.name) +
                              ": missing value"});
        continue;
      } else {
        const char* first = cell.data();
        const char* last = cell.data() + cell.size();
        if (*first == '+') ++first;
        const auto [ptr, ec] = std::from_chars(first, last, value);
        if (ec != std::errc() || ptr != last) {
          issues.push_back({Code::non_numeric, col.name, r + 1,
                            "row " + std::to_string(r + 1) + ", column " + quote(col.name) +
                                ": value " + quote(cell) + " is not numeric"});
          continue;
        }
        if (!std::isfinite(value)) {
          issues.push_back({Code::non_finite, col.name, r + 1,
                            "row " + std::to_string(r + 1) + ", column " + quote(col.name) +
                                ": non-finite value " + quote(cell)});
          continue;
        }
      }
      x(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(j)) = value;
    }
  }

  AssignmentVector zv(std::move(z));
  AssignmentVector dv(std::move(d));
  if (z_idx && n > 0) check_nonconstant(zv, "instrument", instrument_col, issues);
  if (d_idx && n > 0) check_nonconstant(dv, "exposure", exposure_col, issues);

  if (!issues.empty()) throw ValidationError(std::move(issues));

  std::vector<std::string> names;
  names.reserve(out_cols.size());
  for (const auto& c : out_cols) names.push_back(c.name);
  return Dataset(std::move(x), std::move(names), std::move(zv), std::move(dv));
}

void write_dataset(std::ostream& out, const Dataset& data, const std::string& instrument_col,
                   const std::string& exposure_col, char delimiter) {
  auto field = [delimiter](const std::string& s) {
    if (s.find(delimiter) == std::string::npos && s.find('"') == std::string::npos) return s;
    std::string q = "\"";
    for (char c : s) {
      if (c == '"') q += '"';
      q += c;
    }
    return q + "\"";
  };
  out << field(instrument_col) << delimiter << field(exposure_col);
  for (const auto& name : data.covariate_names()) out << delimiter << field(name);
  out << '\n';
  char buf[64];
  const auto& x = data.covariates();
  for (std::size_t i = 0; i < data.n_units(); ++i) {
    out << int(data.instrument()[i]) << delimiter << int(data.exposure()[i]);
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
      const auto res = std::to_chars(buf, buf + sizeof buf, x(static_cast<Eigen::Index>(i), j));
      out << delimiter << std::string_view(buf, static_cast<std::size_t>(res.ptr - buf));
    }
    out << '\n';
  }
}

}  // namespace asif

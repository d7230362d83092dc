#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "asif/types.hpp"

namespace asif {

/// Raw delimited text: a header plus string cells. No typing is applied.
struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  /// Index of a header label, or npos-like size() when absent.
  std::size_t column_index(const std::string& name) const;
};

/// Parses delimited text with a header row. Double quotes may wrap a cell
/// that contains the delimiter; "" inside quotes is a literal quote.
Table read_table(std::istream& in, char delimiter = ',');
Table read_table_file(const std::string& path, char delimiter = ',');

/// Options for turning a Table into a Dataset.
struct IngestOptions {
  /// Columns to expand into one 0/1 indicator per non-reference level. The
  /// reference level is the smallest level in lexicographic order. Indicator
  /// columns are named "<column>=<level>".
  std::vector<std::string> indicator_columns;
};

/// Validated study data: covariates X (N x K), instrument Z, exposure D.
/// Immutable once constructed.
class Dataset {
 public:
  /// Checks every invariant and throws ValidationError listing all of the
  /// violations found.
  Dataset(Eigen::MatrixXd covariates, std::vector<std::string> covariate_names,
          AssignmentVector instrument, AssignmentVector exposure);

  std::size_t n_units() const noexcept { return static_cast<std::size_t>(covariates_.rows()); }
  std::size_t n_covariates() const noexcept { return static_cast<std::size_t>(covariates_.cols()); }
  const Eigen::MatrixXd& covariates() const noexcept { return covariates_; }
  const std::vector<std::string>& covariate_names() const noexcept { return names_; }
  const AssignmentVector& instrument() const noexcept { return instrument_; }
  const AssignmentVector& exposure() const noexcept { return exposure_; }
  const AssignmentVector& vector_for(Target t) const noexcept {
    return t == Target::instrument ? instrument_ : exposure_;
  }

  friend bool operator==(const Dataset& a, const Dataset& b);

 private:
  Eigen::MatrixXd covariates_;
  std::vector<std::string> names_;
  AssignmentVector instrument_;
  AssignmentVector exposure_;
};

/// Builds a Dataset from raw records. Rejection lists every problem found,
/// with row numbers for cell-level issues.
Dataset validate_dataset(const Table& raw, const std::string& instrument_col,
                         const std::string& exposure_col,
                         const std::vector<std::string>& covariate_cols,
                         const IngestOptions& options = {});

/// Writes a Dataset in the ingestion format: header "<instrument>,<exposure>,
/// <covariates...>", shortest round-trip decimal representation.
void write_dataset(std::ostream& out, const Dataset& data,
                   const std::string& instrument_col = "Z",
                   const std::string& exposure_col = "D", char delimiter = ',');

}  // namespace asif

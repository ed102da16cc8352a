#pragma once

// Meta-analysis dataset: one (effect, standard error) pair per published
// study, CSV ingestion, non-fatal validation and the bias-direction
// diagnostic based on standardized deviates.

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace rbc {

struct Study {
  std::string label;  // optional, may be empty
  double y = 0.0;     // reported treatment effect
  double s = 0.0;     // reported within-study standard error, > 0
};

// Immutable after construction; safe to share across worker threads.
class MetaDataset {
 public:
  // Throws std::invalid_argument on empty input, non-finite y or s <= 0.
  static MetaDataset from_studies(std::vector<Study> studies);

  const std::vector<Study>& studies() const { return studies_; }
  std::size_t size() const { return studies_.size(); }
  double y(std::size_t i) const { return studies_[i].y; }
  double s(std::size_t i) const { return studies_[i].s; }
  double s_min() const { return s_min_; }
  double s_max() const { return s_max_; }

 private:
  MetaDataset() = default;
  std::vector<Study> studies_;
  double s_min_ = 0.0;
  double s_max_ = 0.0;
};

struct ValidationReport {
  std::size_t n = 0;
  std::vector<std::string> warnings;
};

class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& msg, std::size_t row)
      : std::runtime_error("row " + std::to_string(row) + ": " + msg),
        row_(row) {}
  std::size_t row() const { return row_; }

 private:
  std::size_t row_;  // 1-based file row (header is row 1)
};

// Parses CSV text with header `y,s` or `label,y,s` (any column order).
// Empty/NA cells, non-numeric cells, s <= 0 and an empty table are parse
// errors carrying the offending row number.
MetaDataset parse_dataset(std::string_view csv_text);

// CSV with a label column when any study has one; values round-trip exactly.
std::string serialize_dataset(const MetaDataset& d);

// Non-fatal checks only: few studies, extreme s spread, duplicate rows.
ValidationReport validate(const MetaDataset& d);

struct DeviateReport {
  std::vector<double> deviates;  // (y_i - theta_hat)/sqrt(s_i^2 + tau_hat^2)
  double skewness = 0.0;         // third standardized moment, n-denominator
  int direction = 0;             // sign of the skewness: -1, 0, +1
};

// Direction-of-bias diagnostic; (theta_hat, tau_hat) are point estimates from
// a standard random-effects fit. Throws std::invalid_argument for n < 3
// (skewness undefined) or tau_hat < 0.
DeviateReport standardized_deviates(const MetaDataset& d, double theta_hat,
                                    double tau_hat);

}  // namespace rbc

#include "rbc/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <utility>

namespace rbc {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) {
    s.remove_prefix(1);
  }
  while (!s.empty() &&
         (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
    s.remove_suffix(1);
  }
  return s;
}

std::vector<std::string_view> split_csv_line(std::string_view line) {
  std::vector<std::string_view> cells;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= line.size(); ++i) {
    if (i == line.size() || line[i] == ',') {
      cells.push_back(trim(line.substr(start, i - start)));
      start = i + 1;
    }
  }
  return cells;
}

double parse_cell(std::string_view cell, const char* column, std::size_t row) {
  if (cell.empty() || cell == "NA" || cell == "na" || cell == "NaN") {
    throw ParseError(std::string("empty or NA value in column '") + column +
                         "'",
                     row);
  }
  double value = 0.0;
  const auto* end = cell.data() + cell.size();
  const auto [ptr, ec] = std::from_chars(cell.data(), end, value);
  if (ec != std::errc() || ptr != end || !std::isfinite(value)) {
    throw ParseError(std::string("non-numeric value '") + std::string(cell) +
                         "' in column '" + column + "'",
                     row);
  }
  return value;
}

std::string format_value(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

MetaDataset MetaDataset::from_studies(std::vector<Study> studies) {
  if (studies.empty()) {
    throw std::invalid_argument("dataset must contain at least one study");
  }
  double lo = std::numeric_limits<double>::infinity();
  double hi = 0.0;
  for (const auto& st : studies) {
    if (!std::isfinite(st.y)) {
      throw std::invalid_argument("study effect y must be finite");
    }
    if (!(st.s > 0.0) || !std::isfinite(st.s)) {
      throw std::invalid_argument("study standard error s must be positive");
    }
    lo = std::min(lo, st.s);
    hi = std::max(hi, st.s);
  }
  MetaDataset d;
  d.studies_ = std::move(studies);
  d.s_min_ = lo;
  d.s_max_ = hi;
  return d;
}

MetaDataset parse_dataset(std::string_view csv_text) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= csv_text.size(); ++i) {
    if (i == csv_text.size() || csv_text[i] == '\n') {
      const auto line = trim(csv_text.substr(start, i - start));
      if (!line.empty()) lines.push_back(line);
      start = i + 1;
    }
  }
  if (lines.empty()) throw ParseError("empty input", 1);

  const auto header = split_csv_line(lines[0]);
  int col_y = -1, col_s = -1, col_label = -1;
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (header[c] == "y") {
      col_y = static_cast<int>(c);
    } else if (header[c] == "s") {
      col_s = static_cast<int>(c);
    } else if (header[c] == "label") {
      col_label = static_cast<int>(c);
    } else {
      throw ParseError("unknown column '" + std::string(header[c]) +
                           "' (expected label, y, s)",
                       1);
    }
  }
  if (col_y < 0) throw ParseError("missing column 'y'", 1);
  if (col_s < 0) throw ParseError("missing column 's'", 1);

  std::vector<Study> studies;
  for (std::size_t li = 1; li < lines.size(); ++li) {
    const std::size_t row = li + 1;
    const auto cells = split_csv_line(lines[li]);
    if (cells.size() != header.size()) {
      throw ParseError("expected " + std::to_string(header.size()) +
                           " cells, found " + std::to_string(cells.size()),
                       row);
    }
    Study st;
    if (col_label >= 0) st.label = std::string(cells[col_label]);
    st.y = parse_cell(cells[col_y], "y", row);
    st.s = parse_cell(cells[col_s], "s", row);
    if (!(st.s > 0.0)) {
      throw ParseError("standard error s must be > 0, got " +
                           std::string(cells[col_s]),
                       row);
    }
    studies.push_back(std::move(st));
  }
  if (studies.empty()) throw ParseError("no data rows", 1);
  return MetaDataset::from_studies(std::move(studies));
}

std::string serialize_dataset(const MetaDataset& d) {
  const bool with_label =
      std::any_of(d.studies().begin(), d.studies().end(),
                  [](const Study& st) { return !st.label.empty(); });
  std::string out = with_label ? "label,y,s\n" : "y,s\n";
  for (const auto& st : d.studies()) {
    if (with_label) {
      out += st.label;
      out += ',';
    }
    out += format_value(st.y);
    out += ',';
    out += format_value(st.s);
    out += '\n';
  }
  return out;
}

ValidationReport validate(const MetaDataset& d) {
  ValidationReport report;
  report.n = d.size();
  if (d.size() < 8) {
    report.warnings.push_back("few studies (n = " + std::to_string(d.size()) +
                              " < 8)");
  }
  const double ratio = d.s_max() / d.s_min();
  if (ratio > 100.0) {
    report.warnings.push_back("extreme standard error ratio (s_max/s_min = " +
                              format_value(ratio) + " > 100)");
  }
  std::map<std::pair<double, double>, std::size_t> seen;
  std::size_t duplicates = 0;
  for (const auto& st : d.studies()) {
    if (++seen[{st.y, st.s}] > 1) ++duplicates;
  }
  if (duplicates > 0) {
    report.warnings.push_back(std::to_string(duplicates) +
                              " duplicate (y, s) rows");
  }
  return report;
}

DeviateReport standardized_deviates(const MetaDataset& d, double theta_hat,
                                    double tau_hat) {
  if (!(tau_hat >= 0.0)) {
    throw std::invalid_argument("tau_hat must be nonnegative");
  }
  if (!std::isfinite(theta_hat)) {
    throw std::invalid_argument("theta_hat must be finite");
  }
  if (d.size() < 3) {
    throw std::invalid_argument("skewness undefined for n < 3");
  }
  const std::size_t n = d.size();
  DeviateReport rep;
  rep.deviates.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    rep.deviates[i] = (d.y(i) - theta_hat) /
                      std::sqrt(d.s(i) * d.s(i) + tau_hat * tau_hat);
  }
  double mean = 0.0;
  for (const double v : rep.deviates) mean += v;
  mean /= static_cast<double>(n);
  double m2 = 0.0, m3 = 0.0;
  for (const double v : rep.deviates) {
    const double c = v - mean;
    m2 += c * c;
    m3 += c * c * c;
  }
  m2 /= static_cast<double>(n);
  m3 /= static_cast<double>(n);
  if (m2 <= 0.0) {
    throw std::invalid_argument("deviates have zero variance");
  }
  rep.skewness = m3 / std::pow(m2, 1.5);
  rep.direction = (rep.skewness > 0.0) - (rep.skewness < 0.0);
  return rep;
}

}  // namespace rbc

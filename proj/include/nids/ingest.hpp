#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "nids/csv.hpp"
#include "nids/dataset.hpp"
#include "nids/error.hpp"
#include "nids/random.hpp"

namespace nids {

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

// Parses a numeric cell; returns false for empty or unparsable text.
inline bool parse_number(std::string_view cell, double& out) {
  cell = trim(cell);
  if (!cell.empty() && cell.front() == '+') cell.remove_prefix(1);
  if (cell.empty()) return false;
  auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), out);
  if (ec == std::errc::result_out_of_range) {
    out = cell.front() == '-' ? -std::numeric_limits<double>::infinity() : std::numeric_limits<double>::infinity();
    return true;
  }
  return ec == std::errc() && ptr == cell.data() + cell.size();
}

}  // namespace detail

inline Dataset read_csv(std::istream& in, std::string_view label_column = "Label") {
  std::vector<std::string> header;
  if (!csv::read_record(in, header)) throw DataError("CSV has no header row");
  const std::string label_key = canonicalize_name(label_column);
  std::vector<std::string> names;
  std::size_t label_idx = header.size();
  for (std::size_t i = 0; i < header.size(); ++i) {
    auto name = canonicalize_name(header[i]);
    if (name == label_key && label_idx == header.size())
      label_idx = i;
    else
      names.push_back(std::move(name));
  }
  if (label_idx == header.size()) throw DataError("label column '" + std::string(label_column) + "' not found in header");

  std::vector<double> values;
  std::vector<std::uint8_t> missing;
  std::vector<std::string> raw_labels;
  std::vector<std::string> fields;
  std::size_t row = 0;
  bool any_missing = false;
  while (csv::read_record(in, fields)) {
    if (fields.size() == 1 && detail::trim(fields[0]).empty()) continue;
    ++row;
    if (fields.size() != header.size())
      throw DataError("row " + std::to_string(row) + ": expected " + std::to_string(header.size()) + " fields, got " +
                      std::to_string(fields.size()));
    for (std::size_t i = 0; i < fields.size(); ++i) {
      if (i == label_idx) {
        raw_labels.emplace_back(detail::trim(fields[i]));
        continue;
      }
      double v = std::numeric_limits<double>::quiet_NaN();
      const bool ok = detail::parse_number(fields[i], v);
      values.push_back(ok ? v : std::numeric_limits<double>::quiet_NaN());
      missing.push_back(ok ? 0 : 1);
      any_missing |= !ok;
    }
  }

  Dataset d;
  d.features = Matrix(row, names.size());
  std::copy(values.begin(), values.end(), d.features.data().begin());
  d.feature_names = std::move(names);
  d.label_map = LabelMap::from_names(raw_labels);
  d.labels.reserve(row);
  d.provenance.reserve(row);
  for (std::size_t r = 0; r < row; ++r) {
    d.labels.push_back(d.label_map.encode(raw_labels[r]));
    d.provenance.push_back({static_cast<std::int64_t>(r), false});
  }
  if (any_missing) d.missing = std::move(missing);
  d.validate(false);
  return d;
}

inline Dataset load_csv(const std::filesystem::path& path, std::string_view label_column = "Label") {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  return read_csv(in, label_column);
}

inline std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

// Writes features plus a trailing label column with decoded class names.
inline void write_csv(std::ostream& out, const Dataset& d, std::string_view label_column = "Label") {
  for (const auto& n : d.feature_names) out << csv::escape(n) << ',';
  out << label_column << '\n';
  for (std::size_t r = 0; r < d.rows(); ++r) {
    for (std::size_t c = 0; c < d.cols(); ++c) out << format_double(d.features(r, c)) << ',';
    out << csv::escape(d.label_map.decode(d.labels[r])) << '\n';
  }
}

struct CleanReport {
  std::size_t rows_dropped_null = 0;
  std::size_t rows_dropped_nonfinite = 0;
  std::vector<std::string> columns_dropped_constant;

  bool empty() const { return rows_dropped_null == 0 && rows_dropped_nonfinite == 0 && columns_dropped_constant.empty(); }
  friend bool operator==(const CleanReport&, const CleanReport&) = default;
};

inline void to_json(nlohmann::json& j, const CleanReport& r) {
  j = {{"rows_dropped_null", r.rows_dropped_null},
       {"rows_dropped_nonfinite", r.rows_dropped_nonfinite},
       {"columns_dropped_constant", r.columns_dropped_constant}};
}

inline void from_json(const nlohmann::json& j, CleanReport& r) {
  j.at("rows_dropped_null").get_to(r.rows_dropped_null);
  j.at("rows_dropped_nonfinite").get_to(r.rows_dropped_nonfinite);
  j.at("columns_dropped_constant").get_to(r.columns_dropped_constant);
}

struct CleanResult {
  Dataset data;
  CleanReport report;
};

// Drops rows holding a missing cell (counted as null) or NaN/inf (counted as
// non-finite), then drops constant columns. A single surviving row carries no
// spread information, so the constant-column rule needs at least two rows.
inline CleanResult clean(const Dataset& d) {
  CleanResult res;
  std::vector<std::size_t> keep;
  for (std::size_t r = 0; r < d.rows(); ++r) {
    bool null = false, nonfinite = false;
    for (std::size_t c = 0; c < d.cols(); ++c) {
      if (d.is_missing(r, c))
        null = true;
      else if (!std::isfinite(d.features(r, c)))
        nonfinite = true;
    }
    if (null)
      ++res.report.rows_dropped_null;
    else if (nonfinite)
      ++res.report.rows_dropped_nonfinite;
    else
      keep.push_back(r);
  }
  if (keep.empty()) throw DataError("empty after cleaning");

  Dataset rows_kept = d.subset(keep);
  rows_kept.missing.clear();
  std::vector<std::size_t> cols;
  for (std::size_t c = 0; c < rows_kept.cols(); ++c) {
    bool constant = rows_kept.rows() >= 2;
    for (std::size_t r = 1; r < rows_kept.rows() && constant; ++r)
      constant = rows_kept.features(r, c) == rows_kept.features(0, c);
    if (constant)
      res.report.columns_dropped_constant.push_back(rows_kept.feature_names[c]);
    else
      cols.push_back(c);
  }
  res.data = cols.size() == rows_kept.cols() ? std::move(rows_kept) : rows_kept.select_columns(cols);
  return res;
}

inline Matrix one_hot(std::span<const int> labels, std::size_t n_classes) {
  Matrix out(labels.size(), n_classes, 0.0);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= n_classes)
      throw std::out_of_range("one_hot: label " + std::to_string(labels[i]) + " out of range");
    out(i, static_cast<std::size_t>(labels[i])) = 1.0;
  }
  return out;
}

struct SplitSpec {
  double test_fraction = 0.2;
  double validation_fraction = 0.2;
  bool stratified = true;
  std::uint64_t seed = 0;

  void validate() const {
    if (!(test_fraction > 0.0 && test_fraction < 1.0)) throw ConfigError("test_fraction must be in (0,1)");
    if (!(validation_fraction >= 0.0 && validation_fraction < 1.0))
      throw ConfigError("validation_fraction must be in [0,1)");
  }
};

struct SplitResult {
  Dataset train, validation, test;
  std::vector<std::size_t> train_rows, validation_rows, test_rows;
};

namespace detail {

inline std::size_t rounded_share(double fraction, std::size_t count, std::size_t lo, std::size_t hi) {
  auto n = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(count)));
  return std::clamp(n, lo, hi);
}

}  // namespace detail

// Partitions rows into train/validation/test. The validation subset is carved
// from the training portion. When stratified, every class keeps at least one
// row on each side of the test cut.
inline SplitResult split(const Dataset& d, const SplitSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);
  std::vector<std::vector<std::size_t>> groups;
  if (spec.stratified) {
    groups.resize(d.n_classes());
    for (std::size_t r = 0; r < d.rows(); ++r) groups[static_cast<std::size_t>(d.labels[r])].push_back(r);
    for (std::size_t c = 0; c < groups.size(); ++c)
      if (groups[c].size() == 1)
        throw DataError("stratification impossible: class '" + d.label_map.decode(static_cast<int>(c)) +
                        "' has a single row");
  } else {
    groups.emplace_back(d.rows());
    for (std::size_t r = 0; r < d.rows(); ++r) groups[0][r] = r;
  }

  SplitResult out;
  for (auto& g : groups) {
    if (g.empty()) continue;
    rng.shuffle(g);
    const std::size_t n = g.size();
    const std::size_t n_test =
        spec.stratified ? detail::rounded_share(spec.test_fraction, n, 1, n - 1) : detail::rounded_share(spec.test_fraction, n, 0, n);
    const std::size_t n_train_all = n - n_test;
    const std::size_t n_val =
        detail::rounded_share(spec.validation_fraction, n_train_all, 0, n_train_all > 0 ? n_train_all - 1 : 0);
    out.test_rows.insert(out.test_rows.end(), g.begin(), g.begin() + static_cast<std::ptrdiff_t>(n_test));
    out.validation_rows.insert(out.validation_rows.end(), g.begin() + static_cast<std::ptrdiff_t>(n_test),
                               g.begin() + static_cast<std::ptrdiff_t>(n_test + n_val));
    out.train_rows.insert(out.train_rows.end(), g.begin() + static_cast<std::ptrdiff_t>(n_test + n_val), g.end());
  }
  std::sort(out.train_rows.begin(), out.train_rows.end());
  std::sort(out.validation_rows.begin(), out.validation_rows.end());
  std::sort(out.test_rows.begin(), out.test_rows.end());
  out.train = d.subset(out.train_rows);
  out.validation = d.subset(out.validation_rows);
  out.test = d.subset(out.test_rows);
  return out;
}

}  // namespace nids

#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <tuple>
#include <vector>

#include "json.hpp"
#include "nids/error.hpp"
#include "nids/matrix.hpp"

namespace nids {

// Per-column extrema used by min-max scaling.
struct NormStats {
  std::vector<double> mins;
  std::vector<double> maxs;
  std::vector<std::string> column_names;

  friend bool operator==(const NormStats&, const NormStats&) = default;
};

inline void to_json(nlohmann::json& j, const NormStats& s) {
  j = {{"columns", s.column_names}, {"mins", s.mins}, {"maxs", s.maxs}};
}

inline void from_json(const nlohmann::json& j, NormStats& s) {
  j.at("columns").get_to(s.column_names);
  j.at("mins").get_to(s.mins);
  j.at("maxs").get_to(s.maxs);
  if (s.mins.size() != s.maxs.size() || s.mins.size() != s.column_names.size())
    throw DataError("NormStats: length mismatch");
}

inline NormStats fit_minmax(const Matrix& x, std::vector<std::string> names = {}) {
  if (x.rows() == 0) throw DataError("fit_minmax: empty input");
  NormStats s;
  s.mins.assign(x.row(0).begin(), x.row(0).end());
  s.maxs = s.mins;
  for (std::size_t r = 1; r < x.rows(); ++r)
    for (std::size_t c = 0; c < x.cols(); ++c) {
      s.mins[c] = std::min(s.mins[c], x(r, c));
      s.maxs[c] = std::max(s.maxs[c], x(r, c));
    }
  if (names.empty())
    for (std::size_t c = 0; c < x.cols(); ++c) names.push_back("x" + std::to_string(c));
  s.column_names = std::move(names);
  return s;
}

// (x - min) / (max - min), clamped to [0,1]; constant columns map to 0.
inline Matrix apply_minmax(const Matrix& x, const NormStats& s) {
  if (x.cols() != s.mins.size())
    throw DataError("apply_minmax: expected " + std::to_string(s.mins.size()) + " columns, got " +
                    std::to_string(x.cols()));
  Matrix out(x.rows(), x.cols());
  for (std::size_t c = 0; c < x.cols(); ++c) {
    const double span = s.maxs[c] - s.mins[c];
    for (std::size_t r = 0; r < x.rows(); ++r)
      out(r, c) = span > 0.0 ? std::clamp((x(r, c) - s.mins[c]) / span, 0.0, 1.0) : 0.0;
  }
  return out;
}

struct CorrelationMatrix {
  Matrix values;
  std::vector<std::string> column_names;
};

// Sample Pearson correlation. Zero-variance columns correlate 0 with everything, themselves included.
inline CorrelationMatrix pearson_correlation(const Matrix& x, std::vector<std::string> names = {}) {
  if (x.rows() < 2) throw DataError("pearson_correlation: need at least 2 rows");
  const std::size_t n = x.rows(), d = x.cols();
  std::vector<double> mean(d, 0.0), sd(d, 0.0);
  for (std::size_t c = 0; c < d; ++c) {
    for (std::size_t r = 0; r < n; ++r) mean[c] += x(r, c);
    mean[c] /= static_cast<double>(n);
    for (std::size_t r = 0; r < n; ++r) sd[c] += (x(r, c) - mean[c]) * (x(r, c) - mean[c]);
    sd[c] = std::sqrt(sd[c]);
  }
  CorrelationMatrix cm{Matrix(d, d, 0.0), std::move(names)};
  for (std::size_t i = 0; i < d; ++i) {
    if (sd[i] == 0.0) continue;
    cm.values(i, i) = 1.0;
    for (std::size_t j = i + 1; j < d; ++j) {
      if (sd[j] == 0.0) continue;
      double s = 0.0;
      for (std::size_t r = 0; r < n; ++r) s += (x(r, i) - mean[i]) * (x(r, j) - mean[j]);
      const double v = std::clamp(s / (sd[i] * sd[j]), -1.0, 1.0);
      cm.values(i, j) = cm.values(j, i) = v;
    }
  }
  return cm;
}

struct HistogramBin {
  double lower = 0.0;
  double upper = 0.0;
  std::size_t count = 0;
  friend bool operator==(const HistogramBin&, const HistogramBin&) = default;
};

// Equal-width bins over [min, max]; the maximum lands in the last bin.
inline std::vector<HistogramBin> histogram(std::span<const double> column, std::size_t n_bins) {
  if (column.empty()) throw DataError("histogram: empty column");
  if (n_bins == 0) throw ConfigError("histogram: n_bins must be >= 1");
  const auto [lo_it, hi_it] = std::minmax_element(column.begin(), column.end());
  const double lo = *lo_it, hi = *hi_it;
  if (lo == hi) return {{lo, hi, column.size()}};
  const double width = (hi - lo) / static_cast<double>(n_bins);
  std::vector<HistogramBin> bins(n_bins);
  for (std::size_t b = 0; b < n_bins; ++b) {
    bins[b].lower = lo + width * static_cast<double>(b);
    bins[b].upper = b + 1 == n_bins ? hi : lo + width * static_cast<double>(b + 1);
  }
  for (double v : column) {
    auto b = static_cast<std::size_t>((v - lo) / width);
    ++bins[std::min(b, n_bins - 1)].count;
  }
  return bins;
}

}  // namespace nids

#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "nids/dataset.hpp"
#include "nids/error.hpp"

namespace nids {

// Equal-width discretization over [min, max]. The maximum lands in bin n_bins-1;
// a constant column maps to all zeros.
inline std::vector<int> discretize_equal_width(std::span<const double> column, int n_bins) {
  if (column.empty()) throw DataError("discretize_equal_width: empty column");
  if (n_bins < 2) throw ConfigError("discretize_equal_width: n_bins must be >= 2");
  const auto [lo_it, hi_it] = std::minmax_element(column.begin(), column.end());
  const double lo = *lo_it, hi = *hi_it;
  std::vector<int> out(column.size(), 0);
  if (lo == hi) return out;
  for (std::size_t i = 0; i < column.size(); ++i) {
    const double t = (column[i] - lo) / (hi - lo) * n_bins;
    out[i] = std::min(static_cast<int>(t), n_bins - 1);
  }
  return out;
}

inline constexpr double kSuTolerance = 1e-12;

namespace detail {

// Plug-in entropy in bits. Counts are sorted first so the sum does not depend
// on the order in which categories were encountered.
inline double entropy_from_counts(std::vector<std::size_t> counts, std::size_t total) {
  std::sort(counts.begin(), counts.end());
  double h = 0.0;
  const double n = static_cast<double>(total);
  for (auto c : counts) {
    if (c == 0) continue;
    const double p = static_cast<double>(c) / n;
    h -= p * std::log2(p);
  }
  return h;
}

template <class Key>
std::vector<std::size_t> tally(const std::map<Key, std::size_t>& m) {
  std::vector<std::size_t> out;
  out.reserve(m.size());
  for (const auto& [k, v] : m) out.push_back(v);
  return out;
}

}  // namespace detail

// SU(X,Y) = 2 * IG(X;Y) / (H(X) + H(Y)), in [0,1]. Returns 0 when both are constant.
inline double symmetrical_uncertainty(std::span<const int> x, std::span<const int> y) {
  if (x.size() != y.size()) throw std::invalid_argument("symmetrical_uncertainty: length mismatch");
  if (x.empty()) throw std::invalid_argument("symmetrical_uncertainty: empty input");
  std::map<int, std::size_t> cx, cy;
  std::map<std::pair<int, int>, std::size_t> cxy;
  for (std::size_t i = 0; i < x.size(); ++i) {
    ++cx[x[i]];
    ++cy[y[i]];
    ++cxy[{x[i], y[i]}];
  }
  const double hx = detail::entropy_from_counts(detail::tally(cx), x.size());
  const double hy = detail::entropy_from_counts(detail::tally(cy), x.size());
  const double hxy = detail::entropy_from_counts(detail::tally(cxy), x.size());
  const double denom = hx + hy;
  if (denom <= 0.0) return 0.0;
  const double su = 2.0 * (denom - hxy) / denom;
  // snap rounding noise at the ends of the range
  if (su < kSuTolerance) return 0.0;
  if (su > 1.0 - kSuTolerance) return 1.0;
  return su;
}

struct SuScore {
  std::size_t feature_index = 0;
  double su_with_class = 0.0;
  friend bool operator==(const SuScore&, const SuScore&) = default;
};

struct FeatureSubset {
  std::vector<std::size_t> selected_indices;
  std::vector<std::string> selected_names;
  std::vector<SuScore> scores;
  double threshold = 0.0;
  friend bool operator==(const FeatureSubset&, const FeatureSubset&) = default;
};

inline void to_json(nlohmann::json& j, const FeatureSubset& s) {
  nlohmann::json scores = nlohmann::json::array();
  for (std::size_t i = 0; i < s.scores.size(); ++i)
    scores.push_back({{"name", s.selected_names.at(i)},
                      {"index", s.scores[i].feature_index},
                      {"su_with_class", s.scores[i].su_with_class}});
  j = {{"threshold", s.threshold}, {"selected", s.selected_names}, {"scores", scores}};
}

inline void from_json(const nlohmann::json& j, FeatureSubset& s) {
  s = {};
  j.at("threshold").get_to(s.threshold);
  j.at("selected").get_to(s.selected_names);
  for (const auto& e : j.at("scores")) {
    SuScore sc{e.at("index").get<std::size_t>(), e.at("su_with_class").get<double>()};
    s.selected_indices.push_back(sc.feature_index);
    s.scores.push_back(sc);
  }
}

// FCBF over discrete feature columns. Features are ranked by SU with the class
// (ties by column index); walking that ranking, a feature is kept when its SU
// exceeds the threshold, and every later feature g with SU(f,g) >= SU(g,class)
// is then discarded as redundant.
inline FeatureSubset fcbf_select(std::span<const std::vector<int>> columns, std::span<const int> labels,
                                 double threshold, std::span<const std::string> names = {}) {
  if (threshold < 0.0) throw ConfigError("fcbf_select: threshold must be >= 0");
  const std::size_t d = columns.size();
  for (const auto& c : columns)
    if (c.size() != labels.size()) throw DataError("fcbf_select: column length does not match labels");

  std::vector<double> su_class(d);
  for (std::size_t f = 0; f < d; ++f) su_class[f] = symmetrical_uncertainty(columns[f], labels);

  std::vector<std::size_t> order(d);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return su_class[a] > su_class[b]; });

  FeatureSubset out;
  out.threshold = threshold;
  std::vector<bool> removed(d, false);
  for (std::size_t i = 0; i < d; ++i) {
    const std::size_t f = order[i];
    if (removed[f] || !(su_class[f] > threshold)) continue;
    out.selected_indices.push_back(f);
    out.scores.push_back({f, su_class[f]});
    out.selected_names.push_back(f < names.size() ? names[f] : "f" + std::to_string(f));
    for (std::size_t k = i + 1; k < d; ++k) {
      const std::size_t g = order[k];
      if (!removed[g] && symmetrical_uncertainty(columns[f], columns[g]) >= su_class[g] - kSuTolerance) removed[g] = true;
    }
  }
  return out;
}

// Discretizes every column of a (normalized) dataset.
inline std::vector<std::vector<int>> discretize_columns(const Dataset& d, int n_bins) {
  std::vector<std::vector<int>> cols;
  cols.reserve(d.cols());
  for (std::size_t c = 0; c < d.cols(); ++c) cols.push_back(discretize_equal_width(d.features.column(c), n_bins));
  return cols;
}

// Convenience entry point for a dataset whose features already hold bin indices.
inline FeatureSubset fcbf_select(const Dataset& discretized, double threshold) {
  std::vector<std::vector<int>> cols(discretized.cols());
  for (std::size_t c = 0; c < discretized.cols(); ++c)
    for (std::size_t r = 0; r < discretized.rows(); ++r) cols[c].push_back(static_cast<int>(discretized.features(r, c)));
  return fcbf_select(cols, discretized.labels, threshold, discretized.feature_names);
}

// Applies a fitted subset by column name.
inline Dataset apply_selection(const Dataset& d, const FeatureSubset& s) {
  std::vector<std::size_t> idx;
  for (const auto& name : s.selected_names) {
    auto it = std::find(d.feature_names.begin(), d.feature_names.end(), name);
    if (it == d.feature_names.end()) throw DataError("selected feature '" + name + "' missing from dataset");
    idx.push_back(static_cast<std::size_t>(it - d.feature_names.begin()));
  }
  return d.select_columns(idx);
}

}  // namespace nids

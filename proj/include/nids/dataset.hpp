#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <map>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "nids/error.hpp"
#include "nids/matrix.hpp"

namespace nids {

// Trim, collapse internal whitespace runs to a single '_', lowercase.
inline std::string canonicalize_name(std::string_view raw) {
  std::string out;
  bool pending_sep = false;
  for (unsigned char c : raw) {
    if (std::isspace(c)) {
      pending_sep = !out.empty();
      continue;
    }
    if (pending_sep) out.push_back('_');
    pending_sep = false;
    out.push_back(static_cast<char>(std::tolower(c)));
  }
  return out;
}

// Bijection between class names and 0..n-1, ordered lexicographically.
class LabelMap {
public:
  LabelMap() = default;

  template <class Range>
  static LabelMap from_names(const Range& names) {
    LabelMap m;
    std::set<std::string> uniq;
    for (const auto& n : names) uniq.insert(canonicalize_name(n));
    m.names_.assign(uniq.begin(), uniq.end());
    for (std::size_t i = 0; i < m.names_.size(); ++i) m.index_[m.names_[i]] = static_cast<int>(i);
    return m;
  }

  std::size_t size() const noexcept { return names_.size(); }
  const std::vector<std::string>& class_names() const noexcept { return names_; }

  int encode(std::string_view name) const {
    auto it = index_.find(canonicalize_name(name));
    if (it == index_.end()) throw DataError("unknown class '" + std::string(name) + "'");
    return it->second;
  }

  const std::string& decode(int index) const {
    if (index < 0 || static_cast<std::size_t>(index) >= names_.size())
      throw DataError("class index " + std::to_string(index) + " out of range");
    return names_[static_cast<std::size_t>(index)];
  }

  friend bool operator==(const LabelMap& a, const LabelMap& b) { return a.names_ == b.names_; }

private:
  std::vector<std::string> names_;
  std::map<std::string, int, std::less<>> index_;
};

// Origin of a row: an original record id, or a synthetic sample.
struct RowTag {
  std::int64_t id = 0;
  bool synthetic = false;
  friend bool operator==(const RowTag&, const RowTag&) = default;
};

struct Dataset {
  Matrix features;
  std::vector<std::string> feature_names;
  std::vector<int> labels;
  LabelMap label_map;
  std::vector<RowTag> provenance;
  // Per-cell flag for cells that failed to parse; empty when there are none.
  std::vector<std::uint8_t> missing;

  std::size_t rows() const noexcept { return features.rows(); }
  std::size_t cols() const noexcept { return features.cols(); }
  std::size_t n_classes() const noexcept { return label_map.size(); }

  bool is_missing(std::size_t r, std::size_t c) const noexcept {
    return !missing.empty() && missing[r * cols() + c] != 0;
  }

  std::vector<std::size_t> class_counts() const {
    std::vector<std::size_t> counts(n_classes(), 0);
    for (int l : labels) ++counts[static_cast<std::size_t>(l)];
    return counts;
  }

  // Checks structural invariants; finiteness is only checked when require_finite is set.
  void validate(bool require_finite = true) const {
    if (labels.size() != rows()) throw DataError("label count does not match row count");
    if (feature_names.size() != cols()) throw DataError("feature name count does not match column count");
    if (!provenance.empty() && provenance.size() != rows())
      throw DataError("provenance count does not match row count");
    std::set<std::string> seen;
    for (const auto& n : feature_names)
      if (!seen.insert(canonicalize_name(n)).second) throw DataError("duplicate feature name '" + n + "'");
    for (int l : labels)
      if (l < 0 || static_cast<std::size_t>(l) >= n_classes())
        throw DataError("label " + std::to_string(l) + " outside label map");
    if (require_finite)
      for (double v : features.data())
        if (!std::isfinite(v)) throw DataError("non-finite feature value");
  }

  Dataset subset(std::span<const std::size_t> idx) const {
    Dataset out;
    out.features = features.select_rows(idx);
    out.feature_names = feature_names;
    out.label_map = label_map;
    out.labels.reserve(idx.size());
    for (auto i : idx) out.labels.push_back(labels[i]);
    if (!provenance.empty())
      for (auto i : idx) out.provenance.push_back(provenance[i]);
    if (!missing.empty())
      for (auto i : idx)
        out.missing.insert(out.missing.end(), missing.begin() + static_cast<std::ptrdiff_t>(i * cols()),
                           missing.begin() + static_cast<std::ptrdiff_t>((i + 1) * cols()));
    return out;
  }

  Dataset select_columns(std::span<const std::size_t> idx) const {
    Dataset out;
    out.features = features.select_cols(idx);
    for (auto c : idx) out.feature_names.push_back(feature_names[c]);
    out.labels = labels;
    out.label_map = label_map;
    out.provenance = provenance;
    if (!missing.empty()) {
      out.missing.resize(rows() * idx.size());
      for (std::size_t r = 0; r < rows(); ++r)
        for (std::size_t j = 0; j < idx.size(); ++j) out.missing[r * idx.size() + j] = missing[r * cols() + idx[j]];
    }
    return out;
  }

  // Same rows, labels and provenance with a replacement feature block.
  Dataset with_features(Matrix f, std::vector<std::string> names) const {
    Dataset out;
    out.features = std::move(f);
    out.feature_names = std::move(names);
    out.labels = labels;
    out.label_map = label_map;
    out.provenance = provenance;
    return out;
  }

  friend bool operator==(const Dataset&, const Dataset&) = default;
};

}  // namespace nids

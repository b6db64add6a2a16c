#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "nids/dataset.hpp"
#include "nids/error.hpp"
#include "nids/random.hpp"

namespace nids {

enum class FeaturesPerSplit { sqrt, log2, all };

inline std::string to_string(FeaturesPerSplit f) {
  switch (f) {
    case FeaturesPerSplit::sqrt: return "sqrt";
    case FeaturesPerSplit::log2: return "log2";
    case FeaturesPerSplit::all: return "all";
  }
  return "sqrt";
}

inline FeaturesPerSplit features_per_split_from_string(const std::string& s) {
  if (s == "sqrt") return FeaturesPerSplit::sqrt;
  if (s == "log2") return FeaturesPerSplit::log2;
  if (s == "all") return FeaturesPerSplit::all;
  throw ConfigError("unknown features_per_split '" + s + "'");
}

struct RfParams {
  int n_trees = 30;
  std::optional<int> max_depth;  // nullopt = grow until pure
  int min_samples_split = 2;
  FeaturesPerSplit features_per_split = FeaturesPerSplit::sqrt;
  std::uint64_t seed = 0;

  void validate() const {
    if (n_trees < 1) throw ConfigError("RfParams: n_trees must be >= 1");
    if (max_depth && *max_depth < 1) throw ConfigError("RfParams: max_depth must be >= 1");
    if (min_samples_split < 2) throw ConfigError("RfParams: min_samples_split must be >= 2");
  }
  friend bool operator==(const RfParams&, const RfParams&) = default;
};

inline void to_json(nlohmann::json& j, const RfParams& p) {
  j = {{"n_trees", p.n_trees},
       {"max_depth", p.max_depth ? nlohmann::json(*p.max_depth) : nlohmann::json(nullptr)},
       {"min_samples_split", p.min_samples_split},
       {"features_per_split", to_string(p.features_per_split)},
       {"seed", p.seed}};
}

inline void from_json(const nlohmann::json& j, RfParams& p) {
  p = {};
  if (j.contains("n_trees")) j.at("n_trees").get_to(p.n_trees);
  if (j.contains("max_depth") && !j.at("max_depth").is_null()) p.max_depth = j.at("max_depth").get<int>();
  if (j.contains("min_samples_split")) j.at("min_samples_split").get_to(p.min_samples_split);
  if (j.contains("features_per_split"))
    p.features_per_split = features_per_split_from_string(j.at("features_per_split").get<std::string>());
  if (j.contains("seed")) j.at("seed").get_to(p.seed);
}

// Flat CART tree; a node with feature < 0 is a leaf holding class proportions.
struct DecisionTree {
  struct Node {
    int feature = -1;
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    std::vector<double> distribution;
  };
  std::vector<Node> nodes;

  const std::vector<double>& leaf_for(std::span<const double> x) const {
    std::size_t i = 0;
    while (nodes[i].feature >= 0)
      i = static_cast<std::size_t>(x[static_cast<std::size_t>(nodes[i].feature)] <= nodes[i].threshold ? nodes[i].left
                                                                                                          : nodes[i].right);
    return nodes[i].distribution;
  }

  std::size_t depth() const {
    std::vector<std::size_t> d(nodes.size(), 0);
    std::size_t best = 0;
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      best = std::max(best, d[i]);
      if (nodes[i].feature >= 0) {
        d[static_cast<std::size_t>(nodes[i].left)] = d[i] + 1;
        d[static_cast<std::size_t>(nodes[i].right)] = d[i] + 1;
      }
    }
    return best;
  }
};

struct RandomForest {
  std::vector<DecisionTree> trees;
  std::size_t n_features = 0;
  std::size_t n_classes = 0;
  RfParams params;
};

namespace detail {

inline double gini(std::span<const std::size_t> counts, std::size_t total) {
  if (total == 0) return 0.0;
  double s = 0.0;
  for (auto c : counts) {
    const double p = static_cast<double>(c) / static_cast<double>(total);
    s += p * p;
  }
  return 1.0 - s;
}

class TreeBuilder {
public:
  TreeBuilder(const Matrix& x, std::span<const int> y, std::size_t n_classes, const RfParams& p, Rng& rng)
      : x_(x), y_(y), n_classes_(n_classes), params_(p), rng_(rng) {
    const double d = static_cast<double>(x.cols());
    switch (p.features_per_split) {
      case FeaturesPerSplit::sqrt: mtry_ = static_cast<std::size_t>(std::floor(std::sqrt(d))); break;
      case FeaturesPerSplit::log2: mtry_ = static_cast<std::size_t>(std::floor(std::log2(d))); break;
      case FeaturesPerSplit::all: mtry_ = x.cols(); break;
    }
    mtry_ = std::clamp<std::size_t>(mtry_, 1, x.cols());
  }

  DecisionTree build(std::vector<std::size_t> rows) {
    tree_.nodes.clear();
    grow(std::move(rows), 0);
    return std::move(tree_);
  }

private:
  struct Split {
    int feature = -1;
    double threshold = 0.0;
    double gain = 0.0;
  };

  int grow(std::vector<std::size_t> rows, int depth) {
    const int id = static_cast<int>(tree_.nodes.size());
    tree_.nodes.emplace_back();
    std::vector<std::size_t> counts(n_classes_, 0);
    for (auto r : rows) ++counts[static_cast<std::size_t>(y_[r])];
    const bool pure = std::count_if(counts.begin(), counts.end(), [](auto c) { return c > 0; }) <= 1;
    const bool depth_cap = params_.max_depth && depth >= *params_.max_depth;
    Split split;
    if (!pure && !depth_cap && rows.size() >= static_cast<std::size_t>(params_.min_samples_split))
      split = best_split(rows, counts);
    if (split.feature < 0) {
      auto& dist = tree_.nodes[static_cast<std::size_t>(id)].distribution;
      dist.resize(n_classes_);
      for (std::size_t c = 0; c < n_classes_; ++c)
        dist[c] = static_cast<double>(counts[c]) / static_cast<double>(rows.size());
      return id;
    }
    std::vector<std::size_t> left, right;
    for (auto r : rows)
      (x_(r, static_cast<std::size_t>(split.feature)) <= split.threshold ? left : right).push_back(r);
    rows.clear();
    rows.shrink_to_fit();
    const int l = grow(std::move(left), depth + 1);
    const int r = grow(std::move(right), depth + 1);
    auto& node = tree_.nodes[static_cast<std::size_t>(id)];
    node.feature = split.feature;
    node.threshold = split.threshold;
    node.left = l;
    node.right = r;
    return id;
  }

  // Tries mtry random features; keeps drawing past mtry until a valid split exists.
  Split best_split(const std::vector<std::size_t>& rows, const std::vector<std::size_t>& counts) {
    std::vector<std::size_t> features(x_.cols());
    std::iota(features.begin(), features.end(), 0);
    rng_.shuffle(features);
    const double parent = gini(counts, rows.size());
    Split best;
    std::vector<std::pair<double, int>> vals(rows.size());
    std::vector<std::size_t> left(n_classes_), right(n_classes_);
    const double n = static_cast<double>(rows.size());
    for (std::size_t fi = 0; fi < features.size(); ++fi) {
      if (fi >= mtry_ && best.feature >= 0) break;
      const std::size_t f = features[fi];
      for (std::size_t i = 0; i < rows.size(); ++i) vals[i] = {x_(rows[i], f), y_[rows[i]]};
      std::sort(vals.begin(), vals.end());
      std::fill(left.begin(), left.end(), 0);
      right = counts;
      for (std::size_t i = 0; i + 1 < vals.size(); ++i) {
        const auto cls = static_cast<std::size_t>(vals[i].second);
        ++left[cls];
        --right[cls];
        if (vals[i].first == vals[i + 1].first) continue;
        const std::size_t nl = i + 1, nr = vals.size() - nl;
        const double weighted =
            (static_cast<double>(nl) * gini(left, nl) + static_cast<double>(nr) * gini(right, nr)) / n;
        const double gain = parent - weighted;
        if (gain > best.gain + 1e-12) {
          double thr = 0.5 * (vals[i].first + vals[i + 1].first);
          if (!(thr < vals[i + 1].first)) thr = vals[i].first;
          best = {static_cast<int>(f), thr, gain};
        }
      }
    }
    return best;
  }

  const Matrix& x_;
  std::span<const int> y_;
  std::size_t n_classes_;
  const RfParams& params_;
  Rng& rng_;
  std::size_t mtry_ = 1;
  DecisionTree tree_;
};

}  // namespace detail

// Bagged CART trees split on Gini impurity. Tree t draws from its own child
// seed, so the forest does not depend on build order.
inline RandomForest train_random_forest(const Dataset& train, const RfParams& p) {
  p.validate();
  if (train.rows() < 2) throw DataError("train_random_forest: need at least 2 rows");
  const auto counts = train.class_counts();
  if (std::count_if(counts.begin(), counts.end(), [](auto c) { return c > 0; }) < 2)
    throw DataError("train_random_forest: need at least 2 classes");
  if (train.cols() == 0) throw DataError("train_random_forest: no features");

  RandomForest rf;
  rf.n_features = train.cols();
  rf.n_classes = train.n_classes();
  rf.params = p;
  const std::size_t n = train.rows();
  for (int t = 0; t < p.n_trees; ++t) {
    Rng rng(derive_seed(p.seed, "tree", static_cast<std::uint64_t>(t)));
    std::vector<std::size_t> sample(n);
    for (auto& s : sample) s = rng.index(n);
    detail::TreeBuilder builder(train.features, train.labels, rf.n_classes, p, rng);
    rf.trees.push_back(builder.build(std::move(sample)));
  }
  return rf;
}

// Mean of per-tree leaf distributions.
inline Matrix predict_proba(const RandomForest& rf, const Matrix& x) {
  if (x.cols() != rf.n_features)
    throw DataError("random forest expects " + std::to_string(rf.n_features) + " features, got " +
                    std::to_string(x.cols()));
  Matrix out(x.rows(), rf.n_classes, 0.0);
  for (std::size_t r = 0; r < x.rows(); ++r) {
    auto o = out.row(r);
    for (const auto& t : rf.trees) {
      const auto& dist = t.leaf_for(x.row(r));
      for (std::size_t c = 0; c < rf.n_classes; ++c) o[c] += dist[c];
    }
    for (auto& v : o) v /= static_cast<double>(rf.trees.size());
  }
  return out;
}

inline void to_json(nlohmann::json& j, const DecisionTree& t) {
  nlohmann::json nodes = nlohmann::json::array();
  for (const auto& n : t.nodes) {
    if (n.feature < 0)
      nodes.push_back({{"leaf", n.distribution}});
    else
      nodes.push_back({{"feature", n.feature}, {"threshold", n.threshold}, {"left", n.left}, {"right", n.right}});
  }
  j = nodes;
}

inline void from_json(const nlohmann::json& j, DecisionTree& t) {
  t.nodes.clear();
  for (const auto& e : j) {
    DecisionTree::Node n;
    if (e.contains("leaf")) {
      e.at("leaf").get_to(n.distribution);
    } else {
      e.at("feature").get_to(n.feature);
      e.at("threshold").get_to(n.threshold);
      e.at("left").get_to(n.left);
      e.at("right").get_to(n.right);
    }
    t.nodes.push_back(std::move(n));
  }
}

}  // namespace nids

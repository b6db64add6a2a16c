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
#include "nids/kmeans.hpp"
#include "nids/random.hpp"
#include "nids/smote.hpp"

namespace nids {

enum class TargetPolicy { match_majority, explicit_factor };

struct BalanceConfig {
  std::optional<std::size_t> k;  // clusters; defaults to the number of classes
  std::size_t smote_k_neighbors = 5;
  TargetPolicy policy = TargetPolicy::match_majority;
  double factor = 2.0;  // SMOTE factor N, used by explicit_factor
  std::uint64_t seed = 0;
};

struct BalanceReport {
  std::vector<std::string> class_names;
  std::vector<std::size_t> before;
  std::vector<std::size_t> after;
  // synthetic_per_cluster[cluster][class]
  std::vector<std::vector<std::size_t>> synthetic_per_cluster;
  std::size_t k = 0;
  std::uint64_t seed = 0;
  std::vector<double> inertia_history;

  std::size_t total_synthetic() const {
    std::size_t s = 0;
    for (const auto& row : synthetic_per_cluster) s += std::accumulate(row.begin(), row.end(), std::size_t{0});
    return s;
  }
};

inline void to_json(nlohmann::json& j, const BalanceReport& r) {
  nlohmann::json classes = nlohmann::json::array();
  for (std::size_t c = 0; c < r.class_names.size(); ++c)
    classes.push_back({{"class", r.class_names[c]}, {"before", r.before[c]}, {"after", r.after[c]}});
  nlohmann::json clusters = nlohmann::json::array();
  for (std::size_t k = 0; k < r.synthetic_per_cluster.size(); ++k) {
    const auto& row = r.synthetic_per_cluster[k];
    clusters.push_back({{"cluster", k},
                        {"synthetic", std::accumulate(row.begin(), row.end(), std::size_t{0})},
                        {"per_class", row}});
  }
  j = {{"k", r.k}, {"seed", r.seed}, {"classes", classes}, {"clusters", clusters}};
}

// Splits total into integer parts proportional to weights using largest-remainder
// rounding (ties to the lower index); parts sum to total exactly.
inline std::vector<std::size_t> apportion(std::size_t total, std::span<const std::size_t> weights) {
  std::vector<std::size_t> out(weights.size(), 0);
  const std::size_t wsum = std::accumulate(weights.begin(), weights.end(), std::size_t{0});
  if (total == 0 || wsum == 0) return out;
  std::vector<std::pair<std::size_t, std::size_t>> rem;  // (remainder numerator, index)
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    const auto prod = static_cast<unsigned __int128>(total) * weights[i];
    out[i] = static_cast<std::size_t>(prod / wsum);
    rem.emplace_back(static_cast<std::size_t>(prod % wsum), i);
    assigned += out[i];
  }
  std::stable_sort(rem.begin(), rem.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t t = 0; assigned < total; ++t, ++assigned) ++out[rem[t].second];
  return out;
}

struct BalanceResult {
  Dataset data;
  BalanceReport report;
};

// Clusters all rows, then oversamples every non-majority class inside each
// cluster with SMOTE. A class's deficit is spread over clusters in proportion to
// where its members sit. Synthetic rows are appended after the originals.
inline BalanceResult balance_dataset(const Dataset& d, const BalanceConfig& cfg) {
  const auto counts = d.class_counts();
  const auto present = std::count_if(counts.begin(), counts.end(), [](auto c) { return c > 0; });
  if (present < 2) throw DataError("balance_dataset: need at least 2 classes, found " + std::to_string(present));
  if (cfg.policy == TargetPolicy::explicit_factor && !(cfg.factor >= 1.0))
    throw ConfigError("balance_dataset: SMOTE factor must be >= 1");
  const std::size_t k = cfg.k.value_or(d.n_classes());
  const std::size_t n_classes = d.n_classes();

  const auto cl = kmeans(d.features, k, derive_seed(cfg.seed, "kmeans"));
  const std::size_t majority =
      static_cast<std::size_t>(std::max_element(counts.begin(), counts.end()) - counts.begin());

  BalanceResult res;
  auto& rep = res.report;
  rep.class_names = d.label_map.class_names();
  rep.before = counts;
  rep.after = counts;
  rep.k = k;
  rep.seed = cfg.seed;
  rep.inertia_history = cl.inertia_history;
  rep.synthetic_per_cluster.assign(k, std::vector<std::size_t>(n_classes, 0));

  res.data = d;
  if (res.data.provenance.empty())
    for (std::size_t r = 0; r < d.rows(); ++r) res.data.provenance.push_back({static_cast<std::int64_t>(r), false});
  std::int64_t next_id = 0;
  for (const auto& t : res.data.provenance) next_id = std::max(next_id, t.id + 1);

  for (std::size_t c = 0; c < n_classes; ++c) {
    if (c == majority || counts[c] == 0) continue;
    std::size_t deficit = 0;
    if (cfg.policy == TargetPolicy::match_majority)
      deficit = counts[majority] - counts[c];
    else
      deficit = static_cast<std::size_t>(std::ceil((cfg.factor - 1.0) * static_cast<double>(counts[c]) - 1e-9));
    if (deficit == 0) continue;

    std::vector<std::vector<std::size_t>> members(k);
    for (std::size_t r = 0; r < d.rows(); ++r)
      if (static_cast<std::size_t>(d.labels[r]) == c) members[cl.assignment[r]].push_back(r);
    std::vector<std::size_t> weights(k);
    for (std::size_t j = 0; j < k; ++j) weights[j] = members[j].size();
    const auto quota = apportion(deficit, weights);

    for (std::size_t j = 0; j < k; ++j) {
      if (quota[j] == 0) continue;
      const Matrix local = d.features.select_rows(members[j]);
      const Matrix synth = smote_oversample(local, static_cast<std::int64_t>(quota[j]), cfg.smote_k_neighbors,
                                            derive_seed(cfg.seed, "smote", j, c));
      for (std::size_t s = 0; s < synth.rows(); ++s) {
        res.data.features.append_row(synth.row(s));
        res.data.labels.push_back(static_cast<int>(c));
        res.data.provenance.push_back({next_id++, true});
      }
      rep.synthetic_per_cluster[j][c] = quota[j];
    }
    rep.after[c] += deficit;
  }
  return res;
}

}  // namespace nids

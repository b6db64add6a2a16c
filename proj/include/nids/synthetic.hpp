#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"
#include "nids/dataset.hpp"
#include "nids/error.hpp"
#include "nids/random.hpp"

namespace nids {

struct SyntheticSpec {
  std::vector<std::size_t> rows_per_class{500, 200, 100, 50, 20};
  std::size_t n_features = 12;
  // Informative / redundant / noise split; when all zero the features are
  // divided half / quarter / remainder.
  std::size_t n_informative = 0, n_redundant = 0, n_noise = 0;
  double separation = 3.0;
  double redundant_noise = 0.1;
  std::uint64_t seed = 42;
};

struct SyntheticData {
  Dataset data;
  std::vector<std::string> raw_class_names;  // in rows_per_class order
  nlohmann::json metadata;
};

inline const std::vector<std::string>& synthetic_class_names() {
  static const std::vector<std::string> names{"Benign", "DoS", "PortScan", "Bot", "Infiltration", "DDoS",
                                              "BruteForce", "WebAttack", "Heartbleed", "SqlInjection"};
  return names;
}

// Gaussian class clusters over the informative columns (centres drawn as
// separation * N(0,1)), redundant columns copying an informative column plus
// small noise, and pure-noise columns. Rows are shuffled.
inline SyntheticData generate_synthetic(const SyntheticSpec& spec) {
  const std::size_t n_classes = spec.rows_per_class.size();
  if (n_classes < 2) throw ConfigError("generate_synthetic: need at least 2 classes");
  if (spec.n_features < 2) throw ConfigError("generate_synthetic: need at least 2 features");
  if (spec.separation < 0.0) throw ConfigError("generate_synthetic: separation must be >= 0");
  std::size_t n_inf = spec.n_informative, n_red = spec.n_redundant, n_noise = spec.n_noise;
  if (n_inf + n_red + n_noise == 0) {
    n_inf = std::max<std::size_t>(1, spec.n_features / 2);
    n_red = spec.n_features / 4;
    n_noise = spec.n_features - n_inf - n_red;
  }
  if (n_inf + n_red + n_noise != spec.n_features || n_inf == 0)
    throw ConfigError("generate_synthetic: informative + redundant + noise must equal n_features");

  Rng rng(derive_seed(spec.seed, "synthetic"));
  std::vector<std::vector<double>> centres(n_classes, std::vector<double>(n_inf));
  for (auto& c : centres)
    for (auto& v : c) v = spec.separation * rng.normal();

  std::vector<std::string> raw_names;
  for (std::size_t c = 0; c < n_classes; ++c)
    raw_names.push_back(c < synthetic_class_names().size() ? synthetic_class_names()[c] : "Class" + std::to_string(c));

  std::vector<std::size_t> order;
  for (std::size_t c = 0; c < n_classes; ++c)
    for (std::size_t i = 0; i < spec.rows_per_class[c]; ++i) order.push_back(c);
  rng.shuffle(order);

  SyntheticData out;
  auto& d = out.data;
  d.label_map = LabelMap::from_names(raw_names);
  for (std::size_t j = 0; j < spec.n_features; ++j) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "f%02zu", j);
    d.feature_names.emplace_back(buf);
  }
  d.features = Matrix(order.size(), spec.n_features);
  for (std::size_t r = 0; r < order.size(); ++r) {
    const std::size_t c = order[r];
    auto row = d.features.row(r);
    for (std::size_t j = 0; j < n_inf; ++j) row[j] = centres[c][j] + rng.normal();
    for (std::size_t j = 0; j < n_red; ++j) row[n_inf + j] = row[j % n_inf] + spec.redundant_noise * rng.normal();
    for (std::size_t j = 0; j < n_noise; ++j) row[n_inf + n_red + j] = rng.normal();
    d.labels.push_back(d.label_map.encode(raw_names[c]));
    d.provenance.push_back({static_cast<std::int64_t>(r), false});
  }

  std::vector<std::size_t> inf, red, noise, red_source;
  for (std::size_t j = 0; j < n_inf; ++j) inf.push_back(j);
  for (std::size_t j = 0; j < n_red; ++j) {
    red.push_back(n_inf + j);
    red_source.push_back(j % n_inf);
  }
  for (std::size_t j = 0; j < n_noise; ++j) noise.push_back(n_inf + n_red + j);
  nlohmann::json classes = nlohmann::json::array();
  for (std::size_t c = 0; c < n_classes; ++c) classes.push_back({{"name", raw_names[c]}, {"rows", spec.rows_per_class[c]}});
  out.metadata = {{"seed", spec.seed},
                  {"separation", spec.separation},
                  {"rows", order.size()},
                  {"classes", classes},
                  {"feature_names", d.feature_names},
                  {"informative", inf},
                  {"redundant", red},
                  {"redundant_source", red_source},
                  {"noise", noise}};
  out.raw_class_names = std::move(raw_names);
  return out;
}

}  // namespace nids

#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <vector>

#include "nids/error.hpp"
#include "nids/matrix.hpp"
#include "nids/random.hpp"

namespace nids {

// Indices of the k nearest other rows (Euclidean), nearest first, ties by index.
inline std::vector<std::vector<std::size_t>> nearest_neighbors(const Matrix& x, std::size_t k) {
  const std::size_t m = x.rows();
  std::vector<std::vector<std::size_t>> table(m);
  std::vector<std::pair<double, std::size_t>> cand;
  for (std::size_t i = 0; i < m; ++i) {
    cand.clear();
    for (std::size_t j = 0; j < m; ++j)
      if (j != i) cand.emplace_back(squared_distance(x.row(i), x.row(j)), j);
    const std::size_t kk = std::min(k, cand.size());
    std::partial_sort(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(kk), cand.end());
    for (std::size_t t = 0; t < kk; ++t) table[i].push_back(cand[t].second);
  }
  return table;
}

// SMOTE. For each synthetic row the generator is drawn in this order: base
// row index (uniform over the minority rows), neighbour slot (uniform over the
// base row's neighbour list), then the interpolation weight u in [0,1).
// A single-row minority is duplicated.
inline Matrix smote_oversample(const Matrix& minority, std::int64_t n_synthetic, std::size_t k_neighbors,
                               std::uint64_t seed) {
  if (n_synthetic < 0) throw std::invalid_argument("smote_oversample: n_synthetic must be >= 0");
  if (minority.rows() == 0) throw DataError("smote_oversample: minority set is empty");
  if (k_neighbors == 0) throw ConfigError("smote_oversample: k_neighbors must be >= 1");
  const std::size_t m = minority.rows(), d = minority.cols();
  Matrix out(static_cast<std::size_t>(n_synthetic), d);
  if (m == 1) {
    for (std::size_t s = 0; s < out.rows(); ++s) std::copy(minority.row(0).begin(), minority.row(0).end(), out.row(s).begin());
    return out;
  }
  const auto neighbors = nearest_neighbors(minority, k_neighbors);
  Rng rng(seed);
  for (std::size_t s = 0; s < out.rows(); ++s) {
    const std::size_t base = rng.index(m);
    const auto& nb = neighbors[base];
    const std::size_t other = nb[rng.index(nb.size())];
    const double u = rng.uniform();
    auto p = minority.row(base);
    auto q = minority.row(other);
    auto o = out.row(s);
    for (std::size_t j = 0; j < d; ++j) {
      const double v = p[j] + u * (q[j] - p[j]);
      o[j] = std::clamp(v, std::min(p[j], q[j]), std::max(p[j], q[j]));
    }
  }
  return out;
}

}  // namespace nids

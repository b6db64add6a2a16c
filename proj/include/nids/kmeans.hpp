#pragma once

#include <cstdint>
#include <limits>
#include <vector>

#include "nids/error.hpp"
#include "nids/matrix.hpp"
#include "nids/random.hpp"

namespace nids {

struct Clustering {
  Matrix centroids;
  std::vector<std::size_t> assignment;
  double inertia = 0.0;
  int iterations_run = 0;
  // Inertia measured after every assignment step.
  std::vector<double> inertia_history;

  std::size_t k() const noexcept { return centroids.rows(); }
};

namespace detail {

inline std::size_t nearest_centroid(std::span<const double> x, const Matrix& centroids, double* dist = nullptr) {
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < centroids.rows(); ++c) {
    const double d = squared_distance(x, centroids.row(c));
    if (d < best_d) {
      best_d = d;
      best = c;
    }
  }
  if (dist) *dist = best_d;
  return best;
}

// k-means++ seeding: first centre uniform, then proportional to squared distance.
inline Matrix kmeanspp_seed(const Matrix& x, std::size_t k, Rng& rng) {
  const std::size_t n = x.rows();
  Matrix centroids(k, x.cols());
  auto put = [&](std::size_t c, std::size_t r) { std::copy(x.row(r).begin(), x.row(r).end(), centroids.row(c).begin()); };
  put(0, rng.index(n));
  std::vector<double> d2(n);
  for (std::size_t r = 0; r < n; ++r) d2[r] = squared_distance(x.row(r), centroids.row(0));
  for (std::size_t c = 1; c < k; ++c) {
    double total = 0.0;
    for (double v : d2) total += v;
    std::size_t pick = 0;
    if (total > 0.0) {
      const double target = rng.uniform() * total;
      double acc = 0.0;
      pick = n - 1;
      for (std::size_t r = 0; r < n; ++r) {
        acc += d2[r];
        if (target < acc) {
          pick = r;
          break;
        }
      }
    } else {
      pick = rng.index(n);
    }
    put(c, pick);
    for (std::size_t r = 0; r < n; ++r) d2[r] = std::min(d2[r], squared_distance(x.row(r), centroids.row(c)));
  }
  return centroids;
}

}  // namespace detail

// Lloyd's algorithm with k-means++ seeding. Stops when the assignment is
// unchanged or after max_iterations; an empty cluster is moved onto the point
// farthest from its current centroid.
inline Clustering kmeans(const Matrix& x, std::size_t k, std::uint64_t seed, int max_iterations = 300) {
  const std::size_t n = x.rows(), d = x.cols();
  if (k == 0) throw ConfigError("kmeans: k must be >= 1");
  if (n < k) throw DataError("kmeans: " + std::to_string(n) + " rows is fewer than k = " + std::to_string(k));
  Rng rng(seed);
  Clustering cl;
  cl.centroids = detail::kmeanspp_seed(x, k, rng);
  cl.assignment.assign(n, k);

  std::vector<double> dist(n);
  for (;;) {
    bool changed = false;
    double inertia = 0.0;
    for (std::size_t r = 0; r < n; ++r) {
      const auto a = detail::nearest_centroid(x.row(r), cl.centroids, &dist[r]);
      changed |= a != cl.assignment[r];
      cl.assignment[r] = a;
      inertia += dist[r];
    }
    cl.inertia = inertia;
    cl.inertia_history.push_back(inertia);
    if (!changed || cl.iterations_run >= max_iterations) break;
    ++cl.iterations_run;

    Matrix sums(k, d, 0.0);
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t r = 0; r < n; ++r) {
      auto s = sums.row(cl.assignment[r]);
      auto row = x.row(r);
      for (std::size_t j = 0; j < d; ++j) s[j] += row[j];
      ++counts[cl.assignment[r]];
    }
    std::vector<bool> taken(n, false);
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] > 0) {
        for (std::size_t j = 0; j < d; ++j) cl.centroids(c, j) = sums(c, j) / static_cast<double>(counts[c]);
        continue;
      }
      // farthest point from its own (pre-update) centroid
      std::size_t far = 0;
      double far_d = -1.0;
      for (std::size_t r = 0; r < n; ++r)
        if (!taken[r] && dist[r] > far_d) {
          far_d = dist[r];
          far = r;
        }
      taken[far] = true;
      std::copy(x.row(far).begin(), x.row(far).end(), cl.centroids.row(c).begin());
    }
  }
  return cl;
}

}  // namespace nids

#pragma once

// Reference computations used by the unit and acceptance suites. They favour
// obviousness over speed and share no code with the library beyond Rng.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "nids/cnn.hpp"
#include "nids/dataset.hpp"
#include "nids/matrix.hpp"
#include "nids/random.hpp"

namespace oracle {

// Entropy in bits from a frequency table; probabilities summed smallest first.
template <class Key>
double entropy(const std::map<Key, std::size_t>& freq, std::size_t n) {
  std::vector<std::size_t> c;
  for (const auto& kv : freq) c.push_back(kv.second);
  std::sort(c.begin(), c.end());
  double h = 0.0;
  for (auto v : c) {
    const double p = double(v) / double(n);
    h += -p * std::log2(p);
  }
  return h;
}

inline double su(const std::vector<int>& x, const std::vector<int>& y) {
  std::map<int, std::size_t> fx, fy;
  std::map<std::pair<int, int>, std::size_t> fxy;
  for (std::size_t i = 0; i < x.size(); ++i) {
    fx[x[i]]++;
    fy[y[i]]++;
    fxy[{x[i], y[i]}]++;
  }
  const double hx = entropy(fx, x.size()), hy = entropy(fy, x.size());
  if (hx + hy == 0.0) return 0.0;
  const double ig = hx + hy - entropy(fxy, x.size());
  double v = 2.0 * ig / (hx + hy);
  if (v < 1e-12) v = 0.0;
  if (v > 1.0 - 1e-12) v = 1.0;
  return v;
}

// Mutual information as sum p(x,y) log p(x,y)/(p(x)p(y)); a second route to SU.
inline double su_by_mutual_information(const std::vector<int>& x, const std::vector<int>& y) {
  std::map<int, std::size_t> cx, cy;
  std::map<std::pair<int, int>, std::size_t> cxy;
  for (std::size_t i = 0; i < x.size(); ++i) {
    cx[x[i]]++;
    cy[y[i]]++;
    cxy[{x[i], y[i]}]++;
  }
  const double n = double(x.size());
  double hx = 0, hy = 0, mi = 0;
  for (auto& [k, c] : cx) hx -= c / n * std::log2(c / n);
  for (auto& [k, c] : cy) hy -= c / n * std::log2(c / n);
  for (auto& [k, c] : cxy) mi += c / n * std::log2(c * n / (double(cx[k.first]) * double(cy[k.second])));
  if (hx + hy == 0) return 0.0;
  return 2 * mi / (hx + hy);
}

// Feature selection walked literally: rank by SU with the class, then repeatedly
// take the head of the list, keep it if above threshold, and strike everything
// it dominates.
inline std::vector<std::size_t> fcbf_reference(const std::vector<std::vector<int>>& cols, const std::vector<int>& y,
                                               double threshold) {
  std::vector<double> rel(cols.size());
  for (std::size_t f = 0; f < cols.size(); ++f) rel[f] = su(cols[f], y);
  std::vector<std::size_t> list(cols.size());
  std::iota(list.begin(), list.end(), 0);
  std::stable_sort(list.begin(), list.end(), [&](auto a, auto b) { return rel[a] > rel[b]; });

  std::vector<std::size_t> picked;
  while (!list.empty()) {
    const std::size_t f = list.front();
    list.erase(list.begin());
    if (!(rel[f] > threshold)) continue;
    picked.push_back(f);
    std::vector<std::size_t> keep;
    for (auto g : list)
      if (!(su(cols[f], cols[g]) >= rel[g] - 1e-12)) keep.push_back(g);
    list = keep;
  }
  return picked;
}

// One-vs-rest counts by classifying every (true, pred) outcome of the matrix.
struct Counts {
  std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
};

inline Counts one_vs_rest(const std::vector<std::vector<std::size_t>>& cm, std::size_t c) {
  Counts k;
  for (std::size_t t = 0; t < cm.size(); ++t)
    for (std::size_t p = 0; p < cm.size(); ++p)
      for (std::size_t n = 0; n < cm[t][p]; ++n) {
        if (t == c && p == c)
          k.tp++;
        else if (t != c && p == c)
          k.fp++;
        else if (t == c && p != c)
          k.fn++;
        else
          k.tn++;
      }
  return k;
}

// Neighbour table by sorting every (distance, index) pair.
inline std::vector<std::vector<std::size_t>> knn_table(const nids::Matrix& x, std::size_t k) {
  std::vector<std::vector<std::size_t>> t(x.rows());
  for (std::size_t i = 0; i < x.rows(); ++i) {
    std::vector<std::pair<double, std::size_t>> all;
    for (std::size_t j = 0; j < x.rows(); ++j) {
      if (j == i) continue;
      double d = 0;
      for (std::size_t c = 0; c < x.cols(); ++c) d += (x(i, c) - x(j, c)) * (x(i, c) - x(j, c));
      all.push_back({d, j});
    }
    std::sort(all.begin(), all.end());
    for (std::size_t n = 0; n < std::min(k, all.size()); ++n) t[i].push_back(all[n].second);
  }
  return t;
}

// SMOTE replayed with the documented draw order: base row, neighbour slot, weight.
inline nids::Matrix smote_walk(const nids::Matrix& minority, std::size_t n, std::size_t k, std::uint64_t seed) {
  const auto table = knn_table(minority, k);
  nids::Rng rng(seed);
  nids::Matrix out(n, minority.cols());
  for (std::size_t s = 0; s < n; ++s) {
    const auto base = rng.index(minority.rows());
    const auto other = table[base][rng.index(table[base].size())];
    const double u = rng.uniform();
    for (std::size_t c = 0; c < minority.cols(); ++c)
      out(s, c) = minority(base, c) + u * (minority(other, c) - minority(base, c));
  }
  return out;
}

// Central differences of the mean batch loss with respect to every weight.
inline std::vector<double> numeric_gradient(nids::CnnModel m, const nids::Matrix& x, const nids::Matrix& y,
                                            const nids::Matrix* mask, double h) {
  std::vector<double> g(m.parameter_count());
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double w = m.weights()[i];
    m.weights()[i] = w + h;
    const double up = nids::loss_and_gradients(m, x, y, mask).loss;
    m.weights()[i] = w - h;
    const double down = nids::loss_and_gradients(m, x, y, mask).loss;
    m.weights()[i] = w;
    g[i] = (up - down) / (2 * h);
  }
  return g;
}

// Binary logistic regression by full-batch gradient descent; returns accuracy on `test`.
inline double logistic_accuracy(const nids::Dataset& train, const nids::Dataset& test, int iters = 5000) {
  const std::size_t d = train.cols();
  std::vector<double> w(d + 1, 0.0);
  auto z = [&](const nids::Dataset& s, std::size_t r) {
    double v = w[d];
    for (std::size_t j = 0; j < d; ++j) v += w[j] * s.features(r, j);
    return v;
  };
  for (int it = 0; it < iters; ++it) {
    std::vector<double> g(d + 1, 0.0);
    for (std::size_t r = 0; r < train.rows(); ++r) {
      const double e = 1.0 / (1.0 + std::exp(-z(train, r))) - train.labels[r];
      for (std::size_t j = 0; j < d; ++j) g[j] += e * train.features(r, j);
      g[d] += e;
    }
    for (std::size_t j = 0; j <= d; ++j) w[j] -= 2.0 * g[j] / double(train.rows());
  }
  std::size_t ok = 0;
  for (std::size_t r = 0; r < test.rows(); ++r) ok += (z(test, r) > 0) == (test.labels[r] == 1);
  return double(ok) / double(test.rows());
}

inline double max_relative_error(const std::vector<double>& a, const std::vector<double>& b) {
  double worst = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double scale = std::max({std::abs(a[i]), std::abs(b[i]), 1e-6});
    worst = std::max(worst, std::abs(a[i] - b[i]) / scale);
  }
  return worst;
}

// Kolmogorov-Smirnov statistic of samples against uniform(lo, hi).
inline double ks_uniform(std::vector<double> s, double lo, double hi) {
  std::sort(s.begin(), s.end());
  const double n = double(s.size());
  double d = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const double f = (s[i] - lo) / (hi - lo);
    d = std::max({d, (i + 1) / n - f, f - i / n});
  }
  return d;
}

// P(X >= wins) for X ~ Binomial(n, 1/2).
inline double sign_test_p(std::size_t wins, std::size_t n) {
  double p = 0;
  for (std::size_t k = wins; k <= n; ++k) {
    double c = 1;
    for (std::size_t i = 0; i < k; ++i) c = c * double(n - i) / double(i + 1);
    p += c * std::pow(0.5, double(n));
  }
  return p;
}

inline nids::Dataset make_dataset(nids::Matrix x, std::vector<int> labels, std::size_t n_classes) {
  nids::Dataset d;
  std::vector<std::string> names;
  for (std::size_t c = 0; c < n_classes; ++c) names.push_back("c" + std::to_string(c));
  d.label_map = nids::LabelMap::from_names(names);
  for (std::size_t j = 0; j < x.cols(); ++j) d.feature_names.push_back("x" + std::to_string(j));
  for (std::size_t r = 0; r < x.rows(); ++r) d.provenance.push_back({std::int64_t(r), false});
  d.features = std::move(x);
  d.labels = std::move(labels);
  return d;
}

}  // namespace oracle

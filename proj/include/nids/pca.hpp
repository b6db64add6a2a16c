#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <variant>
#include <vector>

#include "json.hpp"
#include "nids/error.hpp"
#include "nids/matrix.hpp"

namespace nids {

struct PcaModel {
  std::vector<double> mean;
  Matrix components;  // n_components x n_cols, rows are unit eigenvectors
  std::vector<double> eigenvalues;
  std::vector<double> explained_variance_ratio;

  std::size_t n_components() const noexcept { return components.rows(); }
  std::size_t n_features() const noexcept { return mean.size(); }
  friend bool operator==(const PcaModel&, const PcaModel&) = default;
};

inline void to_json(nlohmann::json& j, const PcaModel& m) {
  j = {{"mean", m.mean},
       {"n_components", m.components.rows()},
       {"n_features", m.components.cols()},
       {"components", std::vector<double>(m.components.data().begin(), m.components.data().end())},
       {"eigenvalues", m.eigenvalues},
       {"explained_variance_ratio", m.explained_variance_ratio}};
}

inline void from_json(const nlohmann::json& j, PcaModel& m) {
  j.at("mean").get_to(m.mean);
  const auto k = j.at("n_components").get<std::size_t>();
  const auto d = j.at("n_features").get<std::size_t>();
  const auto flat = j.at("components").get<std::vector<double>>();
  if (flat.size() != k * d || m.mean.size() != d) throw DataError("PcaModel: inconsistent shapes");
  m.components = Matrix(k, d);
  std::copy(flat.begin(), flat.end(), m.components.data().begin());
  j.at("eigenvalues").get_to(m.eigenvalues);
  j.at("explained_variance_ratio").get_to(m.explained_variance_ratio);
}

// Either a fixed component count or the smallest count reaching a variance fraction.
struct ComponentCount {
  std::size_t value;
};
struct VarianceFraction {
  double value;
};
using PcaTarget = std::variant<ComponentCount, VarianceFraction>;

struct EigenResult {
  std::vector<double> values;  // descending
  Matrix vectors;              // row i pairs with values[i]
  int sweeps = 0;
};

// Cyclic Jacobi eigendecomposition of a symmetric matrix. Sweeps run in fixed
// (p, q) order until the largest off-diagonal magnitude is below tol.
inline EigenResult jacobi_eigen(Matrix a, double tol = 1e-10, int max_sweeps = 100) {
  const std::size_t n = a.rows();
  if (a.cols() != n) throw std::invalid_argument("jacobi_eigen: matrix must be square");
  Matrix v(n, n, 0.0);
  for (std::size_t i = 0; i < n; ++i) v(i, i) = 1.0;

  auto max_off = [&] {
    double m = 0.0;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) m = std::max(m, std::abs(a(p, q)));
    return m;
  };

  EigenResult res;
  while (res.sweeps < max_sweeps && max_off() >= tol) {
    ++res.sweeps;
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a(k, p), akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a(p, k), aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        a(p, q) = a(q, p) = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
          const double vkp = v(k, p), vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](auto x, auto y) { return a(x, x) > a(y, y); });
  res.values.resize(n);
  res.vectors = Matrix(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    res.values[i] = a(order[i], order[i]);
    for (std::size_t k = 0; k < n; ++k) res.vectors(i, k) = v(k, order[i]);
  }
  return res;
}

// Sample covariance with 1/(n-1) normalization.
inline Matrix covariance(const Matrix& x, std::vector<double>* mean_out = nullptr) {
  const std::size_t n = x.rows(), d = x.cols();
  std::vector<double> mean(d, 0.0);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < d; ++c) mean[c] += x(r, c);
  for (auto& m : mean) m /= static_cast<double>(n);
  Matrix cov(d, d, 0.0);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t i = 0; i < d; ++i) {
      const double di = x(r, i) - mean[i];
      for (std::size_t j = i; j < d; ++j) cov(i, j) += di * (x(r, j) - mean[j]);
    }
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = i; j < d; ++j) cov(j, i) = cov(i, j) /= static_cast<double>(n - 1);
  if (mean_out) *mean_out = std::move(mean);
  return cov;
}

inline PcaModel fit_pca(const Matrix& x, PcaTarget target = VarianceFraction{0.95}) {
  if (x.rows() < 2) throw DataError("fit_pca: need at least 2 rows");
  const std::size_t d = x.cols();
  if (const auto* k = std::get_if<ComponentCount>(&target); k && (k->value == 0 || k->value > d))
    throw ConfigError("fit_pca: n_components must be in [1, " + std::to_string(d) + "]");
  if (const auto* f = std::get_if<VarianceFraction>(&target); f && !(f->value > 0.0 && f->value <= 1.0))
    throw ConfigError("fit_pca: variance fraction must be in (0, 1]");

  PcaModel m;
  const Matrix cov = covariance(x, &m.mean);
  double trace = 0.0;
  for (std::size_t i = 0; i < d; ++i) trace += cov(i, i);
  auto eig = jacobi_eigen(cov);
  for (auto& v : eig.values) v = std::max(v, 0.0);

  std::vector<double> ratio(d, 0.0);
  if (trace > 0.0)
    for (std::size_t i = 0; i < d; ++i) ratio[i] = eig.values[i] / trace;

  std::size_t k = 1;
  if (const auto* kc = std::get_if<ComponentCount>(&target)) {
    k = kc->value;
  } else if (trace > 0.0) {
    const double want = std::get<VarianceFraction>(target).value;
    double cum = 0.0;
    for (k = 1; k <= d; ++k) {
      cum += ratio[k - 1];
      // tolerance absorbs rounding in the cumulative sum of ratios
      if (cum >= want - 1e-12) break;
    }
    k = std::min(k, d);
  }

  m.components = Matrix(k, d);
  for (std::size_t i = 0; i < k; ++i) {
    auto row = eig.vectors.row(i);
    std::size_t big = 0;
    for (std::size_t j = 1; j < d; ++j)
      if (std::abs(row[j]) > std::abs(row[big])) big = j;
    const double sign = row[big] < 0.0 ? -1.0 : 1.0;
    for (std::size_t j = 0; j < d; ++j) m.components(i, j) = sign * row[j];
  }
  m.eigenvalues.assign(eig.values.begin(), eig.values.begin() + static_cast<std::ptrdiff_t>(k));
  m.explained_variance_ratio.assign(ratio.begin(), ratio.begin() + static_cast<std::ptrdiff_t>(k));
  return m;
}

inline Matrix transform(const Matrix& x, const PcaModel& m) {
  if (x.cols() != m.n_features())
    throw DataError("pca transform: expected " + std::to_string(m.n_features()) + " columns, got " +
                    std::to_string(x.cols()));
  const std::size_t k = m.n_components(), d = m.n_features();
  Matrix out(x.rows(), k, 0.0);
  for (std::size_t r = 0; r < x.rows(); ++r)
    for (std::size_t i = 0; i < k; ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < d; ++j) s += (x(r, j) - m.mean[j]) * m.components(i, j);
      out(r, i) = s;
    }
  return out;
}

inline Matrix inverse_transform(const Matrix& scores, const PcaModel& m) {
  if (scores.cols() != m.n_components())
    throw DataError("pca inverse_transform: expected " + std::to_string(m.n_components()) + " columns, got " +
                    std::to_string(scores.cols()));
  const std::size_t k = m.n_components(), d = m.n_features();
  Matrix out(scores.rows(), d);
  for (std::size_t r = 0; r < scores.rows(); ++r)
    for (std::size_t j = 0; j < d; ++j) {
      double s = m.mean[j];
      for (std::size_t i = 0; i < k; ++i) s += scores(r, i) * m.components(i, j);
      out(r, j) = s;
    }
  return out;
}

inline std::vector<std::string> component_names(std::size_t k) {
  std::vector<std::string> names;
  for (std::size_t i = 0; i < k; ++i) names.push_back("pc" + std::to_string(i + 1));
  return names;
}

}  // namespace nids

#include <gtest/gtest.h>

#include <cmath>

#include "nids/pca.hpp"
#include "nids/random.hpp"

using namespace nids;

namespace {

double max_offdiag_gram_error(const Matrix& c) {
  double worst = 0;
  for (std::size_t i = 0; i < c.rows(); ++i)
    for (std::size_t j = 0; j < c.rows(); ++j) {
      double dot = 0;
      for (std::size_t k = 0; k < c.cols(); ++k) dot += c(i, k) * c(j, k);
      worst = std::max(worst, std::abs(dot - (i == j ? 1.0 : 0.0)));
    }
  return worst;
}

Matrix random_matrix(Rng& rng, std::size_t n, std::size_t d) {
  Matrix x(n, d);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < d; ++c) x(r, c) = rng.normal() * double(c + 1) + (c ? 0.5 * x(r, c - 1) : 0.0);
  return x;
}

}  // namespace

TEST(Pca, TwoByTwoEigenvalues) {
  // covariance [[2,1],[1,2]]: lambda^2 - 4 lambda + 3 = 0
  const Matrix x{{2, 1}, {-1, 1}, {-1, -2}, {0, 0}};
  const auto m = fit_pca(x, ComponentCount{2});
  EXPECT_NEAR(m.eigenvalues[0], 3.0, 1e-9);
  EXPECT_NEAR(m.eigenvalues[1], 1.0, 1e-9);
  EXPECT_NEAR(m.components(0, 0), 1 / std::sqrt(2.0), 1e-9);
  EXPECT_NEAR(m.components(0, 1), 1 / std::sqrt(2.0), 1e-9);
}

TEST(Pca, CollinearData) {
  const Matrix x{{0, 0}, {1, 2}, {2, 4}};
  const auto m = fit_pca(x, ComponentCount{2});
  EXPECT_NEAR(m.explained_variance_ratio[0], 1.0, 1e-10);
  EXPECT_NEAR(m.eigenvalues[1], 0.0, 1e-10);
  const auto one = fit_pca(x, ComponentCount{1});
  const auto s = transform(x, one);
  EXPECT_NEAR(s(0, 0), -std::sqrt(5.0), 1e-9);
  EXPECT_NEAR(s(1, 0), 0.0, 1e-9);
  EXPECT_NEAR(s(2, 0), std::sqrt(5.0), 1e-9);
  const auto back = inverse_transform(s, one);
  for (std::size_t i = 0; i < x.data().size(); ++i) EXPECT_NEAR(back.data()[i], x.data()[i], 1e-9);
  EXPECT_EQ(fit_pca(x).n_components(), 1u);
}

TEST(Pca, IsotropicCase) {
  const double r = std::sqrt(3.0);
  const Matrix x{{r, 0}, {-r, 0}, {0, r}, {0, -r}};
  const auto m = fit_pca(x, ComponentCount{2});
  EXPECT_NEAR(m.eigenvalues[0], 2.0, 1e-12);
  EXPECT_NEAR(m.eigenvalues[1], 2.0, 1e-12);
  EXPECT_NEAR(m.explained_variance_ratio[0], 0.5, 1e-12);
  EXPECT_NEAR(m.explained_variance_ratio[1], 0.5, 1e-12);
  EXPECT_LT(max_offdiag_gram_error(m.components), 1e-8);
}

TEST(Pca, TransformBasics) {
  Rng rng(4);
  const Matrix x = random_matrix(rng, 30, 4);
  const auto m = fit_pca(x, ComponentCount{4});
  Matrix mean_row(1, 4);
  std::copy(m.mean.begin(), m.mean.end(), mean_row.row(0).begin());
  const auto centred = transform(mean_row, m);
  for (double v : centred.row(0)) EXPECT_NEAR(v, 0.0, 1e-12);
  const auto back = inverse_transform(Matrix(1, 4, 0.0), m);
  for (std::size_t j = 0; j < 4; ++j) EXPECT_NEAR(back(0, j), m.mean[j], 1e-12);
  const auto round = inverse_transform(transform(x, m), m);
  for (std::size_t i = 0; i < x.data().size(); ++i) EXPECT_NEAR(round.data()[i], x.data()[i], 1e-9);

  PcaModel id;
  id.mean = {0, 0, 0};
  id.components = Matrix{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}};
  EXPECT_EQ(transform(Matrix{{1, 2, 3}}, id), (Matrix{{1, 2, 3}}));
  EXPECT_THROW(transform(Matrix{{1, 2}}, id), DataError);
  EXPECT_THROW(inverse_transform(Matrix{{1, 2}}, id), DataError);
}

TEST(Pca, Properties) {
  Rng rng(12);
  for (int t = 0; t < 10; ++t) {
    const std::size_t d = 2 + rng.index(6);
    const Matrix x = random_matrix(rng, 20 + rng.index(40), d);
    const auto full = fit_pca(x, ComponentCount{d});
    EXPECT_LT(max_offdiag_gram_error(full.components), 1e-8);
    const Matrix cov = covariance(x);
    double trace = 0, sum = 0;
    for (std::size_t i = 0; i < d; ++i) trace += cov(i, i);
    for (double v : full.eigenvalues) sum += v;
    EXPECT_NEAR(sum, trace, 1e-9 * std::max(1.0, trace));
    for (std::size_t i = 1; i < d; ++i) EXPECT_GE(full.eigenvalues[i - 1], full.eigenvalues[i]);

    const auto scores = transform(x, full);
    const Matrix sc = covariance(scores);
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = 0; j < d; ++j)
        if (i != j) EXPECT_NEAR(sc(i, j), 0.0, 1e-8 * std::max(1.0, trace));

    double previous = INFINITY;
    for (std::size_t k = 1; k <= d; ++k) {
      const auto m = fit_pca(x, ComponentCount{k});
      const auto back = inverse_transform(transform(x, m), m);
      double err = 0;
      for (std::size_t i = 0; i < x.data().size(); ++i) err += std::pow(back.data()[i] - x.data()[i], 2);
      err /= double(x.rows());
      EXPECT_LE(err, previous + 1e-9);
      previous = err;
    }
    for (std::size_t i = 0; i < full.n_components(); ++i) {
      auto row = full.components.row(i);
      std::size_t big = 0;
      for (std::size_t j = 1; j < d; ++j)
        if (std::abs(row[j]) > std::abs(row[big])) big = j;
      EXPECT_GT(row[big], 0.0);
    }
    EXPECT_EQ(fit_pca(x, ComponentCount{d}).components, full.components);
  }
}

TEST(Pca, VarianceFractionPicksSmallestK) {
  Rng rng(3);
  const Matrix x = random_matrix(rng, 100, 5);
  const auto full = fit_pca(x, ComponentCount{5});
  const auto m = fit_pca(x, VarianceFraction{0.9});
  double cum = 0;
  for (std::size_t i = 0; i + 1 < m.n_components(); ++i) cum += full.explained_variance_ratio[i];
  EXPECT_LT(cum, 0.9);
  EXPECT_GE(cum + full.explained_variance_ratio[m.n_components() - 1], 0.9 - 1e-12);
}

TEST(Pca, Errors) {
  EXPECT_THROW(fit_pca(Matrix{{1, 2}}), DataError);
  EXPECT_THROW(fit_pca(Matrix{{1, 2}, {3, 4}}, ComponentCount{3}), ConfigError);
  EXPECT_THROW(fit_pca(Matrix{{1, 2}, {3, 4}}, VarianceFraction{0.0}), ConfigError);
  EXPECT_THROW(fit_pca(Matrix{{1, 2}, {3, 4}}, VarianceFraction{1.5}), ConfigError);
}

TEST(Pca, JsonRoundTrip) {
  const auto m = fit_pca(Matrix{{2, 1}, {-1, 1}, {-1, -2}, {0, 0}}, ComponentCount{2});
  const nlohmann::json j = m;
  const auto back = j.get<PcaModel>();
  EXPECT_EQ(back.components, m.components);
  EXPECT_EQ(back.mean, m.mean);
  EXPECT_EQ(back.eigenvalues, m.eigenvalues);
}

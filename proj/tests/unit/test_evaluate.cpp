#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>

#include "nids/evaluate.hpp"
#include "nids/random.hpp"
#include "oracles.hpp"

using namespace nids;

namespace {

ConfusionMatrix from_counts(std::vector<std::vector<std::size_t>> counts) {
  ConfusionMatrix cm;
  for (std::size_t c = 0; c < counts.size(); ++c) cm.class_names.push_back("k" + std::to_string(c));
  cm.counts = std::move(counts);
  return cm;
}

ConfusionMatrix random_cm(Rng& rng) {
  const std::size_t k = 2 + rng.index(5);
  std::vector<std::vector<std::size_t>> c(k, std::vector<std::size_t>(k));
  for (auto& r : c)
    for (auto& v : r) v = rng.index(4) == 0 ? 0 : rng.index(30);
  c[0][0] += 1;
  return from_counts(c);
}

}  // namespace

TEST(Confusion, CountsPairs) {
  const std::vector<int> t{0, 0, 1, 2, 2, 2}, p{0, 1, 1, 2, 0, 2};
  const auto cm = confusion(t, p, 3);
  EXPECT_EQ(cm.counts, (std::vector<std::vector<std::size_t>>{{1, 1, 0}, {0, 1, 0}, {1, 0, 2}}));
  EXPECT_EQ(cm.class_names[2], "class_2");
  EXPECT_EQ(cm.total(), 6u);
  const std::vector<int> bad{0, 3};
  EXPECT_ANY_THROW(confusion(bad, bad, 3));
}

TEST(Metrics, Perfect) {
  const auto m = metrics(from_counts({{4, 0}, {0, 6}}));
  EXPECT_DOUBLE_EQ(m.macro.f1, 1.0);
  EXPECT_DOUBLE_EQ(m.macro.accuracy, 1.0);
  EXPECT_DOUBLE_EQ(m.micro_accuracy, 1.0);
  EXPECT_FALSE(m.macro.zero_division);
}

TEST(Metrics, BinaryHalfPrecision) {
  // class 1: tp 2, fp 2, fn 0
  const auto m = metrics(from_counts({{2, 2}, {0, 2}}));
  EXPECT_DOUBLE_EQ(m.per_class[1].precision, 0.5);
  EXPECT_DOUBLE_EQ(m.per_class[1].recall, 1.0);
  EXPECT_NEAR(m.per_class[1].f1, 2.0 / 3.0, 1e-12);
  EXPECT_DOUBLE_EQ(m.per_class[0].recall, 0.5);
}

TEST(Metrics, ThreeClassByHand) {
  const auto cm = from_counts({{5, 1, 0}, {2, 3, 0}, {0, 0, 4}});
  const auto m = metrics(cm);
  EXPECT_NEAR(m.per_class[0].precision, 5.0 / 7.0, 1e-12);
  EXPECT_NEAR(m.per_class[0].recall, 5.0 / 6.0, 1e-12);
  EXPECT_NEAR(m.per_class[0].accuracy, 12.0 / 15.0, 1e-12);
  EXPECT_NEAR(m.per_class[1].precision, 3.0 / 4.0, 1e-12);
  EXPECT_NEAR(m.per_class[1].recall, 3.0 / 5.0, 1e-12);
  EXPECT_DOUBLE_EQ(m.per_class[2].f1, 1.0);
  EXPECT_NEAR(m.micro_accuracy, 12.0 / 15.0, 1e-12);
  for (std::size_t c = 0; c < 3; ++c) {
    const auto o = one_vs_rest(cm, c);
    const auto r = oracle::one_vs_rest(cm.counts, c);
    EXPECT_EQ(o.tp, r.tp);
    EXPECT_EQ(o.fp, r.fp);
    EXPECT_EQ(o.fn, r.fn);
    EXPECT_EQ(o.tn, r.tn);
  }
}

TEST(Metrics, NeverPredictedClassFlagsZeroDivision) {
  const auto m = metrics(from_counts({{3, 0}, {2, 0}}));
  EXPECT_TRUE(m.per_class[1].zero_division);
  EXPECT_EQ(m.per_class[1].precision, 0.0);
  EXPECT_EQ(m.per_class[1].f1, 0.0);
  EXPECT_TRUE(m.macro.zero_division);
}

TEST(Metrics, EmptyThrows) {
  EXPECT_THROW(metrics(from_counts({{0, 0}, {0, 0}})), DataError);
  EXPECT_THROW(metrics(ConfusionMatrix{}), DataError);
}

TEST(MetricsProperty, RandomMatrices) {
  Rng rng(5);
  for (int t = 0; t < 500; ++t) {
    const auto cm = random_cm(rng);
    const auto m = metrics(cm);
    const std::size_t k = cm.n_classes();
    double trace = 0, macro = 0;
    for (std::size_t c = 0; c < k; ++c) {
      const auto o = one_vs_rest(cm, c);
      const auto r = oracle::one_vs_rest(cm.counts, c);
      ASSERT_EQ(o.tp + o.fp + o.fn + o.tn, cm.total());
      ASSERT_EQ(o.tp, r.tp);
      ASSERT_EQ(o.fp, r.fp);
      ASSERT_EQ(o.fn, r.fn);
      ASSERT_EQ(o.tn, r.tn);
      const auto& row = m.per_class[c];
      ASSERT_GE(row.f1, 0.0);
      ASSERT_LE(row.f1, 1.0);
      ASSERT_LE(row.f1, std::max(row.precision, row.recall) + 1e-12);
      ASSERT_GE(row.f1, std::min(row.precision, row.recall) - 1e-12);
      trace += double(cm.counts[c][c]);
      macro += row.f1;
    }
    ASSERT_NEAR(m.micro_accuracy, trace / double(cm.total()), 1e-12);
    ASSERT_NEAR(m.macro.f1, macro / double(k), 1e-12);

    // relabelling classes permutes the per-class rows and leaves macro values alone
    std::vector<std::size_t> perm(k);
    std::iota(perm.begin(), perm.end(), 0);
    rng.shuffle(perm);
    auto pc = cm;
    for (std::size_t i = 0; i < k; ++i)
      for (std::size_t j = 0; j < k; ++j) pc.counts[perm[i]][perm[j]] = cm.counts[i][j];
    const auto pm = metrics(pc);
    ASSERT_NEAR(pm.macro.f1, m.macro.f1, 1e-12);
    ASSERT_NEAR(pm.macro.precision, m.macro.precision, 1e-12);
    for (std::size_t i = 0; i < k; ++i) ASSERT_NEAR(pm.per_class[perm[i]].recall, m.per_class[i].recall, 1e-12);
  }
}

TEST(Report, TablesAndComparison) {
  ModelResult a{"random_forest", metrics(from_counts({{5, 1, 0}, {2, 3, 0}, {0, 0, 4}})), 1.25};
  ModelResult b{"random_forest", metrics(from_counts({{6, 0, 0}, {1, 4, 0}, {0, 0, 4}})), 2.5};
  const auto rep = render_report({a}, HpoComparison{a, b}, {{"balance_order", "after_split"}});
  EXPECT_NE(rep.text.find("Average"), std::string::npos);
  EXPECT_NE(rep.text.find("W/oHOP"), std::string::npos);
  EXPECT_NE(rep.text.find("W/HOP"), std::string::npos);
  EXPECT_NE(rep.text.find("80.00%"), std::string::npos);
  EXPECT_EQ(rep.json["balance_order"], "after_split");
  EXPECT_NEAR(rep.json["comparison"]["W/HOP"]["accuracy"].get<double>(), 14.0 / 15.0, 1e-12);
  EXPECT_EQ(rep.json["models"].size(), 1u);
  EXPECT_THROW(render_report({}), std::invalid_argument);
}

TEST(Report, FootnoteForZeroDivision) {
  ModelResult a{"cnn", metrics(from_counts({{3, 0}, {2, 0}})), 0.0};
  const auto rep = render_report({a});
  EXPECT_NE(rep.text.find("k1 *"), std::string::npos);
  EXPECT_NE(rep.text.find("zero denominator"), std::string::npos);
}

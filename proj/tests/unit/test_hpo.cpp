#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "nids/tpe.hpp"
#include "oracles.hpp"

using namespace nids;
using namespace nids::hpo;

namespace {

SearchSpace line() { return {{{"x", Uniform{0, 10}}}}; }

double parabola(const Config& c) {
  const double x = as_double(c.at("x"));
  return -(x - 3) * (x - 3);
}

TrialHistory history_from(const SearchSpace& space, std::size_t n, std::uint64_t seed, const Objective& f) {
  TrialHistory h;
  Rng rng(seed);
  for (std::size_t i = 0; i < n; ++i) {
    auto c = sample_uniform(space, rng);
    const double s = f(c);
    h.trials.push_back({i, std::move(c), s, 0.0});
  }
  return h;
}

SearchSpace random_space(Rng& rng) {
  SearchSpace s;
  const std::size_t n = 1 + rng.index(4);
  for (std::size_t i = 0; i < n; ++i) {
    const std::string name = "d" + std::to_string(i);
    const double lo = rng.uniform(-5, 5);
    switch (rng.index(4)) {
      case 0: s.dimensions.push_back({name, Uniform{lo, lo + rng.uniform(0.01, 10)}}); break;
      case 1: s.dimensions.push_back({name, LogUniform{std::exp(lo), std::exp(lo) * rng.uniform(1.5, 1e3)}}); break;
      case 2: {
        const auto a = std::int64_t(rng.index(10)) - 5;
        s.dimensions.push_back({name, IntegerRange{a, a + std::int64_t(rng.index(6))}});
        break;
      }
      default: s.dimensions.push_back({name, Categorical{{"p", "q", "r"}}}); break;
    }
  }
  return s;
}

}  // namespace

TEST(SampleUniform, Domains) {
  SearchSpace s{{{"u", Uniform{0, 1}}, {"l", LogUniform{1e-4, 1e-1}}, {"i", IntegerRange{3, 3}}, {"c", Categorical{{"a"}}}}};
  Rng rng(1);
  std::vector<double> logs;
  for (int t = 0; t < 10000; ++t) {
    const auto c = sample_uniform(s, rng);
    const double u = as_double(c.at("u"));
    ASSERT_GE(u, 0.0);
    ASSERT_LE(u, 1.0);
    EXPECT_EQ(as_int(c.at("i")), 3);
    EXPECT_EQ(as_string(c.at("c")), "a");
    logs.push_back(std::log10(as_double(c.at("l"))));
  }
  // KS critical value at alpha 0.01 is about 1.628 / sqrt(n)
  EXPECT_LT(oracle::ks_uniform(logs, -4, -1), 1.628 / std::sqrt(10000.0));
}

TEST(SearchSpaceChecks, Validation) {
  EXPECT_THROW((SearchSpace{{{"a", Uniform{1, 1}}}}.validate()), ConfigError);
  EXPECT_THROW((SearchSpace{{{"a", LogUniform{0, 1}}}}.validate()), ConfigError);
  EXPECT_THROW((SearchSpace{{{"a", Categorical{{}}}}}.validate()), ConfigError);
  EXPECT_THROW((SearchSpace{{{"a", Uniform{0, 1}}, {"a", Uniform{0, 1}}}}.validate()), ConfigError);
  EXPECT_NO_THROW((SearchSpace{{{"a", IntegerRange{2, 2}}}}.validate()));
}

TEST(Suggest, EmptyHistoryIsUniformDraw) {
  TpeConfig cfg;
  cfg.seed = 4;
  const auto c = suggest({}, line(), cfg);
  Rng rng(derive_seed(4, "tpe-suggest", 0));
  EXPECT_EQ(c, sample_uniform(line(), rng));
}

TEST(Suggest, MovesTowardOptimum) {
  // mean |x-3| for x ~ U(0,10) is (9 + 49) / 20 = 2.9
  double total = 0;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const auto h = history_from(line(), 20, seed, parabola);
    TpeConfig cfg;
    cfg.seed = seed;
    total += std::abs(as_double(suggest(h, line(), cfg).at("x")) - 3);
  }
  EXPECT_LT(total / 50, 2.9);
}

TEST(Suggest, CategoricalFollowsGoodSet) {
  const SearchSpace s{{{"c", Categorical{{"a", "b"}}}}};
  int hits = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    TrialHistory h;
    for (std::size_t i = 0; i < 20; ++i) {
      const bool good = i < 5;
      h.trials.push_back({i, {{"c", std::string(good ? "a" : "b")}}, good ? 1.0 : 0.0, 0.0});
    }
    TpeConfig cfg;
    cfg.seed = seed;
    hits += as_string(suggest(h, s, cfg).at("c")) == "a";
  }
  EXPECT_GT(hits, 90);
}

TEST(Suggest, FuzzedSpacesStayInBounds) {
  Rng rng(9);
  for (int t = 0; t < 100; ++t) {
    const auto space = random_space(rng);
    space.validate();
    const bool flat = rng.index(3) == 0;
    const auto h = history_from(space, 5 + rng.index(20), rng.next(), [&](const Config& c) {
      if (flat) return 1.0;
      double s = 0;
      for (const auto& [k, v] : c) s += std::holds_alternative<std::string>(v) ? 0.3 : std::sin(as_double(v));
      return s;
    });
    TpeConfig cfg;
    cfg.seed = rng.next();
    cfg.n_startup = 3;
    const auto c = suggest(h, space, cfg);
    EXPECT_TRUE(conforms(c, space));
  }
}

TEST(Optimize, ParabolaOptimum) {
  int close = 0;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    TpeConfig cfg;
    cfg.seed = seed;
    cfg.n_startup = 15;
    const auto r = optimize(parabola, line(), 60, cfg);
    close += std::abs(as_double(r.best_config.at("x")) - 3) <= 0.5;
  }
  EXPECT_GE(close, 45);
}

TEST(Optimize, BudgetOneAndConstant) {
  TpeConfig cfg;
  cfg.seed = 2;
  const auto one = optimize(parabola, line(), 1, cfg);
  ASSERT_EQ(one.history.size(), 1u);
  Rng rng(derive_seed(2, "tpe-suggest", 0));
  EXPECT_EQ(one.best_config, sample_uniform(line(), rng));

  const auto flat = optimize([](const Config&) { return 7.0; }, line(), 25, cfg);
  EXPECT_EQ(flat.best_score, 7.0);
  for (const auto& t : flat.history.trials) EXPECT_TRUE(conforms(t.config, line()));
  EXPECT_THROW(optimize(parabola, line(), 0, cfg), ConfigError);
}

TEST(Optimize, FailuresScoreNegativeInfinity) {
  TpeConfig cfg;
  cfg.seed = 3;
  const auto r = optimize(
      [](const Config& c) -> double {
        const double x = as_double(c.at("x"));
        if (x > 5) throw std::runtime_error("diverged");
        return x < 1 ? std::nan("") : x;
      },
      line(), 30, cfg);
  double best = -INFINITY;
  for (const auto& t : r.history.trials) {
    const double x = as_double(t.config.at("x"));
    if (x > 5 || x < 1) EXPECT_EQ(t.score, -INFINITY);
    best = std::max(best, t.score);
  }
  EXPECT_EQ(r.best_score, best);
}

TEST(Optimize, DeterministicAndResumable) {
  const SearchSpace s{{{"x", Uniform{0, 10}}, {"n", IntegerRange{1, 5}}, {"k", Categorical{{"a", "b", "c"}}}}};
  auto f = [](const Config& c) {
    return -std::pow(as_double(c.at("x")) - 3, 2) - double(as_int(c.at("n"))) + (as_string(c.at("k")) == "b");
  };
  TpeConfig cfg;
  cfg.seed = 77;
  const auto a = optimize(f, s, 30, cfg);
  const auto b = optimize(f, s, 30, cfg);
  EXPECT_EQ(a.best_config, b.best_config);

  std::ostringstream out;
  write_history(out, optimize(f, s, 18, cfg).history);
  std::istringstream in(out.str());
  const auto resumed = optimize(f, s, 30, cfg, {}, read_history(in));
  ASSERT_EQ(resumed.history.size(), 30u);
  for (std::size_t i = 0; i < 30; ++i) {
    EXPECT_EQ(resumed.history.trials[i].config, a.history.trials[i].config);
    EXPECT_EQ(resumed.history.trials[i].index, i);
  }
}

TEST(Optimize, SphereBeatsRandomSearch) {
  const SearchSpace s{{{"x", Uniform{-5, 5}}, {"y", Uniform{-5, 5}}}};
  auto sphere = [](const Config& c) {
    const double x = as_double(c.at("x")), y = as_double(c.at("y"));
    return -(x * x + y * y);
  };
  std::size_t wins = 0, trials = 0;
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    TpeConfig cfg;
    cfg.seed = seed;
    const double tpe = optimize(sphere, s, 60, cfg).best_score;
    const double rnd = random_search(sphere, s, 60, seed + 1000).best_score;
    if (tpe == rnd) continue;
    ++trials;
    wins += tpe > rnd;
  }
  EXPECT_LT(oracle::sign_test_p(wins, trials), 0.05) << wins << "/" << trials;
}

TEST(HistoryFile, JsonLines) {
  TrialHistory h;
  h.trials.push_back({0, {{"x", 1.5}, {"n", std::int64_t(3)}, {"k", std::string("a")}}, 0.25, 0.1});
  h.trials.push_back({1, {{"x", 2.0}, {"n", std::int64_t(4)}, {"k", std::string("b")}}, -INFINITY, 0.2});
  std::ostringstream out;
  write_history(out, h);
  EXPECT_NE(out.str().find("null"), std::string::npos);
  std::istringstream in(out.str());
  const auto back = read_history(in);
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back.trials[0].config, h.trials[0].config);
  EXPECT_EQ(back.trials[1].score, -INFINITY);

  const SearchSpace s{{{"x", Uniform{0, 1}}, {"l", LogUniform{1e-3, 1}}, {"n", IntegerRange{1, 4}}, {"k", Categorical{{"a", "b"}}}}};
  const auto js = space_to_json(s);
  EXPECT_EQ(space_to_json(space_from_json(js)), js);
}

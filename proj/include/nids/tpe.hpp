#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <istream>
#include <limits>
#include <map>
#include <numbers>
#include <ostream>
#include <set>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"
#include "nids/error.hpp"
#include "nids/random.hpp"

namespace nids::hpo {

struct Uniform {
  double lo, hi;
};
struct LogUniform {
  double lo, hi;
};
struct IntegerRange {
  std::int64_t lo, hi;
};
struct Categorical {
  std::vector<std::string> choices;
};
using Domain = std::variant<Uniform, LogUniform, IntegerRange, Categorical>;

struct Dimension {
  std::string name;
  Domain domain;
};

struct SearchSpace {
  std::vector<Dimension> dimensions;

  void validate() const {
    std::set<std::string> names;
    for (const auto& d : dimensions) {
      if (!names.insert(d.name).second) throw ConfigError("search space: duplicate dimension '" + d.name + "'");
      std::visit(
          [&](const auto& dom) {
            using T = std::decay_t<decltype(dom)>;
            if constexpr (std::is_same_v<T, Categorical>) {
              if (dom.choices.empty()) throw ConfigError("search space: '" + d.name + "' has no choices");
            } else if constexpr (std::is_same_v<T, IntegerRange>) {
              if (dom.lo > dom.hi) throw ConfigError("search space: '" + d.name + "' needs lo <= hi");
            } else {
              if (!(dom.lo < dom.hi)) throw ConfigError("search space: '" + d.name + "' needs lo < hi");
              if constexpr (std::is_same_v<T, LogUniform>)
                if (!(dom.lo > 0.0)) throw ConfigError("search space: '" + d.name + "' needs lo > 0");
            }
          },
          d.domain);
    }
  }
};

using ParamValue = std::variant<double, std::int64_t, std::string>;
using Config = std::map<std::string, ParamValue>;

inline double as_double(const ParamValue& v) {
  if (const auto* d = std::get_if<double>(&v)) return *d;
  if (const auto* i = std::get_if<std::int64_t>(&v)) return static_cast<double>(*i);
  throw ConfigError("expected a numeric parameter value");
}

inline std::int64_t as_int(const ParamValue& v) {
  if (const auto* i = std::get_if<std::int64_t>(&v)) return *i;
  if (const auto* d = std::get_if<double>(&v)) return static_cast<std::int64_t>(std::llround(*d));
  throw ConfigError("expected an integer parameter value");
}

inline const std::string& as_string(const ParamValue& v) {
  if (const auto* s = std::get_if<std::string>(&v)) return *s;
  throw ConfigError("expected a categorical parameter value");
}

// True when every dimension has a value inside its domain.
inline bool conforms(const Config& c, const SearchSpace& space) {
  for (const auto& d : space.dimensions) {
    auto it = c.find(d.name);
    if (it == c.end()) return false;
    const bool ok = std::visit(
        [&](const auto& dom) {
          using T = std::decay_t<decltype(dom)>;
          if constexpr (std::is_same_v<T, Categorical>) {
            const auto* s = std::get_if<std::string>(&it->second);
            return s && std::find(dom.choices.begin(), dom.choices.end(), *s) != dom.choices.end();
          } else if constexpr (std::is_same_v<T, IntegerRange>) {
            const auto* i = std::get_if<std::int64_t>(&it->second);
            return i && *i >= dom.lo && *i <= dom.hi;
          } else {
            const auto* x = std::get_if<double>(&it->second);
            return x && *x >= dom.lo && *x <= dom.hi;
          }
        },
        d.domain);
    if (!ok) return false;
  }
  return true;
}

struct Trial {
  std::size_t index = 0;
  Config config;
  double score = -std::numeric_limits<double>::infinity();
  double seconds = 0.0;
};

struct TrialHistory {
  std::vector<Trial> trials;
  std::size_t size() const noexcept { return trials.size(); }
};

struct TpeConfig {
  double gamma = 0.25;
  std::size_t n_startup = 10;
  std::size_t n_candidates = 24;
  std::uint64_t seed = 0;

  void validate() const {
    if (!(gamma > 0.0 && gamma < 1.0)) throw ConfigError("tpe: gamma must be in (0,1)");
    if (n_candidates < 1) throw ConfigError("tpe: n_candidates must be >= 1");
  }
};

// Independent draw per dimension: uniform, log-uniform, inclusive integer, or uniform choice.
inline Config sample_uniform(const SearchSpace& space, Rng& rng) {
  Config c;
  for (const auto& d : space.dimensions) {
    c[d.name] = std::visit(
        [&](const auto& dom) -> ParamValue {
          using T = std::decay_t<decltype(dom)>;
          if constexpr (std::is_same_v<T, Uniform>) {
            return std::min(rng.uniform(dom.lo, dom.hi), dom.hi);
          } else if constexpr (std::is_same_v<T, LogUniform>) {
            return std::clamp(std::exp(rng.uniform(std::log(dom.lo), std::log(dom.hi))), dom.lo, dom.hi);
          } else if constexpr (std::is_same_v<T, IntegerRange>) {
            return rng.integer(dom.lo, dom.hi);
          } else {
            return dom.choices[rng.index(dom.choices.size())];
          }
        },
        d.domain);
  }
  return c;
}

namespace detail {

inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

// Parzen estimator on a bounded interval: one truncated Gaussian per observation
// plus a flat prior, all weighted 1/(m+1). Bandwidth is Silverman's 1.06 sd n^-1/5
// clipped to [range / min(100, n+1), range].
class NumericParzen {
public:
  NumericParzen(std::vector<double> obs, double lo, double hi) : obs_(std::move(obs)), lo_(lo), hi_(hi) {
    const double range = hi_ - lo_;
    const double n = static_cast<double>(std::max<std::size_t>(obs_.size(), 1));
    double mean = 0.0, var = 0.0;
    for (double v : obs_) mean += v / n;
    for (double v : obs_) var += (v - mean) * (v - mean) / n;
    sigma_ = std::clamp(1.06 * std::sqrt(var) * std::pow(n, -0.2), range / std::min(100.0, n + 1.0), range);
    for (double mu : obs_) mass_.push_back(normal_cdf((hi_ - mu) / sigma_) - normal_cdf((lo_ - mu) / sigma_));
  }

  double log_pdf(double x) const {
    const double w = 1.0 / static_cast<double>(obs_.size() + 1);
    double p = w / (hi_ - lo_);
    const double norm = 1.0 / (sigma_ * std::sqrt(2.0 * std::numbers::pi));
    for (std::size_t i = 0; i < obs_.size(); ++i) {
      const double z = (x - obs_[i]) / sigma_;
      p += w * norm * std::exp(-0.5 * z * z) / mass_[i];
    }
    return std::log(p);
  }

  double sample(Rng& rng) const {
    const std::size_t j = rng.index(obs_.size() + 1);
    if (j == obs_.size()) return rng.uniform(lo_, hi_);
    for (int attempt = 0; attempt < 64; ++attempt) {
      const double x = rng.normal(obs_[j], sigma_);
      if (x >= lo_ && x <= hi_) return x;
    }
    return std::clamp(obs_[j], lo_, hi_);
  }

  double bandwidth() const noexcept { return sigma_; }

private:
  std::vector<double> obs_;
  double lo_, hi_, sigma_ = 1.0;
  std::vector<double> mass_;
};

// Add-one smoothed frequencies over the choices.
class CategoricalParzen {
public:
  CategoricalParzen(const std::vector<std::string>& choices, const std::vector<std::string>& obs) {
    probs_.assign(choices.size(), 1.0);
    for (const auto& o : obs) {
      auto it = std::find(choices.begin(), choices.end(), o);
      if (it != choices.end()) probs_[static_cast<std::size_t>(it - choices.begin())] += 1.0;
    }
    const double total = static_cast<double>(choices.size() + obs.size());
    for (auto& p : probs_) p /= total;
  }

  double log_pmf(std::size_t i) const { return std::log(probs_[i]); }

  std::size_t sample(Rng& rng) const {
    double u = rng.uniform(), acc = 0.0;
    for (std::size_t i = 0; i < probs_.size(); ++i) {
      acc += probs_[i];
      if (u < acc) return i;
    }
    return probs_.size() - 1;
  }

private:
  std::vector<double> probs_;
};

struct NumericView {
  double lo, hi;
  bool log_scale, integer;
};

inline NumericView numeric_view(const Domain& d) {
  if (const auto* u = std::get_if<Uniform>(&d)) return {u->lo, u->hi, false, false};
  if (const auto* l = std::get_if<LogUniform>(&d)) return {std::log(l->lo), std::log(l->hi), true, false};
  const auto& i = std::get<IntegerRange>(d);
  return {static_cast<double>(i.lo), static_cast<double>(i.hi), false, true};
}

inline double to_internal(const ParamValue& v, const NumericView& nv) {
  const double x = as_double(v);
  return nv.log_scale ? std::log(x) : x;
}

inline ParamValue from_internal(double u, const NumericView& nv) {
  if (nv.integer) return static_cast<std::int64_t>(std::clamp(std::round(u), nv.lo, nv.hi));
  if (nv.log_scale) return std::clamp(std::exp(u), std::exp(nv.lo), std::exp(nv.hi));
  return std::clamp(u, nv.lo, nv.hi);
}

}  // namespace detail

// Next configuration to evaluate. Below n_startup trials this is a uniform draw;
// afterwards trials are split into the top ceil(gamma*n) by score and the rest,
// candidates are drawn from the good-set density l, and the candidate with the
// largest sum over dimensions of log l - log g is returned. The generator is
// seeded from (seed, history size), so a replayed history yields the same suggestion.
inline Config suggest(const TrialHistory& history, const SearchSpace& space, const TpeConfig& cfg) {
  cfg.validate();
  Rng rng(derive_seed(cfg.seed, "tpe-suggest", history.size()));
  if (history.size() < cfg.n_startup || history.size() == 0) return sample_uniform(space, rng);

  std::vector<const Trial*> sorted;
  for (const auto& t : history.trials) sorted.push_back(&t);
  std::stable_sort(sorted.begin(), sorted.end(), [](const Trial* a, const Trial* b) { return a->score > b->score; });
  const auto n_good = static_cast<std::size_t>(std::ceil(cfg.gamma * static_cast<double>(sorted.size())));
  const std::span<const Trial* const> good(sorted.data(), n_good);
  const std::span<const Trial* const> bad(sorted.data() + n_good, sorted.size() - n_good);

  std::vector<Config> candidates(cfg.n_candidates);
  std::vector<double> acquisition(cfg.n_candidates, 0.0);
  for (const auto& d : space.dimensions) {
    if (const auto* cat = std::get_if<Categorical>(&d.domain)) {
      std::vector<std::string> og, ob;
      for (const auto* t : good) og.push_back(as_string(t->config.at(d.name)));
      for (const auto* t : bad) ob.push_back(as_string(t->config.at(d.name)));
      const detail::CategoricalParzen l(cat->choices, og), g(cat->choices, ob);
      for (std::size_t c = 0; c < cfg.n_candidates; ++c) {
        const std::size_t i = l.sample(rng);
        candidates[c][d.name] = cat->choices[i];
        acquisition[c] += l.log_pmf(i) - g.log_pmf(i);
      }
      continue;
    }
    const auto nv = detail::numeric_view(d.domain);
    if (nv.lo == nv.hi) {
      for (auto& cand : candidates) cand[d.name] = detail::from_internal(nv.lo, nv);
      continue;
    }
    std::vector<double> og, ob;
    for (const auto* t : good) og.push_back(detail::to_internal(t->config.at(d.name), nv));
    for (const auto* t : bad) ob.push_back(detail::to_internal(t->config.at(d.name), nv));
    const detail::NumericParzen l(og, nv.lo, nv.hi), g(ob, nv.lo, nv.hi);
    for (std::size_t c = 0; c < cfg.n_candidates; ++c) {
      const ParamValue v = detail::from_internal(l.sample(rng), nv);
      const double u = detail::to_internal(v, nv);
      candidates[c][d.name] = v;
      acquisition[c] += l.log_pdf(u) - g.log_pdf(u);
    }
  }
  std::size_t best = 0;
  for (std::size_t c = 1; c < cfg.n_candidates; ++c)
    if (acquisition[c] > acquisition[best]) best = c;
  return candidates[best];
}

using Objective = std::function<double(const Config&)>;

struct OptimizeResult {
  Config best_config;
  double best_score = -std::numeric_limits<double>::infinity();
  TrialHistory history;
};

// Evaluates one configuration; exceptions and NaN scores become -infinity.
inline Trial run_trial(const Objective& objective, Config config, std::size_t index) {
  Trial t;
  t.index = index;
  t.config = std::move(config);
  const auto t0 = std::chrono::steady_clock::now();
  try {
    t.score = objective(t.config);
    if (std::isnan(t.score)) t.score = -std::numeric_limits<double>::infinity();
  } catch (const std::exception&) {
    t.score = -std::numeric_limits<double>::infinity();
  }
  t.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return t;
}

inline void record_best(OptimizeResult& r) {
  const Trial* best = nullptr;
  for (const auto& t : r.history.trials)
    if (!best || t.score > best->score) best = &t;
  if (best) {
    r.best_config = best->config;
    r.best_score = best->score;
  }
}

// Sequential suggest -> evaluate -> append loop. The best trial is the
// highest score, earliest on ties. An optional sink observes each trial.
inline OptimizeResult optimize(const Objective& objective, const SearchSpace& space, std::size_t budget,
                               const TpeConfig& cfg, const std::function<void(const Trial&)>& on_trial = {},
                               TrialHistory resume = {}) {
  if (budget < 1) throw ConfigError("optimize: budget must be >= 1");
  space.validate();
  OptimizeResult r;
  r.history = std::move(resume);
  while (r.history.size() < budget) {
    auto t = run_trial(objective, suggest(r.history, space, cfg), r.history.size());
    if (on_trial) on_trial(t);
    r.history.trials.push_back(std::move(t));
  }
  record_best(r);
  return r;
}

// Uniform sampling baseline with the same trial bookkeeping.
inline OptimizeResult random_search(const Objective& objective, const SearchSpace& space, std::size_t budget,
                                    std::uint64_t seed) {
  TpeConfig cfg;
  cfg.seed = seed;
  cfg.n_startup = budget;
  return optimize(objective, space, budget, cfg);
}

inline nlohmann::json config_to_json(const Config& c) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [k, v] : c) std::visit([&](const auto& x) { j[k] = x; }, v);
  return j;
}

inline Config config_from_json(const nlohmann::json& j) {
  Config c;
  for (const auto& [k, v] : j.items()) {
    if (v.is_string())
      c[k] = v.get<std::string>();
    else if (v.is_number_integer())
      c[k] = v.get<std::int64_t>();
    else if (v.is_number())
      c[k] = v.get<double>();
    else
      throw DataError("config value for '" + k + "' has unsupported type");
  }
  return c;
}

inline nlohmann::json trial_to_json(const Trial& t) {
  return {{"index", t.index},
          {"config", config_to_json(t.config)},
          {"score", std::isfinite(t.score) ? nlohmann::json(t.score) : nlohmann::json(nullptr)},
          {"seconds", t.seconds}};
}

inline Trial trial_from_json(const nlohmann::json& j) {
  Trial t;
  t.index = j.at("index").get<std::size_t>();
  t.config = config_from_json(j.at("config"));
  t.score = j.at("score").is_null() ? -std::numeric_limits<double>::infinity() : j.at("score").get<double>();
  t.seconds = j.value("seconds", 0.0);
  return t;
}

// One JSON object per line.
inline void write_history(std::ostream& out, const TrialHistory& h) {
  for (const auto& t : h.trials) out << trial_to_json(t).dump() << '\n';
}

inline TrialHistory read_history(std::istream& in) {
  TrialHistory h;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    h.trials.push_back(trial_from_json(nlohmann::json::parse(line)));
    if (h.trials.back().index != h.trials.size() - 1) throw DataError("trial history indices are not dense");
  }
  return h;
}

inline nlohmann::json space_to_json(const SearchSpace& s) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& d : s.dimensions) {
    nlohmann::json e = {{"name", d.name}};
    std::visit(
        [&](const auto& dom) {
          using T = std::decay_t<decltype(dom)>;
          if constexpr (std::is_same_v<T, Uniform>) {
            e["type"] = "uniform";
            e["low"] = dom.lo;
            e["high"] = dom.hi;
          } else if constexpr (std::is_same_v<T, LogUniform>) {
            e["type"] = "log_uniform";
            e["low"] = dom.lo;
            e["high"] = dom.hi;
          } else if constexpr (std::is_same_v<T, IntegerRange>) {
            e["type"] = "integer";
            e["low"] = dom.lo;
            e["high"] = dom.hi;
          } else {
            e["type"] = "categorical";
            e["choices"] = dom.choices;
          }
        },
        d.domain);
    arr.push_back(e);
  }
  return arr;
}

inline SearchSpace space_from_json(const nlohmann::json& j) {
  SearchSpace s;
  for (const auto& e : j) {
    Dimension d;
    d.name = e.at("name").get<std::string>();
    const auto type = e.at("type").get<std::string>();
    if (type == "uniform")
      d.domain = Uniform{e.at("low").get<double>(), e.at("high").get<double>()};
    else if (type == "log_uniform")
      d.domain = LogUniform{e.at("low").get<double>(), e.at("high").get<double>()};
    else if (type == "integer")
      d.domain = IntegerRange{e.at("low").get<std::int64_t>(), e.at("high").get<std::int64_t>()};
    else if (type == "categorical")
      d.domain = Categorical{e.at("choices").get<std::vector<std::string>>()};
    else
      throw ConfigError("unknown dimension type '" + type + "'");
    s.dimensions.push_back(std::move(d));
  }
  s.validate();
  return s;
}

}  // namespace nids::hpo

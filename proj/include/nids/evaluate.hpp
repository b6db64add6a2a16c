#pragma once

#include <algorithm>
#include <cstdio>
#include <iomanip>
#include <optional>
#include <sstream>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "nids/error.hpp"

namespace nids {

// Rows are true classes, columns predicted classes.
struct ConfusionMatrix {
  std::vector<std::vector<std::size_t>> counts;
  std::vector<std::string> class_names;

  std::size_t n_classes() const noexcept { return counts.size(); }
  std::size_t total() const {
    std::size_t t = 0;
    for (const auto& r : counts)
      for (auto c : r) t += c;
    return t;
  }
};

inline ConfusionMatrix confusion(std::span<const int> y_true, std::span<const int> y_pred, std::size_t n_classes,
                                 std::vector<std::string> class_names = {}) {
  if (y_true.size() != y_pred.size()) throw std::invalid_argument("confusion: length mismatch");
  ConfusionMatrix cm;
  cm.counts.assign(n_classes, std::vector<std::size_t>(n_classes, 0));
  for (std::size_t i = 0; i < y_true.size(); ++i) {
    const int t = y_true[i], p = y_pred[i];
    if (t < 0 || p < 0 || static_cast<std::size_t>(t) >= n_classes || static_cast<std::size_t>(p) >= n_classes)
      throw std::out_of_range("confusion: label out of range");
    ++cm.counts[static_cast<std::size_t>(t)][static_cast<std::size_t>(p)];
  }
  if (class_names.empty())
    for (std::size_t c = 0; c < n_classes; ++c) class_names.push_back("class_" + std::to_string(c));
  cm.class_names = std::move(class_names);
  return cm;
}

struct OneVsRest {
  std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
};

inline OneVsRest one_vs_rest(const ConfusionMatrix& cm, std::size_t c) {
  OneVsRest o;
  const std::size_t total = cm.total();
  o.tp = cm.counts[c][c];
  for (std::size_t k = 0; k < cm.n_classes(); ++k) {
    o.fp += cm.counts[k][c];
    o.fn += cm.counts[c][k];
  }
  o.fp -= o.tp;
  o.fn -= o.tp;
  o.tn = total - o.tp - o.fp - o.fn;
  return o;
}

struct MetricRow {
  double accuracy = 0.0, precision = 0.0, recall = 0.0, f1 = 0.0;
  // A zero denominator forced one of precision/recall/f1 to 0.
  bool zero_division = false;
};

struct ClassMetrics {
  std::vector<std::string> class_names;
  std::vector<MetricRow> per_class;
  MetricRow macro;
  double micro_accuracy = 0.0;  // trace / total
};

// One-vs-rest accuracy, precision, recall and F1 per class, with unweighted macro means.
inline ClassMetrics metrics(const ConfusionMatrix& cm) {
  const std::size_t total = cm.total();
  if (cm.n_classes() == 0 || total == 0) throw DataError("metrics: confusion matrix is empty");
  ClassMetrics m;
  m.class_names = cm.class_names;
  const double n = static_cast<double>(total);
  std::size_t trace = 0;
  for (std::size_t c = 0; c < cm.n_classes(); ++c) {
    const auto o = one_vs_rest(cm, c);
    trace += o.tp;
    MetricRow r;
    r.accuracy = static_cast<double>(o.tp + o.tn) / n;
    if (o.tp + o.fp > 0)
      r.precision = static_cast<double>(o.tp) / static_cast<double>(o.tp + o.fp);
    else
      r.zero_division = true;
    if (o.tp + o.fn > 0)
      r.recall = static_cast<double>(o.tp) / static_cast<double>(o.tp + o.fn);
    else
      r.zero_division = true;
    if (r.precision + r.recall > 0.0)
      r.f1 = 2.0 * r.precision * r.recall / (r.precision + r.recall);
    else
      r.zero_division = true;
    m.per_class.push_back(r);
  }
  const double k = static_cast<double>(cm.n_classes());
  for (const auto& r : m.per_class) {
    m.macro.accuracy += r.accuracy / k;
    m.macro.precision += r.precision / k;
    m.macro.recall += r.recall / k;
    m.macro.f1 += r.f1 / k;
    m.macro.zero_division |= r.zero_division;
  }
  m.micro_accuracy = static_cast<double>(trace) / n;
  return m;
}

struct ModelResult {
  std::string name;
  ClassMetrics metrics;
  double train_seconds = 0.0;
};

// Default vs tuned run of the same classifier.
struct HpoComparison {
  ModelResult without_hpo;
  ModelResult with_hpo;
};

inline nlohmann::json metric_row_json(const MetricRow& r) {
  nlohmann::json j = {{"accuracy", r.accuracy}, {"precision", r.precision}, {"recall", r.recall}, {"f1", r.f1}};
  if (r.zero_division) j["zero_division"] = true;
  return j;
}

inline nlohmann::json model_result_json(const ModelResult& r) {
  nlohmann::json per_class = nlohmann::json::array();
  for (std::size_t c = 0; c < r.metrics.per_class.size(); ++c) {
    auto row = metric_row_json(r.metrics.per_class[c]);
    row["class"] = r.metrics.class_names[c];
    per_class.push_back(std::move(row));
  }
  return {{"name", r.name},
          {"per_class", per_class},
          {"macro", metric_row_json(r.metrics.macro)},
          {"overall_accuracy", r.metrics.micro_accuracy},
          {"train_seconds", r.train_seconds}};
}

struct Report {
  nlohmann::json json;
  std::string text;
};

namespace detail {

inline std::string pct(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f%%", 100.0 * v);
  return buf;
}

inline std::string table(const std::vector<std::vector<std::string>>& rows) {
  std::vector<std::size_t> width;
  for (const auto& r : rows)
    for (std::size_t c = 0; c < r.size(); ++c) {
      if (width.size() <= c) width.push_back(0);
      width[c] = std::max(width[c], r[c].size());
    }
  std::ostringstream out;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t c = 0; c < rows[i].size(); ++c) {
      if (c) out << "  ";
      out << (c == 0 ? std::left : std::right) << std::setw(static_cast<int>(width[c])) << rows[i][c];
    }
    out << '\n';
    if (i == 0) {
      std::size_t total = 0;
      for (auto w : width) total += w;
      out << std::string(total + 2 * (width.size() - 1), '-') << '\n';
    }
  }
  return out.str();
}

}  // namespace detail

// Per-class metric tables with an "Average" (macro) row, plus an optional
// default-vs-tuned block labelled W/oHOP and W/HOP.
inline Report render_report(const std::vector<ModelResult>& results, const std::optional<HpoComparison>& comparison = {},
                            const nlohmann::json& extra = {}) {
  if (results.empty()) throw std::invalid_argument("render_report: no results");
  Report rep;
  rep.json["models"] = nlohmann::json::array();
  std::ostringstream text;
  bool footnote = false;
  for (const auto& r : results) {
    rep.json["models"].push_back(model_result_json(r));
    std::vector<std::vector<std::string>> rows{{"Class", "Accuracy", "Precision", "Recall", "F1-Measure"}};
    for (std::size_t c = 0; c < r.metrics.per_class.size(); ++c) {
      const auto& m = r.metrics.per_class[c];
      footnote |= m.zero_division;
      rows.push_back({r.metrics.class_names[c] + (m.zero_division ? " *" : ""), detail::pct(m.accuracy),
                      detail::pct(m.precision), detail::pct(m.recall), detail::pct(m.f1)});
    }
    const auto& a = r.metrics.macro;
    rows.push_back({"Average", detail::pct(a.accuracy), detail::pct(a.precision), detail::pct(a.recall),
                    detail::pct(a.f1)});
    char secs[32];
    std::snprintf(secs, sizeof secs, "%.3f", r.train_seconds);
    text << "Model: " << r.name << " (training time " << secs << " s)\n" << detail::table(rows) << '\n';
  }
  if (footnote) text << "* zero denominator: undefined precision/recall/F1 reported as 0\n\n";
  if (comparison) {
    auto stanza = [](const char* label, const ModelResult& r) {
      char secs[32];
      std::snprintf(secs, sizeof secs, "%.3fs", r.train_seconds);
      return std::vector<std::string>{label, r.name, secs, detail::pct(r.metrics.micro_accuracy),
                                      detail::pct(r.metrics.macro.f1)};
    };
    std::vector<std::vector<std::string>> rows{{"Data", "Classifier", "TrainingTime(s)", "Accuracy", "F1-Measure"}};
    rows.push_back(stanza("W/oHOP", comparison->without_hpo));
    rows.push_back(stanza("W/HOP", comparison->with_hpo));
    text << "Classifier performance with and without HPO\n" << detail::table(rows);
    auto entry = [](const ModelResult& r) {
      return nlohmann::json{{"classifier", r.name},
                            {"train_seconds", r.train_seconds},
                            {"accuracy", r.metrics.micro_accuracy},
                            {"f1", r.metrics.macro.f1}};
    };
    rep.json["comparison"] = {{"W/oHOP", entry(comparison->without_hpo)}, {"W/HOP", entry(comparison->with_hpo)}};
  }
  if (!extra.is_null())
    for (const auto& [k, v] : extra.items()) rep.json[k] = v;
  rep.text = text.str();
  return rep;
}

}  // namespace nids

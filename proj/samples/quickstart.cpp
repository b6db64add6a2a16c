// Library walk-through: generate data, select features, balance, train a forest, score it.
#include <iostream>

#include "nids/nids.hpp"

int main() {
  nids::SyntheticSpec spec;
  spec.separation = 2.5;
  auto data = nids::generate_synthetic(spec).data;

  nids::SplitSpec split_spec;
  split_spec.seed = 7;
  auto parts = nids::split(data, split_spec);

  const auto stats = nids::fit_minmax(parts.train.features, parts.train.feature_names);
  parts.train.features = nids::apply_minmax(parts.train.features, stats);
  parts.test.features = nids::apply_minmax(parts.test.features, stats);

  const auto subset = nids::fcbf_select(nids::discretize_columns(parts.train, 10), parts.train.labels, 0.01,
                                        parts.train.feature_names);
  std::cout << "kept " << subset.selected_names.size() << " of " << parts.train.cols() << " features\n";
  auto train = nids::apply_selection(parts.train, subset);
  auto test = nids::apply_selection(parts.test, subset);

  nids::BalanceConfig bc;
  bc.seed = 7;
  auto balanced = nids::balance_dataset(train, bc);
  std::cout << "synthetic rows: " << balanced.report.total_synthetic() << '\n';

  nids::RfParams rf;
  rf.seed = 7;
  const auto model = nids::train_random_forest_model(balanced.data, rf);
  const auto pred = nids::predict(model, test.features);
  const auto cm = nids::confusion(test.labels, pred.labels, test.n_classes(), test.label_map.class_names());
  const auto report = nids::render_report({{"random_forest", nids::metrics(cm), model.meta.train_seconds}});
  std::cout << report.text;
}

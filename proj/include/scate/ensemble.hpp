#pragma once

#include <cstdint>
#include <vector>

#include "scate/cart.hpp"
#include "scate/data.hpp"

namespace scate {

struct ForestParams {
  int n_trees = 250;
  TreeParams tree{.max_depth = 15};
  std::uint64_t seed = 0;
};

struct Forest {
  std::vector<Tree> trees;
  std::vector<std::vector<int>> tree_row_sets;  // rows (with multiplicity) that shaped each tree
  std::vector<std::vector<int>> label_rows;     // honest mode: distinct rows that label each tree
  ForestParams params;
  bool relabeled_on_full_train = true;
  int n_features = 0;

  int size() const { return static_cast<int>(trees.size()); }
  bool honest() const { return params.tree.honest; }
};

struct GbmParams {
  int n_trees = 100;
  double learning_rate = 0.1;
  TreeParams tree{.max_depth = 6, .bootstrap = false};
  std::uint64_t seed = 0;
};

struct GbmModel {
  std::vector<Tree> trees;
  double learning_rate = 0.1;
  double base_score = 0.0;
  GbmParams params;
  int n_features = 0;
};

// Trees are grown on bootstraps (or subsamples) drawn from an independent stream per tree,
// then relabeled with full-training-set leaf means so the forest is exactly the kernel
// smoother over the training rows. Honest mode keeps label-fold leaf means instead.
Forest fit_rf(const Dataset& train, const ForestParams& params);
double predict_rf(const Forest& forest, std::span<const double> x);
Vector predict_rf(const Forest& forest, const Matrix& X);

GbmModel fit_gbm(const Dataset& train, const GbmParams& params);
double predict_gbm(const GbmModel& model, std::span<const double> x);
Vector predict_gbm(const GbmModel& model, const Matrix& X);

// N x B matrix of individual tree outputs; for boosting each column is scaled by the
// learning rate so that rows sum to the ensemble prediction.
Matrix per_tree_predictions(const Forest& forest, const Matrix& X);
Matrix per_tree_predictions(const GbmModel& model, const Matrix& X);

}  // namespace scate

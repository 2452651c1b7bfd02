#pragma once

#include <optional>
#include <span>
#include <vector>

#include <json.hpp>

#include "scate/rng.hpp"
#include "scate/types.hpp"

namespace scate {

// Array-encoded binary regression tree. Node 0 is the root; feature == -1 marks a leaf.
// A point goes left iff x[feature] <= threshold.
struct Tree {
  int n_features = 0;
  std::vector<int> feature;
  std::vector<double> threshold;
  std::vector<int> left;
  std::vector<int> right;
  std::vector<double> value;  // NaN at internal nodes
  std::vector<int> n_node_samples;

  int node_count() const { return static_cast<int>(feature.size()); }
  int leaf_count() const;
  int max_depth() const;
  bool is_leaf(int node) const { return feature[node] < 0; }
  // Parent of every node, -1 for the root.
  std::vector<int> parents() const;
};

struct TreeParams {
  std::optional<int> max_depth;
  int min_samples_leaf = 1;
  int mtry = 0;                 // features sampled per split; 0 means all
  double balance_gamma = 0.0;   // minimum child fraction, in [0, 0.5]
  bool honest = false;
  double subsample_fraction = 1.0;
  bool bootstrap = true;
};

void validate(const TreeParams& params, int n_features);

// Greedy CART on the given rows (duplicates allowed, as produced by bootstrapping).
// Candidate splits are midpoints between consecutive distinct values; the split with the
// lowest summed child SSE wins, ties going to the lowest feature index and then the
// lowest threshold.
Tree fit_tree(const Matrix& X, const Vector& y, std::span<const int> rows, const TreeParams& params,
              Rng& rng);
Tree fit_tree(const Matrix& X, const Vector& y, const TreeParams& params, Rng& rng);

// Replaces every leaf value by the mean of y over the given rows routed to it. Leaves that
// receive no rows take the mean of their nearest ancestor that does.
Tree relabel(const Tree& tree, const Matrix& X, const Vector& y, std::span<const int> rows);
Tree honest_relabel(const Tree& tree, const Matrix& X_label, const Vector& y_label);

int leaf_id(const Tree& tree, std::span<const double> x);
double predict_tree(const Tree& tree, std::span<const double> x);

// Row view helper for row-major feature matrices.
inline std::span<const double> row_span(const Matrix& X, Eigen::Index i) {
  return {X.data() + i * X.cols(), static_cast<std::size_t>(X.cols())};
}

nlohmann::json tree_to_json(const Tree& tree);

}  // namespace scate

#include "scate/cart.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <json.hpp>

#include "scate/error.hpp"

namespace scate {

int Tree::leaf_count() const {
  return static_cast<int>(std::count(feature.begin(), feature.end(), -1));
}

int Tree::max_depth() const {
  if (feature.empty()) return 0;
  std::vector<int> depth(feature.size(), 0);
  int deepest = 0;
  for (int node = 0; node < node_count(); ++node) {
    if (is_leaf(node)) continue;
    depth[left[node]] = depth[right[node]] = depth[node] + 1;
    deepest = std::max(deepest, depth[node] + 1);
  }
  return deepest;
}

std::vector<int> Tree::parents() const {
  std::vector<int> parent(feature.size(), -1);
  for (int node = 0; node < node_count(); ++node) {
    if (is_leaf(node)) continue;
    parent[left[node]] = node;
    parent[right[node]] = node;
  }
  return parent;
}

void validate(const TreeParams& params, int n_features) {
  if (params.min_samples_leaf < 1) throw Error(ErrorCode::Config, "min_samples_leaf must be >= 1");
  if (params.balance_gamma < 0.0 || params.balance_gamma > 0.5) {
    throw Error(ErrorCode::Config, "balance_gamma must lie in [0, 0.5]");
  }
  if (params.mtry < 0 || params.mtry > n_features) {
    throw Error(ErrorCode::Config, "mtry must lie in 1..d (0 for all features)");
  }
  if (!(params.subsample_fraction > 0.0 && params.subsample_fraction <= 1.0)) {
    throw Error(ErrorCode::Config, "subsample_fraction must lie in (0, 1]");
  }
  if (params.max_depth && *params.max_depth < 0) throw Error(ErrorCode::Config, "max_depth must be >= 0");
}

namespace {

struct SplitChoice {
  int feature = -1;
  double threshold = 0.0;
  int left_count = 0;
};

// Work item for the explicit DFS. `order[f]` lists the node's sample slots sorted by
// feature f; slots index the bootstrap sample, so duplicated rows are distinct slots.
struct NodeTask {
  int node;
  int depth;
  std::vector<std::vector<int>> order;
};

class TreeBuilder {
 public:
  TreeBuilder(const Matrix& X, const Vector& y, std::span<const int> rows, const TreeParams& params,
              Rng& rng)
      : X_(X), params_(params), rng_(rng), rows_(rows.begin(), rows.end()) {
    ys_.reserve(rows_.size());
    for (int r : rows_) ys_.push_back(y(r));
    d_ = static_cast<int>(X.cols());
    mtry_ = params.mtry == 0 ? d_ : params.mtry;
  }

  Tree build() {
    tree_.n_features = d_;
    const int n = static_cast<int>(rows_.size());
    NodeTask root{new_node(), 0, std::vector<std::vector<int>>(d_)};
    for (int f = 0; f < d_; ++f) {
      auto& ord = root.order[f];
      ord.resize(n);
      std::iota(ord.begin(), ord.end(), 0);
      std::stable_sort(ord.begin(), ord.end(), [&](int a, int b) { return xv(a, f) < xv(b, f); });
    }
    std::vector<NodeTask> stack;
    stack.push_back(std::move(root));
    std::vector<char> goes_left(rows_.size(), 0);
    while (!stack.empty()) {
      NodeTask task = std::move(stack.back());
      stack.pop_back();
      const auto& slots = task.order[0];
      const int count = static_cast<int>(slots.size());
      double sum = 0.0;
      for (int s : slots) sum += ys_[s];
      tree_.n_node_samples[task.node] = count;

      const auto choice = find_split(task);
      if (!choice) {
        tree_.value[task.node] = sum / count;
        continue;
      }
      const int left = new_node();
      const int right = new_node();
      tree_.feature[task.node] = choice->feature;
      tree_.threshold[task.node] = choice->threshold;
      tree_.left[task.node] = left;
      tree_.right[task.node] = right;

      for (int s : slots) goes_left[s] = xv(s, choice->feature) <= choice->threshold;
      NodeTask lt{left, task.depth + 1, std::vector<std::vector<int>>(d_)};
      NodeTask rt{right, task.depth + 1, std::vector<std::vector<int>>(d_)};
      for (int f = 0; f < d_; ++f) {
        lt.order[f].reserve(choice->left_count);
        rt.order[f].reserve(count - choice->left_count);
        for (int s : task.order[f]) (goes_left[s] ? lt.order[f] : rt.order[f]).push_back(s);
      }
      // Right pushed first so the left subtree is expanded first.
      stack.push_back(std::move(rt));
      stack.push_back(std::move(lt));
    }
    return std::move(tree_);
  }

 private:
  double xv(int slot, int f) const { return X_(rows_[slot], f); }

  int new_node() {
    tree_.feature.push_back(-1);
    tree_.threshold.push_back(0.0);
    tree_.left.push_back(-1);
    tree_.right.push_back(-1);
    tree_.value.push_back(std::numeric_limits<double>::quiet_NaN());
    tree_.n_node_samples.push_back(0);
    return tree_.node_count() - 1;
  }

  std::optional<SplitChoice> find_split(const NodeTask& task) {
    const auto& slots = task.order[0];
    const int n = static_cast<int>(slots.size());
    if (params_.max_depth && task.depth >= *params_.max_depth) return std::nullopt;
    if (n < 2 * params_.min_samples_leaf || n < 2) return std::nullopt;
    const double first = ys_[slots[0]];
    if (std::all_of(slots.begin(), slots.end(), [&](int s) { return ys_[s] == first; })) {
      return std::nullopt;
    }

    std::vector<int> candidates;
    if (mtry_ >= d_) {
      candidates.resize(d_);
      std::iota(candidates.begin(), candidates.end(), 0);
    } else {
      candidates = rng_.sample_without_replacement(d_, mtry_);
      std::sort(candidates.begin(), candidates.end());
    }

    double total = 0.0, total_sq = 0.0;
    for (int s : slots) {
      total += ys_[s];
      total_sq += ys_[s] * ys_[s];
    }
    const double min_child = params_.balance_gamma * n;

    std::optional<SplitChoice> best;
    double best_score = std::numeric_limits<double>::infinity();
    for (int f : candidates) {
      const auto& ord = task.order[f];
      double left_sum = 0.0, left_sq = 0.0;
      for (int i = 0; i + 1 < n; ++i) {
        const double yi = ys_[ord[i]];
        left_sum += yi;
        left_sq += yi * yi;
        const double lo = xv(ord[i], f);
        const double hi = xv(ord[i + 1], f);
        if (!(lo < hi)) continue;
        const int nl = i + 1;
        const int nr = n - nl;
        if (nl < params_.min_samples_leaf || nr < params_.min_samples_leaf) continue;
        if (nl < min_child || nr < min_child) continue;
        const double right_sum = total - left_sum;
        const double right_sq = total_sq - left_sq;
        const double sse = (left_sq - left_sum * left_sum / nl) + (right_sq - right_sum * right_sum / nr);
        if (sse < best_score) {
          best_score = sse;
          double thr = 0.5 * (lo + hi);
          if (!(thr < hi)) thr = lo;
          best = SplitChoice{f, thr, nl};
        }
      }
    }
    return best;
  }

  const Matrix& X_;
  const TreeParams& params_;
  Rng& rng_;
  std::vector<int> rows_;
  std::vector<double> ys_;
  int d_ = 0;
  int mtry_ = 0;
  Tree tree_;
};

}  // namespace

Tree fit_tree(const Matrix& X, const Vector& y, std::span<const int> rows, const TreeParams& params,
              Rng& rng) {
  validate(params, static_cast<int>(X.cols()));
  if (X.rows() != y.size()) throw Error(ErrorCode::DimensionMismatch, "X and y row counts differ");
  if (rows.size() < 2 * static_cast<std::size_t>(params.min_samples_leaf) || rows.empty()) {
    throw Error(ErrorCode::TooFewSamples,
                std::to_string(rows.size()) + " rows for min_samples_leaf=" +
                    std::to_string(params.min_samples_leaf));
  }
  return TreeBuilder(X, y, rows, params, rng).build();
}

Tree fit_tree(const Matrix& X, const Vector& y, const TreeParams& params, Rng& rng) {
  std::vector<int> rows(static_cast<std::size_t>(X.rows()));
  std::iota(rows.begin(), rows.end(), 0);
  return fit_tree(X, y, rows, params, rng);
}

Tree relabel(const Tree& tree, const Matrix& X, const Vector& y, std::span<const int> rows) {
  if (rows.empty()) throw Error(ErrorCode::EmptyLabelFold, "no rows to relabel with");
  if (X.cols() != tree.n_features) throw Error(ErrorCode::DimensionMismatch, "feature count differs");
  std::vector<double> sums(tree.feature.size(), 0.0);
  std::vector<int> counts(tree.feature.size(), 0);
  for (int r : rows) {
    const auto x = row_span(X, r);
    int node = 0;
    while (true) {
      sums[node] += y(r);
      counts[node] += 1;
      if (tree.is_leaf(node)) break;
      node = x[tree.feature[node]] <= tree.threshold[node] ? tree.left[node] : tree.right[node];
    }
  }
  Tree out = tree;
  const auto parent = tree.parents();
  for (int node = 0; node < tree.node_count(); ++node) {
    out.n_node_samples[node] = counts[node];
    if (!tree.is_leaf(node)) continue;
    int source = node;
    while (counts[source] == 0) source = parent[source];
    out.value[node] = sums[source] / counts[source];
  }
  return out;
}

Tree honest_relabel(const Tree& tree, const Matrix& X_label, const Vector& y_label) {
  if (X_label.rows() == 0) throw Error(ErrorCode::EmptyLabelFold, "label fold is empty");
  if (X_label.rows() != y_label.size()) throw Error(ErrorCode::DimensionMismatch, "X and y row counts differ");
  std::vector<int> rows(static_cast<std::size_t>(X_label.rows()));
  std::iota(rows.begin(), rows.end(), 0);
  return relabel(tree, X_label, y_label, rows);
}

int leaf_id(const Tree& tree, std::span<const double> x) {
  if (static_cast<int>(x.size()) != tree.n_features) {
    throw Error(ErrorCode::DimensionMismatch, "expected " + std::to_string(tree.n_features) +
                                                  " features, got " + std::to_string(x.size()));
  }
  int node = 0;
  while (!tree.is_leaf(node)) {
    node = x[tree.feature[node]] <= tree.threshold[node] ? tree.left[node] : tree.right[node];
  }
  return node;
}

double predict_tree(const Tree& tree, std::span<const double> x) { return tree.value[leaf_id(tree, x)]; }

nlohmann::json tree_to_json(const Tree& tree) {
  nlohmann::json values = nlohmann::json::array();
  for (double v : tree.value) values.push_back(std::isnan(v) ? nlohmann::json(nullptr) : nlohmann::json(v));
  return {{"n_features", tree.n_features},
          {"feature", tree.feature},
          {"threshold", tree.threshold},
          {"left", tree.left},
          {"right", tree.right},
          {"value", values},
          {"n_node_samples", tree.n_node_samples}};
}

}  // namespace scate

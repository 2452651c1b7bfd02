#include <doctest.h>

#include <cmath>
#include <limits>

#include "scate/cart.hpp"
#include "scate/error.hpp"
#include "support.hpp"

using namespace scate;
using testing::from_arrays;

namespace {

struct Split {
  int feature = -1;
  double threshold = 0.0;
  double sse = std::numeric_limits<double>::infinity();
  double runner_up = std::numeric_limits<double>::infinity();
};

double sse_of(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= v.size();
  double s = 0.0;
  for (double x : v) s += (x - mean) * (x - mean);
  return s;
}

// Every feature and every midpoint, scored by two-pass child SSE; first strict minimum wins.
Split brute_force_root(const Matrix& X, const Vector& y, double gamma, int min_leaf) {
  Split best;
  const int n = static_cast<int>(X.rows());
  for (int f = 0; f < X.cols(); ++f) {
    std::vector<double> values(X.col(f).data(), X.col(f).data() + 0);
    for (int i = 0; i < n; ++i) values.push_back(X(i, f));
    std::sort(values.begin(), values.end());
    values.erase(std::unique(values.begin(), values.end()), values.end());
    for (std::size_t k = 0; k + 1 < values.size(); ++k) {
      const double t = 0.5 * (values[k] + values[k + 1]);
      std::vector<double> left, right;
      for (int i = 0; i < n; ++i) (X(i, f) <= t ? left : right).push_back(y(i));
      const int nl = static_cast<int>(left.size()), nr = static_cast<int>(right.size());
      if (nl < min_leaf || nr < min_leaf) continue;
      if (nl < gamma * n || nr < gamma * n) continue;
      const double s = sse_of(left) + sse_of(right);
      if (s < best.sse) {
        best.runner_up = best.sse;
        best = {f, t, s, best.runner_up};
      } else if (s < best.runner_up) {
        best.runner_up = s;
      }
    }
  }
  return best;
}

Tree stump(double threshold, double left_value, double right_value) {
  Tree t;
  t.n_features = 1;
  t.feature = {0, -1, -1};
  t.threshold = {threshold, NAN, NAN};
  t.left = {1, -1, -1};
  t.right = {2, -1, -1};
  t.value = {NAN, left_value, right_value};
  t.n_node_samples = {2, 1, 1};
  return t;
}

void check_structure(const Tree& t) {
  int leaves = 0;
  for (int node = 0; node < t.node_count(); ++node) {
    if (t.is_leaf(node)) {
      ++leaves;
      CHECK(std::isfinite(t.value[node]));
      CHECK(t.left[node] == -1);
      CHECK(t.right[node] == -1);
    } else {
      CHECK(std::isnan(t.value[node]));
      CHECK(t.left[node] > node);
      CHECK(t.right[node] > node);
      CHECK(t.left[node] < t.node_count());
      CHECK(t.right[node] < t.node_count());
    }
  }
  CHECK(leaves == t.leaf_count());
  CHECK(t.node_count() == 2 * leaves - 1);
}

}  // namespace

TEST_CASE("two separable points") {
  const Dataset d = from_arrays({{0.0}, {1.0}}, {0.0, 1.0});
  Rng rng(1);
  const Tree t = fit_tree(d.features, d.target, {}, rng);
  REQUIRE(t.node_count() == 3);
  CHECK(t.feature[0] == 0);
  CHECK(t.threshold[0] == 0.5);
  CHECK(predict_tree(t, std::vector<double>{0.0}) == 0.0);
  CHECK(predict_tree(t, std::vector<double>{1.0}) == 1.0);
}

TEST_CASE("constant target gives a single leaf") {
  Rng rng(2);
  Dataset d = testing::random_dataset(30, 3, rng);
  d.target.setConstant(4.25);
  const Tree t = fit_tree(d.features, d.target, {}, rng);
  CHECK(t.node_count() == 1);
  CHECK(predict_tree(t, row_span(d.features, 3)) == 4.25);
}

TEST_CASE("balance constraint on a step function") {
  std::vector<std::vector<double>> rows;
  std::vector<double> y;
  for (int i = 0; i < 10; ++i) {
    rows.push_back({i / 10.0});
    y.push_back(i / 10.0 > 0.35 ? 1.0 : 0.0);
  }
  const Dataset d = from_arrays(rows, y);
  Rng rng(0);
  TreeParams p;
  p.max_depth = 1;
  p.balance_gamma = 0.4;
  Tree t = fit_tree(d.features, d.target, p, rng);
  CHECK(t.threshold[0] == doctest::Approx(0.35));

  p.balance_gamma = 0.45;
  t = fit_tree(d.features, d.target, p, rng);
  const Split oracle = brute_force_root(d.features, d.target, 0.45, 1);
  CHECK(t.feature[0] == oracle.feature);
  CHECK(t.threshold[0] == oracle.threshold);
  CHECK(t.threshold[0] == doctest::Approx(0.45));
}

TEST_CASE("root split matches exhaustive enumeration") {
  Rng rng(42);
  int compared = 0;
  for (int trial = 0; trial < 300; ++trial) {
    const int n = 4 + static_cast<int>(rng.below(47));
    const int d = 1 + static_cast<int>(rng.below(3));
    const double gamma = trial % 3 == 0 ? 0.2 * rng.uniform() : 0.0;
    const int min_leaf = 1 + static_cast<int>(rng.below(3));
    if (n < 2 * min_leaf) continue;
    Matrix X(n, d);
    Vector y(n);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < d; ++j) X(i, j) = std::round(rng.uniform() * 12.0) / 12.0;
      y(i) = rng.normal();
    }
    TreeParams p;
    p.max_depth = 1;
    p.balance_gamma = gamma;
    p.min_samples_leaf = min_leaf;
    Rng tree_rng(trial);
    const Tree t = fit_tree(X, y, p, tree_rng);
    const Split oracle = brute_force_root(X, y, gamma, min_leaf);
    if (!std::isfinite(oracle.sse)) {
      CHECK(t.node_count() == 1);
      continue;
    }
    REQUIRE(t.node_count() == 3);
    std::vector<double> left, right;
    for (int i = 0; i < n; ++i) (X(i, t.feature[0]) <= t.threshold[0] ? left : right).push_back(y(i));
    const double achieved = sse_of(left) + sse_of(right);
    CHECK(achieved <= oracle.sse * (1 + 1e-10) + 1e-12);
    if (oracle.runner_up - oracle.sse > 1e-9 * (1.0 + oracle.sse)) {
      CHECK(t.feature[0] == oracle.feature);
      CHECK(t.threshold[0] == oracle.threshold);
      ++compared;
    }
  }
  CHECK(compared > 100);
}

TEST_CASE("ties go to the lowest feature, then the lowest threshold") {
  // Two identical columns: both features give the same split, feature 0 must win.
  const Dataset d = from_arrays({{0, 0}, {1, 1}, {2, 2}, {3, 3}}, {0, 0, 5, 5});
  Rng rng(0);
  TreeParams p;
  p.max_depth = 1;
  const Tree t = fit_tree(d.features, d.target, p, rng);
  CHECK(t.feature[0] == 0);
  CHECK(t.threshold[0] == 1.5);

  // Symmetric target: thresholds 0.5 and 2.5 score the same, 0.5 must win.
  const Dataset s = from_arrays({{0}, {1}, {2}, {3}}, {1, 0, 0, 1});
  const Tree u = fit_tree(s.features, s.target, p, rng);
  CHECK(u.threshold[0] == 0.5);
}

TEST_CASE("balance, depth and structure hold on every grown tree") {
  Rng rng(9);
  for (int trial = 0; trial < 60; ++trial) {
    const Dataset d = testing::random_dataset(40 + static_cast<int>(rng.below(120)), 1 + static_cast<int>(rng.below(4)), rng);
    TreeParams p;
    p.balance_gamma = 0.1 * static_cast<double>(rng.below(5));
    p.max_depth = 1 + static_cast<int>(rng.below(8));
    p.min_samples_leaf = 1 + static_cast<int>(rng.below(4));
    p.mtry = static_cast<int>(rng.below(d.dims() + 1));
    const Tree t = fit_tree(d.features, d.target, p, rng);
    check_structure(t);
    CHECK(t.max_depth() <= *p.max_depth);
    for (int node = 0; node < t.node_count(); ++node) {
      if (t.is_leaf(node)) {
        CHECK(t.n_node_samples[node] >= p.min_samples_leaf);
        continue;
      }
      const int nl = t.n_node_samples[t.left[node]];
      const int nr = t.n_node_samples[t.right[node]];
      CHECK(nl + nr == t.n_node_samples[node]);
      CHECK(std::min(nl, nr) >= static_cast<int>(std::floor(p.balance_gamma * t.n_node_samples[node])));
    }
  }
}

TEST_CASE("every point routes to exactly one leaf") {
  Rng rng(4);
  const Dataset d = testing::random_dataset(200, 3, rng);
  const Tree t = fit_tree(d.features, d.target, {}, rng);
  for (int k = 0; k < 10000; ++k) {
    const std::vector<double> x{rng.uniform(-0.5, 1.5), rng.uniform(-0.5, 1.5), rng.uniform(-0.5, 1.5)};
    const int leaf = leaf_id(t, x);
    REQUIRE(leaf >= 0);
    REQUIRE(leaf < t.node_count());
    CHECK(t.is_leaf(leaf));
    // The leaf's ancestors are exactly the nodes whose conditions x satisfies on the path.
    int node = 0;
    while (!t.is_leaf(node)) node = x[t.feature[node]] <= t.threshold[node] ? t.left[node] : t.right[node];
    CHECK(node == leaf);
  }
}

TEST_CASE("leaf routing boundary convention") {
  const Tree t = stump(0.5, -1.0, 1.0);
  CHECK(leaf_id(t, std::vector<double>{0.5}) == 1);
  CHECK(leaf_id(t, std::vector<double>{0.5000001}) == 2);
  CHECK_THROWS_AS(leaf_id(t, std::vector<double>{0.1, 0.2}), Error);

  Tree single;
  single.n_features = 2;
  single.feature = {-1};
  single.threshold = {NAN};
  single.left = {-1};
  single.right = {-1};
  single.value = {3.5};
  single.n_node_samples = {1};
  CHECK(leaf_id(single, std::vector<double>{7.0, -2.0}) == 0);
  CHECK(predict_tree(single, std::vector<double>{7.0, -2.0}) == 3.5);
}

TEST_CASE("leaf values are means of the routed training rows") {
  Rng rng(17);
  for (int trial = 0; trial < 100; ++trial) {
    const Dataset d = testing::random_dataset(30 + static_cast<int>(rng.below(60)), 2, rng);
    TreeParams p;
    p.max_depth = 1 + static_cast<int>(rng.below(6));
    const Tree t = fit_tree(d.features, d.target, p, rng);
    const std::vector<double> x{rng.uniform(), rng.uniform()};
    const int leaf = leaf_id(t, x);
    double sum = 0.0;
    int count = 0;
    for (int i = 0; i < d.rows(); ++i) {
      if (leaf_id(t, row_span(d.features, i)) == leaf) {
        sum += d.target(i);
        ++count;
      }
    }
    REQUIRE(count > 0);
    CHECK(predict_tree(t, x) == doctest::Approx(sum / count).epsilon(1e-12));
  }
}

TEST_CASE("honest relabeling") {
  Rng rng(23);
  const Dataset d = testing::random_dataset(80, 2, rng);
  const Tree t = fit_tree(d.features, d.target, {}, rng);
  const Tree same = honest_relabel(t, d.features, d.target);
  for (int node = 0; node < t.node_count(); ++node) {
    if (t.is_leaf(node)) CHECK(same.value[node] == doctest::Approx(t.value[node]).epsilon(1e-12));
  }

  const Tree s = stump(0.5, 0.0, 0.0);
  const Dataset fold = from_arrays({{0.2}, {0.8}}, {2.0, 4.0});
  const Tree relabeled = honest_relabel(s, fold.features, fold.target);
  CHECK(relabeled.value[1] == 2.0);
  CHECK(relabeled.value[2] == 4.0);

  // No label row reaches the right leaf: it inherits the parent (root) mean.
  const Dataset lopsided = from_arrays({{0.1}, {0.3}}, {1.0, 3.0});
  const Tree fallback = honest_relabel(s, lopsided.features, lopsided.target);
  CHECK(fallback.value[1] == 2.0);
  CHECK(fallback.value[2] == 2.0);

  CHECK_THROWS_AS(honest_relabel(s, Matrix(0, 1), Vector(0)), Error);
}

TEST_CASE("too few samples for the leaf size") {
  const Dataset d = from_arrays({{0}, {1}, {2}}, {0, 1, 2});
  Rng rng(0);
  TreeParams p;
  p.min_samples_leaf = 2;
  try {
    fit_tree(d.features, d.target, p, rng);
    FAIL("expected TooFewSamples");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::TooFewSamples);
  }
}

TEST_CASE("json dump lists the node arrays") {
  const auto j = tree_to_json(stump(0.5, -1.0, 1.0));
  CHECK(j["feature"].size() == 3);
  CHECK(j["value"][0].is_null());
  CHECK(j["value"][2] == 1.0);
  CHECK(j["threshold"][0] == 0.5);
}

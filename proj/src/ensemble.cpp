#include "scate/ensemble.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <numeric>

#include "scate/error.hpp"

namespace scate {

namespace {

std::vector<int> draw_tree_sample(int n, const TreeParams& params, Rng& rng) {
  const int size = std::max(1, static_cast<int>(std::floor(params.subsample_fraction * n)));
  if (params.bootstrap) {
    std::vector<int> rows(size);
    for (auto& r : rows) r = static_cast<int>(rng.below(static_cast<std::uint64_t>(n)));
    return rows;
  }
  auto rows = rng.sample_without_replacement(n, size);
  std::sort(rows.begin(), rows.end());
  return rows;
}

void check_dims(int expected, std::size_t got) {
  if (static_cast<int>(got) != expected) {
    throw Error(ErrorCode::DimensionMismatch,
                "expected " + std::to_string(expected) + " features, got " + std::to_string(got));
  }
}

}  // namespace

Forest fit_rf(const Dataset& train, const ForestParams& params) {
  if (train.rows() == 0) throw Error(ErrorCode::EmptyTraining, "random forest needs training rows");
  if (params.n_trees < 1) throw Error(ErrorCode::Config, "n_trees must be >= 1");
  validate(params.tree, train.dims());

  const int n = train.rows();
  Forest forest;
  forest.params = params;
  forest.n_features = train.dims();
  forest.relabeled_on_full_train = !params.tree.honest;
  forest.trees.resize(params.n_trees);
  forest.tree_row_sets.resize(params.n_trees);
  if (params.tree.honest) forest.label_rows.resize(params.n_trees);

  std::vector<int> all_rows(n);
  std::iota(all_rows.begin(), all_rows.end(), 0);

  // Each tree owns a PRNG stream keyed by its index, so scheduling cannot change results.
  std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic)
  for (int b = 0; b < params.n_trees; ++b) {
    try {
      Rng rng(derive_seed(params.seed, {0x7265ULL, static_cast<std::uint64_t>(b)}));
      auto sample = draw_tree_sample(n, params.tree, rng);
      if (!params.tree.honest) {
        Tree tree = fit_tree(train.features, train.target, sample, params.tree, rng);
        forest.trees[b] = relabel(tree, train.features, train.target, all_rows);
        forest.tree_row_sets[b] = std::move(sample);
        continue;
      }
      std::sort(sample.begin(), sample.end());
      sample.erase(std::unique(sample.begin(), sample.end()), sample.end());
      rng.shuffle(sample);
      const auto half = static_cast<std::ptrdiff_t>(sample.size() / 2);
      std::vector<int> structure(sample.begin(), sample.begin() + half);
      std::vector<int> label(sample.begin() + half, sample.end());
      std::sort(structure.begin(), structure.end());
      std::sort(label.begin(), label.end());
      Tree tree = fit_tree(train.features, train.target, structure, params.tree, rng);
      forest.trees[b] = relabel(tree, train.features, train.target, label);
      forest.tree_row_sets[b] = std::move(structure);
      forest.label_rows[b] = std::move(label);
    } catch (...) {
#pragma omp critical(scate_fit_rf_failure)
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
  return forest;
}

double predict_rf(const Forest& forest, std::span<const double> x) {
  check_dims(forest.n_features, x.size());
  double sum = 0.0;
  for (const auto& tree : forest.trees) sum += predict_tree(tree, x);
  return sum / static_cast<double>(forest.trees.size());
}

Vector predict_rf(const Forest& forest, const Matrix& X) {
  Vector out(X.rows());
  for (Eigen::Index i = 0; i < X.rows(); ++i) out(i) = predict_rf(forest, row_span(X, i));
  return out;
}

GbmModel fit_gbm(const Dataset& train, const GbmParams& params) {
  if (train.rows() == 0) throw Error(ErrorCode::EmptyTraining, "boosting needs training rows");
  if (!(params.learning_rate > 0.0 && params.learning_rate <= 1.0)) {
    throw Error(ErrorCode::BadLearningRate, "learning rate must lie in (0, 1]");
  }
  if (params.n_trees < 0) throw Error(ErrorCode::Config, "n_trees must be >= 0");
  validate(params.tree, train.dims());

  GbmModel model;
  model.learning_rate = params.learning_rate;
  model.base_score = 0.0;
  model.params = params;
  model.n_features = train.dims();

  const int n = train.rows();
  Vector fitted = Vector::Zero(n);
  Vector residual(n);
  for (int b = 0; b < params.n_trees; ++b) {
    residual = train.target - fitted;
    Rng rng(derive_seed(params.seed, {0x6762ULL, static_cast<std::uint64_t>(b)}));
    Tree tree = fit_tree(train.features, residual, params.tree, rng);
    for (int i = 0; i < n; ++i) {
      fitted(i) += params.learning_rate * predict_tree(tree, row_span(train.features, i));
    }
    model.trees.push_back(std::move(tree));
  }
  return model;
}

double predict_gbm(const GbmModel& model, std::span<const double> x) {
  check_dims(model.n_features, x.size());
  double sum = 0.0;
  for (const auto& tree : model.trees) sum += predict_tree(tree, x);
  return model.base_score + model.learning_rate * sum;
}

Vector predict_gbm(const GbmModel& model, const Matrix& X) {
  Vector out(X.rows());
  for (Eigen::Index i = 0; i < X.rows(); ++i) out(i) = predict_gbm(model, row_span(X, i));
  return out;
}

Matrix per_tree_predictions(const Forest& forest, const Matrix& X) {
  Matrix out(X.rows(), forest.size());
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    for (int b = 0; b < forest.size(); ++b) out(i, b) = predict_tree(forest.trees[b], row_span(X, i));
  }
  return out;
}

Matrix per_tree_predictions(const GbmModel& model, const Matrix& X) {
  const auto B = static_cast<Eigen::Index>(model.trees.size());
  Matrix out(X.rows(), B);
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    for (Eigen::Index b = 0; b < B; ++b) {
      out(i, b) = model.learning_rate * predict_tree(model.trees[b], row_span(X, i));
    }
  }
  return out;
}

}  // namespace scate

#include "scate/distill.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "scate/error.hpp"
#include "scate/metrics.hpp"
#include "scate/model_io.hpp"
#include "scate/rng.hpp"

namespace scate {

namespace {

Vector normalized_weights(const Vector& spectrum) {
  Vector w = spectrum.array().square();
  const double peak = w.maxCoeff();
  if (peak > 0.0) {
    w /= peak;
  } else {
    w.setOnes();
  }
  return w;
}

struct NetworkFit {
  Mlp mlp;
  std::vector<LossTraceRow> trace;
};

// Adam on scate_loss over (shuffled) mini-batches; the trace records the size-weighted
// mean of the batch losses seen during each epoch.
NetworkFit fit_network(const Matrix& Xs, const Matrix& targets, const Vector& weights, double gamma,
                       const std::vector<int>& dims, const TrainHyper& hyper) {
  NetworkFit fit;
  fit.mlp = init_mlp(dims, derive_seed(hyper.seed, {0x696e6974ULL}));
  AdamState adam = AdamState::for_model(fit.mlp, hyper.lr);
  Rng shuffler(derive_seed(hyper.seed, {0x73687566ULL}));

  const int n = static_cast<int>(Xs.rows());
  const int batch = resolve_batch_size(hyper, n);
  std::vector<int> order(n);
  for (int i = 0; i < n; ++i) order[i] = i;

  ForwardCache cache;
  Matrix xb, tb;
  for (int epoch = 1; epoch <= hyper.epochs; ++epoch) {
    if (batch < n) shuffler.shuffle(order);
    LossTraceRow row{epoch, 0.0, 0.0, 0.0};
    for (int start = 0; start < n; start += batch) {
      const int size = std::min(batch, n - start);
      const Matrix* xin = &Xs;
      const Matrix* tin = &targets;
      if (size < n) {
        xb.resize(size, Xs.cols());
        tb.resize(size, targets.cols());
        for (int k = 0; k < size; ++k) {
          xb.row(k) = Xs.row(order[start + k]);
          tb.row(k) = targets.row(order[start + k]);
        }
        xin = &xb;
        tin = &tb;
      }
      const Matrix preds = forward(fit.mlp, *xin, cache);
      const LossValue loss = scate_loss(preds, *tin, weights, gamma);
      const MlpParams grads = backward(fit.mlp, cache, loss.grad);
      adam_step(fit.mlp, grads, adam);
      const double share = static_cast<double>(size) / n;
      row.weighted_mse += share * loss.weighted_mse;
      row.ortho_penalty += share * loss.ortho_penalty;
      row.total += share * loss.total;
    }
    fit.trace.push_back(row);
  }
  return fit;
}

Matrix scaled_input(const DistilledModel& model, std::span<const double> x) {
  if (static_cast<int>(x.size()) != model.mlp.input_dim()) {
    throw Error(ErrorCode::DimensionMismatch, "model expects " + std::to_string(model.mlp.input_dim()) +
                                                  " features, got " + std::to_string(x.size()));
  }
  Matrix row(1, static_cast<Eigen::Index>(x.size()));
  for (std::size_t j = 0; j < x.size(); ++j) row(0, static_cast<Eigen::Index>(j)) = x[j];
  return apply_scaling(row, model.scaling);
}

}  // namespace

int resolve_batch_size(const TrainHyper& hyper, int n) {
  if (hyper.batch_size > 0) return std::min(hyper.batch_size, n);
  if (n <= 16) return n;
  return n <= 4096 ? 16 : 256;
}

SpectralTargets make_targets(const EigenDecomposition& decomp, const Vector& y, int P) {
  if (P < 1 || P > decomp.rank()) throw Error(ErrorCode::RankTooLarge, "P exceeds the decomposition rank");
  if (y.size() != decomp.eigenvectors.rows()) throw Error(ErrorCode::ShapeMismatch, "label count differs");
  SpectralTargets t;
  t.targets = decomp.eigenvectors.leftCols(P);
  const Vector lambda = decomp.eigenvalues.head(P);
  t.coefficients = lambda.cwiseProduct(t.targets.transpose() * y);
  t.weights = normalized_weights(lambda);
  return t;
}

SpectralTargets make_targets(const SvdTriplet& decomp, const Vector& y, int P) {
  if (P < 1 || P > decomp.rank()) throw Error(ErrorCode::RankTooLarge, "P exceeds the decomposition rank");
  if (y.size() != decomp.V.rows()) throw Error(ErrorCode::ShapeMismatch, "label count differs");
  SpectralTargets t;
  t.targets = decomp.U.leftCols(P);
  const Vector sigma = decomp.sigma.head(P);
  const Matrix V = decomp.V.leftCols(P);
  t.coefficients = sigma.cwiseProduct(V.transpose() * y);
  t.weights = normalized_weights(sigma);
  return t;
}

LossValue scate_loss(const Matrix& preds, const Matrix& targets, const Vector& weights, double gamma) {
  if (preds.rows() != targets.rows() || preds.cols() != targets.cols() || weights.size() != preds.cols()) {
    throw Error(ErrorCode::ShapeMismatch, "preds, targets and weights disagree");
  }
  if (gamma < 0.0) throw Error(ErrorCode::ShapeMismatch, "gamma must be non-negative");
  const double n = static_cast<double>(preds.rows());
  LossValue out;
  const Matrix residual = preds - targets;
  const RowVector w = weights.transpose();
  out.weighted_mse = (residual.array().square().rowwise() * w.array()).sum() / n;
  out.grad = (2.0 / n) * (residual.array().rowwise() * w.array()).matrix();

  if (preds.cols() > 1) {
    Matrix gram = preds.transpose() * preds / n;
    gram.diagonal().setZero();
    out.ortho_penalty = gram.squaredNorm();
    if (gamma > 0.0) out.grad += gamma * (4.0 / n) * (preds * gram);
  }
  out.total = out.weighted_mse + gamma * out.ortho_penalty;
  return out;
}

TrainResult train_scate(const Matrix& X_train, const SpectralTargets& targets, const Architecture& arch,
                        const TrainHyper& hyper, Task task, const std::string& base_kind) {
  if (targets.targets.rows() != X_train.rows()) {
    throw Error(ErrorCode::ShapeMismatch, "targets have a different row count than X");
  }
  auto [Xs, stats] = standardize(X_train);
  const int P = static_cast<int>(targets.targets.cols());
  const auto dims = mlp_dims(static_cast<int>(X_train.cols()), arch.width, arch.depth, P);
  NetworkFit fit = fit_network(Xs, targets.targets, targets.weights, hyper.gamma, dims, hyper);

  TrainResult result;
  result.model.mlp = std::move(fit.mlp);
  result.model.coefficients = targets.coefficients;
  result.model.scaling = std::move(stats);
  result.model.task = task;
  result.model.p = P;
  result.model.provenance = {base_kind, hyper.seed, hyper.gamma, hyper.epochs};
  result.trace = std::move(fit.trace);
  return result;
}

Matrix spectral_embedding(const DistilledModel& model, const Matrix& X) {
  return forward(model.mlp, apply_scaling(X, model.scaling));
}

double predict_distilled(const DistilledModel& model, std::span<const double> x) {
  const Matrix out = forward(model.mlp, scaled_input(model, x));
  return out.row(0).dot(model.coefficients.transpose());
}

Vector predict_distilled(const DistilledModel& model, const Matrix& X) {
  if (X.cols() != model.mlp.input_dim()) throw Error(ErrorCode::DimensionMismatch, "feature count");
  return spectral_embedding(model, X) * model.coefficients;
}

int predict_label(const DistilledModel& model, std::span<const double> x) {
  return predict_distilled(model, x) >= 0.5 ? 1 : 0;
}

float predict_distilled_f32(const DistilledModel& model, std::span<const double> x) {
  if (static_cast<int>(x.size()) != model.mlp.input_dim()) {
    throw Error(ErrorCode::DimensionMismatch, "feature count");
  }
  std::vector<float> xs(x.size());
  for (std::size_t j = 0; j < x.size(); ++j) {
    const float mean = static_cast<float>(model.scaling.mean(static_cast<Eigen::Index>(j)));
    const float sd = static_cast<float>(model.scaling.std(static_cast<Eigen::Index>(j)));
    xs[j] = sd == 0.0f ? static_cast<float>(x[j]) : (static_cast<float>(x[j]) - mean) / sd;
  }
  const auto out = MlpF32::from(model.mlp).forward(xs);
  float acc = 0.0f;
  for (std::size_t j = 0; j < out.size(); ++j) acc += static_cast<float>(model.coefficients(static_cast<Eigen::Index>(j))) * out[j];
  return acc;
}

namespace {

OracleResult project_rows(const Matrix& cross, const Matrix& basis, const Vector& y) {
  OracleResult r;
  r.reconstruction = (cross * basis) * basis.transpose();
  r.frobenius_error = (cross - r.reconstruction).norm();
  r.predictions = r.reconstruction * y;
  return r;
}

Matrix kept_columns(const Matrix& vectors, const Vector& spectrum, int P) {
  const double cutoff = 1e-12 * std::abs(spectrum(0));
  std::vector<Eigen::Index> keep;
  for (int j = 0; j < P; ++j) {
    if (spectrum(j) > cutoff) keep.push_back(j);
  }
  Matrix basis(vectors.rows(), static_cast<Eigen::Index>(keep.size()));
  for (std::size_t k = 0; k < keep.size(); ++k) basis.col(static_cast<Eigen::Index>(k)) = vectors.col(keep[k]);
  return basis;
}

}  // namespace

OracleResult oracle_eval(const EigenDecomposition& decomp, const Matrix& K_cross, const Vector& y, int P) {
  if (P < 1 || P > decomp.rank()) throw Error(ErrorCode::RankTooLarge, "P exceeds the decomposition rank");
  if (K_cross.cols() != decomp.eigenvectors.rows() || y.size() != K_cross.cols()) {
    throw Error(ErrorCode::ShapeMismatch, "cross kernel columns must match training rows");
  }
  // W = K_cross Psi Lambda^-1 and C = Psi Lambda, so W_P C_P^T = K_cross Psi_P Psi_P^T.
  return project_rows(K_cross, kept_columns(decomp.eigenvectors, decomp.eigenvalues, P), y);
}

OracleResult oracle_eval(const SvdTriplet& decomp, const Matrix& S_cross, const Vector& y, int P) {
  if (P < 1 || P > decomp.rank()) throw Error(ErrorCode::RankTooLarge, "P exceeds the decomposition rank");
  if (S_cross.cols() != decomp.V.rows() || y.size() != S_cross.cols()) {
    throw Error(ErrorCode::ShapeMismatch, "cross smoother columns must match training rows");
  }
  return project_rows(S_cross, kept_columns(decomp.V, decomp.sigma, P), y);
}

double network_cross_error(const DistilledModel& model, const Matrix& X_query, const Matrix& K_cross,
                           const Vector& spectrum, const Matrix& basis) {
  const Matrix g = spectral_embedding(model, X_query);
  if (g.cols() != spectrum.size() || basis.cols() != spectrum.size()) {
    throw Error(ErrorCode::ShapeMismatch, "network outputs, spectrum and basis disagree");
  }
  const Matrix approx = (g * spectrum.asDiagonal()) * basis.transpose();
  return (K_cross - approx).norm();
}

TrainResult naive_mlp_distill(const Matrix& X_train, const Matrix& teacher, const Architecture& arch,
                              const TrainHyper& hyper, Task task) {
  if (teacher.rows() != X_train.rows() || teacher.cols() < 1) {
    throw Error(ErrorCode::ShapeMismatch, "teacher outputs must have one row per training row");
  }
  auto [Xs, stats] = standardize(X_train);
  const double mu = teacher.mean();
  const double sd = std::sqrt((teacher.array() - mu).square().mean());
  const Matrix scaled = (teacher.array() - mu) / (sd > 0.0 ? sd : 1.0);
  const int B = static_cast<int>(teacher.cols());
  const auto dims = mlp_dims(static_cast<int>(X_train.cols()), arch.width, arch.depth, B);
  NetworkFit fit = fit_network(Xs, scaled, Vector::Ones(B), 0.0, dims, hyper);

  // mean_b(sd * (h W_b + b_b) + mu) = h (sd * mean_b W_b) + (sd * mean_b b_b + mu)
  Mlp& mlp = fit.mlp;
  Matrix& W = mlp.weights.back();
  Vector& bias = mlp.biases.back();
  Matrix folded = sd * W.rowwise().mean();
  Vector folded_bias(1);
  folded_bias(0) = sd * bias.mean() + mu;
  W = std::move(folded);
  bias = std::move(folded_bias);
  mlp.dims.back() = 1;

  TrainResult result;
  result.model.mlp = std::move(mlp);
  result.model.coefficients = Vector::Ones(1);
  result.model.scaling = std::move(stats);
  result.model.task = task;
  result.model.p = 1;
  result.model.provenance = {"naive_mlp", hyper.seed, 0.0, hyper.epochs};
  result.trace = std::move(fit.trace);
  return result;
}

std::vector<NaiveRfPoint> naive_small_rf(const Dataset& train, const Dataset& eval, const NaiveRfGrid& grid,
                                         std::uint64_t seed) {
  std::vector<NaiveRfPoint> points;
  for (int n_est : grid.n_estimators) {
    for (const auto& depth : grid.max_depth) {
      ForestParams params;
      params.n_trees = n_est;
      params.tree.max_depth = depth;
      // Shared across depths so deeper cells extend the same bootstrap trees.
      params.seed = derive_seed(seed, {0x6e7266ULL, static_cast<std::uint64_t>(n_est)});
      NaiveRfPoint point;
      point.n_estimators = n_est;
      point.max_depth = depth;
      point.forest = fit_rf(train, params);
      point.size_bytes = measure_size(point.forest);
      point.score = task_metric(train.task, eval.target, predict_rf(point.forest, eval.features));
      points.push_back(std::move(point));
    }
  }
  return points;
}

void write_loss_trace(const std::vector<LossTraceRow>& trace, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  out.precision(17);
  out << "epoch,weighted_mse,ortho_penalty,total\n";
  for (const auto& r : trace) {
    out << r.epoch << ',' << r.weighted_mse << ',' << r.ortho_penalty << ',' << r.total << '\n';
  }
}

}  // namespace scate

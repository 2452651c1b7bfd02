#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "scate/data.hpp"
#include "scate/ensemble.hpp"
#include "scate/mlp.hpp"
#include "scate/spectral.hpp"

namespace scate {

// What the network learns: column j of `targets` is the j-th eigenvector (forest) or left
// singular vector (boosting). Loss weights are the squared spectrum scaled to max 1.
struct SpectralTargets {
  Matrix targets;
  Vector weights;
  Vector coefficients;
};

struct Provenance {
  std::string base_kind;  // "rf", "gbm", "rf-naive", ...
  std::uint64_t seed = 0;
  double gamma = 0.0;
  int epochs = 0;
};

// Prediction = coefficients . mlp(standardized x).
struct DistilledModel {
  Mlp mlp;
  Vector coefficients;
  ScalingStats scaling;
  Task task = Task::Regression;
  int p = 0;
  Provenance provenance;
};

struct Architecture {
  int width = 16;
  int depth = 2;
};

struct TrainHyper {
  int epochs = 200;
  double gamma = 1e-3;
  double lr = 1e-3;
  std::uint64_t seed = 0;
  int batch_size = 0;  // 0 selects the default rule in resolve_batch_size
};

int resolve_batch_size(const TrainHyper& hyper, int n);

struct LossTraceRow {
  int epoch = 0;
  double weighted_mse = 0.0;
  double ortho_penalty = 0.0;
  double total = 0.0;
};

struct TrainResult {
  DistilledModel model;
  std::vector<LossTraceRow> trace;
};

SpectralTargets make_targets(const EigenDecomposition& decomp, const Vector& y, int P);
SpectralTargets make_targets(const SvdTriplet& decomp, const Vector& y, int P);

struct LossValue {
  double weighted_mse = 0.0;
  double ortho_penalty = 0.0;
  double total = 0.0;
  Matrix grad;  // d total / d preds
};

// (1/N) sum_ij w_j (preds_ij - targets_ij)^2 + gamma * sum_{j != k} G_jk^2 with
// G = preds^T preds / N.
LossValue scate_loss(const Matrix& preds, const Matrix& targets, const Vector& weights, double gamma);

TrainResult train_scate(const Matrix& X_train, const SpectralTargets& targets, const Architecture& arch,
                        const TrainHyper& hyper, Task task = Task::Regression,
                        const std::string& base_kind = "rf");

double predict_distilled(const DistilledModel& model, std::span<const double> x);
Vector predict_distilled(const DistilledModel& model, const Matrix& X);
int predict_label(const DistilledModel& model, std::span<const double> x);
// Network outputs (spectral coordinates) for a batch of raw inputs.
Matrix spectral_embedding(const DistilledModel& model, const Matrix& X);
// Inference with every parameter and operation in single precision.
float predict_distilled_f32(const DistilledModel& model, std::span<const double> x);

struct OracleResult {
  double frobenius_error = 0.0;
  Vector predictions;
  Matrix reconstruction;
};

// Least-squares rank-P reconstruction of the cross kernel from the scaled training
// eigenvectors; a lower bound on the Frobenius error of any rank-P distillation.
OracleResult oracle_eval(const EigenDecomposition& decomp, const Matrix& K_cross, const Vector& y, int P);
OracleResult oracle_eval(const SvdTriplet& decomp, const Matrix& S_cross, const Vector& y, int P);

// || K_cross - g(X_query) diag(spectrum_P) basis_P^T ||_F for a trained network.
double network_cross_error(const DistilledModel& model, const Matrix& X_query, const Matrix& K_cross,
                           const Vector& spectrum, const Matrix& basis);

// Baseline: same network trained on the teacher's per-tree outputs (one column per tree)
// with uniform weights and no penalty. The averaging over outputs and the target
// normalization are folded into the output layer, so the result has a single output.
TrainResult naive_mlp_distill(const Matrix& X_train, const Matrix& teacher, const Architecture& arch,
                              const TrainHyper& hyper, Task task = Task::Regression);

struct NaiveRfPoint {
  int n_estimators = 0;
  std::optional<int> max_depth;
  Forest forest;
  std::size_t size_bytes = 0;
  double score = 0.0;
};

struct NaiveRfGrid {
  std::vector<int> n_estimators{10, 50, 100, 200, 500};
  std::vector<std::optional<int>> max_depth{3, 4, 5, 6, 7, 8, 9, std::nullopt};
};

// Trains every grid cell on `train`, scores it on `eval`.
std::vector<NaiveRfPoint> naive_small_rf(const Dataset& train, const Dataset& eval, const NaiveRfGrid& grid,
                                         std::uint64_t seed);

void write_loss_trace(const std::vector<LossTraceRow>& trace, const std::filesystem::path& path);

}  // namespace scate

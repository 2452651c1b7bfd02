#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "scate/cli/config.hpp"
#include "scate/distill.hpp"
#include "scate/operator.hpp"
#include "scate/spectral.hpp"

namespace scate::cli {

// Everything a run needs up to (and including) the spectral targets, shared by the
// pipeline and every sweep cell of one seed.
struct RunContext {
  std::uint64_t seed = 0;
  BaseKind kind = BaseKind::Rf;
  Task task = Task::Regression;
  Dataset train, validation, test;
  Dataset op;  // training rows that define the operator (all of train unless capped)
  std::optional<Forest> forest;
  std::optional<GbmModel> gbm;         // fitted on all training rows
  std::optional<GbmModel> gbm_op;      // refit on `op` when the cap subsamples
  std::optional<SmootherState> smoother;
  std::optional<EigenDecomposition> eig;
  std::optional<SvdTriplet> svd;
  Vector spectrum;  // eigenvalues or singular values, descending
  DecayFit decay;
  SpectralTargets targets;
  Matrix cross;  // test rows x op rows
  OracleResult oracle;
  double base_metric = 0.0;
  std::size_t base_size = 0;
  double base_fit_s = 0.0;
  int p = 0;

  Vector spectrum_p() const { return spectrum.head(p); }
  Matrix basis_p() const;
  Vector base_predict(const Matrix& X) const;
  Matrix teacher_outputs(bool scalar) const;
};

// Operator, decomposition and decay fit only (no targets or oracle).
RunContext build_operator(const RunConfig& config, const Dataset& data, std::uint64_t seed);
RunContext build_context(const RunConfig& config, const Dataset& data, std::uint64_t seed);

struct CellResult {
  TrainResult trained;
  double metric = 0.0;
  double network_error = 0.0;
  std::size_t size_bytes = 0;
  double wall_train_s = 0.0;
  double wall_infer_s_per_1k = 0.0;
};

CellResult run_scate_cell(const RunContext& ctx, const RunConfig& config, Architecture arch);
CellResult run_naive_mlp_cell(const RunContext& ctx, const RunConfig& config, Architecture arch);

struct PipelineResult {
  nlohmann::json report;
  nlohmann::json timing;
  CellResult cell;
};

// Writes report.json, timing.json, spectrum.csv, loss_trace.csv and model.scte under
// config.output_dir.
PipelineResult cmd_pipeline(const RunConfig& config);

struct SweepRecord {
  std::string method;
  std::string cell;
  std::uint64_t seed = 0;
  std::optional<std::size_t> size_bytes;
  std::optional<double> metric;
  double wall_train_s = 0.0;
  double wall_infer_s_per_1k = 0.0;
  std::string status = "ok";
};

struct BestRow {
  std::size_t budget = 0;
  std::string method;
  std::optional<std::string> cell;  // empty -> NA
  std::optional<std::size_t> size_bytes;
  std::optional<double> mean_metric;
  std::optional<double> std_error;
  int n_seeds = 0;
};

struct ParetoPoint {
  std::string method;
  std::string cell;
  std::size_t size_bytes = 0;
  double mean_metric = 0.0;
};

struct SeedBest {
  std::size_t budget = 0;
  SweepRecord record;
};

struct SweepResult {
  std::vector<SweepRecord> records;
  std::vector<BestRow> best;
  std::vector<SeedBest> best_per_seed;  // one per (budget, method, seed) that fits
  std::vector<ParetoPoint> pareto;
};

SweepResult run_sweep(const RunConfig& config);
// Budget selection and frontier extraction over finished records.
std::vector<BestRow> best_under_budget(const std::vector<SweepRecord>& records,
                                       const std::vector<std::size_t>& budgets);
std::vector<SeedBest> best_per_seed(const std::vector<SweepRecord>& records,
                                    const std::vector<std::size_t>& budgets);
std::vector<ParetoPoint> pareto_frontier(const std::vector<SweepRecord>& records);
// Writes sweep_records.csv, best.csv, best_per_seed.csv and pareto.csv.
SweepResult cmd_sweep(const RunConfig& config);

void write_records_csv(const std::vector<SweepRecord>& records, const std::filesystem::path& path);
std::vector<SweepRecord> read_records_csv(const std::filesystem::path& path);
void write_best_csv(const std::vector<BestRow>& rows, const std::filesystem::path& path);
std::vector<BestRow> read_best_csv(const std::filesystem::path& path);

struct SpectrumResult {
  Vector values;  // top min(100, rank)
  DecayFit fit;
  bool c2_satisfied = false;
  nlohmann::json summary;
};

SpectrumResult spectrum_of_matrix(const Matrix& M);
// Writes spectrum.csv and spectrum.json.
SpectrumResult cmd_spectrum(const RunConfig& config);

struct TimingRow {
  std::string method;
  std::string cell;
  std::size_t size_bytes = 0;
  std::string size_bucket;
  double train_s_median = 0.0;
  double infer_s_per_1k_median = 0.0;
  std::vector<double> infer_s_per_1k;
};

// Writes timing.csv.
std::vector<TimingRow> cmd_bench_time(const RunConfig& config);

std::string size_bucket(std::size_t bytes);

// Entry point of the `scate` executable; returns the process exit code.
int run(int argc, const char* const* argv);

}  // namespace scate::cli

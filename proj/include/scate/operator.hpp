#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "scate/ensemble.hpp"
#include "scate/parallel_kernels.hpp"
#include "scate/types.hpp"

namespace scate {

// Forest kernel over the training rows: symmetric and doubly stochastic in the default
// (full-train relabeled) mode.
struct KernelMatrix {
  Matrix values;
  int n = 0;
  std::uint64_t forest_ref = 0;
};

std::uint64_t fingerprint(const Forest& forest);

// Weight groups of every tree over the normalization rows of X_train. A leaf with no
// normalization rows borrows its nearest populated ancestor (honest or subsampled use).
std::vector<kernels::TreeGroups> forest_groups(const Forest& forest, const Matrix& X_train,
                                               const Matrix& X_rows);

KernelMatrix rf_kernel_matrix(const Forest& forest, const Matrix& X_train);
KernelMatrix rf_kernel_matrix_serial(const Forest& forest, const Matrix& X_train);
Matrix rf_kernel_cross(const Forest& forest, const Matrix& X_train, const Matrix& X_query);

struct KernelDiagnostics {
  double max_asymmetry = 0.0;
  double max_row_sum_error = 0.0;
  double max_col_sum_error = 0.0;
  double min_entry = 0.0;
  double max_entry = 0.0;
};
KernelDiagnostics diagnose_kernel(const Matrix& K);

struct SmootherRound {
  std::vector<int> group_of_node;          // leaf node -> row of correction, -1 elsewhere
  std::vector<std::vector<int>> members;   // training rows per leaf group
  Matrix correction;                       // R_b: one row per leaf group, N columns
};

struct SmootherState {
  Matrix matrix;  // stacked smoothing weights of the training rows
  std::vector<SmootherRound> rounds;
  double eta = 0.0;
};

SmootherState gbm_smoother_matrix(const GbmModel& model, const Matrix& X_train);
SmootherState gbm_smoother_matrix_serial(const GbmModel& model, const Matrix& X_train);
Vector gbm_smoother_row(const SmootherState& state, const GbmModel& model, std::span<const double> x);
Matrix gbm_smoother_rows(const SmootherState& state, const GbmModel& model, const Matrix& X);

// All rows when n <= cap, otherwise `cap` distinct rows drawn uniformly (sorted).
std::vector<int> subsample_operator(const std::vector<int>& rows, int cap, std::uint64_t seed);

// Raw matrix export: "SCTEMAT0", u64 rows, u64 cols, f64 little-endian row-major.
void write_matrix(const Matrix& M, const std::filesystem::path& path);
Matrix read_matrix(const std::filesystem::path& path);
std::vector<std::uint8_t> encode_matrix(const Matrix& M);
Matrix decode_matrix(std::span<const std::uint8_t> bytes);

}  // namespace scate

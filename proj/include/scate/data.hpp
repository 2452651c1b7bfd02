#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "scate/types.hpp"

namespace scate {

enum class Task { Regression, BinaryClassification };
enum class ColumnKind { Numeric, Categorical };

std::string_view to_string(Task task);
Task parse_task(std::string_view name);

struct Dataset {
  Matrix features;  // N x d, post-encoding
  Vector target;
  Task task = Task::Regression;
  std::vector<std::string> feature_names;  // one per encoded column
  std::vector<ColumnKind> column_kinds;    // one per raw (pre-encoding) feature column

  int rows() const { return static_cast<int>(features.rows()); }
  int dims() const { return static_cast<int>(features.cols()); }

  Dataset subset(const std::vector<int>& rows) const;
};

struct SplitIndices {
  std::vector<int> train;
  std::vector<int> validation;
  std::vector<int> test;
  std::uint64_t seed = 0;
};

struct SplitRatios {
  double train = 0.70;
  double validation = 0.15;
  double test = 0.15;
};

// Reads an RFC-4180 CSV whose first row is a header. Rows with any missing cell
// (empty, "NA", "NaN" or "?") are dropped. Non-numeric columns are one-hot encoded
// with categories in lexicographic order.
Dataset load_csv(const std::filesystem::path& path, const std::string& target_column, Task task);
Dataset parse_csv(std::string_view text, const std::string& target_column, Task task);

void write_csv(const Dataset& data, const std::filesystem::path& path,
               const std::string& target_name = "target");

SplitIndices split(int n, const SplitRatios& ratios, std::uint64_t seed);

// y = 10 sin(pi x1 x2) + 20 (x3 - 0.5)^2 + 10 x4 + 5 x5 on the first five coordinates.
double friedman1_response(std::span<const double> x);
Dataset gen_friedman1(int n, int d, double noise_sd, std::uint64_t seed);

struct ScalingStats {
  Vector mean;
  Vector std;  // population std; 0 marks a constant column that passes through
};

ScalingStats fit_scaling(const Matrix& features);
Matrix apply_scaling(const Matrix& features, const ScalingStats& stats);
// Fits statistics when none are supplied, then applies them.
std::pair<Matrix, ScalingStats> standardize(const Matrix& features,
                                            const std::optional<ScalingStats>& stats = {});

}  // namespace scate

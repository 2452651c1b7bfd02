#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "scate/data.hpp"
#include "scate/distill.hpp"
#include "scate/ensemble.hpp"

namespace scate::cli {

enum class BaseKind { Rf, Gbm };

std::string_view to_string(BaseKind kind);

struct SyntheticSpec {
  int n = 1000;
  int d = 10;
  double noise_sd = 1.0;
  std::uint64_t seed = 0;
};

struct DataSource {
  std::optional<std::filesystem::path> csv;
  std::string target = "target";
  Task task = Task::Regression;
  SyntheticSpec synthetic;
  // A raw SCTEMAT0 matrix, used only by `spectrum`.
  std::optional<std::filesystem::path> matrix;
};

struct RunConfig {
  DataSource data;
  BaseKind base = BaseKind::Rf;
  int rf_trees = 250;
  std::optional<int> rf_max_depth = 15;
  int rf_min_samples_leaf = 1;
  int rf_mtry = 0;
  bool rf_honest = false;
  int gbm_trees = 100;
  std::optional<int> gbm_max_depth = 6;
  double gbm_learning_rate = 0.1;

  int p = 50;
  int operator_cap = 4000;
  SplitRatios ratios;

  Architecture arch;  // single run (pipeline, bench-time)
  std::vector<int> widths{4, 8, 16, 32, 64, 128};
  std::vector<int> depths{1, 2, 3, 4, 5};
  int epochs = 200;
  double gamma = 1e-3;
  double lr = 1e-3;
  int batch_size = 0;
  bool naive_scalar_target = false;

  std::uint64_t seed = 0;               // pipeline
  std::vector<std::uint64_t> seeds{0};  // sweep
  std::vector<std::size_t> budgets{10240, 102400};
  std::vector<std::string> methods{"scate", "naive_mlp", "naive_rf", "oracle", "base"};
  NaiveRfGrid naive_rf_grid;
  // Skip grid cells whose (pre-computable) size exceeds the largest budget.
  bool prune_to_budget = false;
  int bench_repetitions = 5;
  std::filesystem::path output_dir = "scate_out";

  ForestParams forest_params(std::uint64_t run_seed) const;
  GbmParams gbm_params(std::uint64_t run_seed) const;
  TrainHyper train_hyper(std::uint64_t run_seed) const;
};

// Throws Error(Config) on unknown keys, wrong types or invalid values.
RunConfig config_from_json(const nlohmann::json& j, RunConfig base = {});
nlohmann::json config_to_json(const RunConfig& config);
RunConfig load_config(const std::filesystem::path& path);
void validate(RunConfig& config);

Dataset load_dataset(const RunConfig& config);

}  // namespace scate::cli

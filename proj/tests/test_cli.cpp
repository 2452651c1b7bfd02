#include <doctest.h>

#include <sys/wait.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "scate/cli/commands.hpp"
#include "scate/error.hpp"
#include "scate/model_io.hpp"
#include "support.hpp"

using namespace scate;
using namespace scate::cli;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("scate_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

RunConfig small_config(const fs::path& out) {
  RunConfig c;
  c.data.synthetic.n = 300;
  c.data.synthetic.d = 5;
  c.rf_trees = 20;
  c.rf_max_depth = 8;
  c.gbm_trees = 20;
  c.gbm_max_depth = 3;
  c.p = 10;
  c.epochs = 10;
  c.output_dir = out;
  return c;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int run_args(std::vector<std::string> args) {
  std::vector<const char*> argv{"scate"};
  for (const auto& a : args) argv.push_back(a.c_str());
  return scate::cli::run(static_cast<int>(argv.size()), argv.data());
}

int run_binary(const std::string& args) {
  const char* exe = std::getenv("SCATE_CLI");
  REQUIRE(exe != nullptr);
  const int status = std::system((std::string(exe) + " " + args + " >/dev/null 2>&1").c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

SweepRecord rec(std::string method, std::string cell, std::uint64_t seed, std::size_t size, double metric) {
  return {std::move(method), std::move(cell), seed, size, metric, 0.0, 0.0, "ok"};
}

}  // namespace

TEST_CASE("config parsing") {
  const auto j = nlohmann::json::parse(R"({
    "data": {"synthetic": {"n": 123, "d": 6, "noise_sd": 0.5, "seed": 9}},
    "base": {"kind": "gbm", "gbm": {"n_trees": 7, "max_depth": 2, "learning_rate": 0.5}},
    "p": 6, "arch": {"width": 8, "depth": 3},
    "train": {"epochs": 4, "gamma": 0.0, "batch_size": 32},
    "seeds": [3, 1], "budgets": [102400, 10240, 10240],
    "naive_rf_grid": {"n_estimators": [5], "max_depth": [2, null]}
  })");
  RunConfig c = config_from_json(j);
  validate(c);
  CHECK(c.data.synthetic.n == 123);
  CHECK(c.data.synthetic.noise_sd == 0.5);
  CHECK(c.base == BaseKind::Gbm);
  CHECK(c.gbm_trees == 7);
  CHECK(c.gbm_learning_rate == 0.5);
  CHECK(c.p == 6);
  CHECK(c.arch.width == 8);
  CHECK(c.arch.depth == 3);
  CHECK(c.epochs == 4);
  CHECK(c.gamma == 0.0);
  CHECK(c.batch_size == 32);
  CHECK(c.budgets == std::vector<std::size_t>{10240, 102400});
  CHECK(c.naive_rf_grid.max_depth.size() == 2);
  CHECK_FALSE(c.naive_rf_grid.max_depth[1].has_value());
  CHECK(config_from_json(config_to_json(c)).p == 6);
  CHECK(config_to_json(config_from_json(config_to_json(c))) == config_to_json(c));

  RunConfig defaults;
  CHECK(defaults.epochs == 200);
  CHECK(defaults.gamma == 1e-3);
  CHECK(defaults.lr == 1e-3);
  CHECK(defaults.p == 50);
  CHECK(defaults.rf_trees == 250);
  CHECK(defaults.rf_max_depth == 15);
  CHECK(defaults.operator_cap == 4000);
}

TEST_CASE("config errors") {
  auto code = [](const char* text) {
    try {
      RunConfig c = config_from_json(nlohmann::json::parse(text));
      validate(c);
    } catch (const Error& e) {
      return e.code();
    }
    return ErrorCode::Io;
  };
  CHECK(code(R"({"bogus": 1})") == ErrorCode::Config);
  CHECK(code(R"({"train": {"epoch": 3}})") == ErrorCode::Config);
  CHECK(code(R"({"p": "ten"})") == ErrorCode::Config);
  CHECK(code(R"({"p": 0})") == ErrorCode::Config);
  CHECK(code(R"({"base": {"kind": "svm"}})") == ErrorCode::Config);
  CHECK(code(R"({"methods": ["scate", "magic"]})") == ErrorCode::Config);
  CHECK(code(R"({"budgets": []})") == ErrorCode::Config);
  CHECK_THROWS_AS(load_config("/nonexistent/scate.json"), Error);
}

TEST_CASE("exit codes of the executable") {
  const fs::path dir = scratch("exit");
  CHECK(run_binary("--help") == 0);
  CHECK(run_binary("") == 2);
  CHECK(run_binary("frobnicate") == 2);
  CHECK(run_binary("pipeline --p notanumber") == 2);
  std::ofstream(dir / "bad.json") << R"({"nope": true})";
  CHECK(run_binary("pipeline -c " + (dir / "bad.json").string()) == 2);
  CHECK(run_binary("pipeline --csv " + (dir / "missing.csv").string() + " -o " + dir.string()) == 1);
  CHECK(run_binary("inspect-model " + (dir / "missing.scte").string()) == 1);
  CHECK(run_binary("gen-data --n 50 --d 5 -o " + dir.string()) == 0);
  CHECK(fs::exists(dir / "data.csv"));
  CHECK(run_binary("pipeline --csv " + (dir / "data.csv").string() +
                   " --trees 5 --p 5 --epochs 2 --width 4 --depth 1 -o " + (dir / "run").string()) == 0);
  CHECK(fs::exists(dir / "run" / "report.json"));
}

TEST_CASE("pipeline on Friedman data, seed 7") {
  const fs::path dir = scratch("pipeline");
  RunConfig c;
  c.data.synthetic.n = 1000;
  c.seed = 7;
  c.epochs = 20;
  c.output_dir = dir / "a";
  const auto r = cmd_pipeline(c);
  for (const char* f : {"report.json", "timing.json", "spectrum.csv", "loss_trace.csv", "model.scte"}) {
    CHECK(fs::exists(c.output_dir / f));
  }
  const auto report = nlohmann::json::parse(slurp(c.output_dir / "report.json"));
  CHECK(report == r.report);
  CHECK(report["metric"] == "r2");
  CHECK(report["n_train"] == 700);
  for (const char* k : {"base_metric", "distilled_metric", "oracle_metric_at_p"}) {
    CHECK(std::isfinite(report[k].get<double>()));
  }
  CHECK(report["sizes"]["distilled_bytes"] == 5511);
  CHECK(report["sizes"]["distilled_bytes"] == fs::file_size(c.output_dir / "model.scte"));
  CHECK(report["frobenius_errors"]["oracle"].get<double>() <= report["frobenius_errors"]["network"].get<double>());
  CHECK(report["sizes"]["compression_factor"].get<double>() > 100.0);

  c.output_dir = dir / "b";
  cmd_pipeline(c);
  for (const char* f : {"report.json", "spectrum.csv", "loss_trace.csv", "model.scte"}) {
    CHECK(slurp(dir / "a" / f) == slurp(dir / "b" / f));
  }
  const auto inspected = run_args({"inspect-model", (dir / "a" / "model.scte").string()});
  CHECK(inspected == 0);
}

TEST_CASE("pipeline metrics follow the task") {
  const fs::path dir = scratch("task");
  Dataset d = gen_friedman1(300, 5, 1.0, 3);
  for (Eigen::Index i = 0; i < d.target.size(); ++i) d.target(i) = d.target(i) > 14.0 ? 1.0 : 0.0;
  d.task = Task::BinaryClassification;
  write_csv(d, dir / "cls.csv");
  RunConfig c = small_config(dir / "out");
  c.data.csv = dir / "cls.csv";
  c.data.task = Task::BinaryClassification;
  const auto r = cmd_pipeline(c);
  CHECK(r.report["metric"] == "accuracy");
  const double acc = r.report["distilled_metric"];
  CHECK(acc >= 0.0);
  CHECK(acc <= 1.0);
  CHECK(std::abs(acc * r.report["n_test"].get<int>() - std::round(acc * r.report["n_test"].get<int>())) <= 1e-9);

  RunConfig g = small_config(dir / "gbm");
  g.base = BaseKind::Gbm;
  const auto rg = cmd_pipeline(g);
  CHECK(rg.report["metric"] == "r2");
  CHECK(rg.report["base_kind"] == "gbm");
  CHECK(std::isfinite(rg.report["distilled_metric"].get<double>()));
}

TEST_CASE("single-cell sweep") {
  const fs::path dir = scratch("sweep1");
  RunConfig c = small_config(dir);
  c.methods = {"scate"};
  c.widths = {16};
  c.depths = {2};
  c.budgets = {10240};
  const auto r = cmd_sweep(c);
  REQUIRE(r.records.size() == 1);
  CHECK(r.records[0].cell == "w16_d2");
  CHECK(r.records[0].status == "ok");
  REQUIRE(r.best.size() == 1);
  CHECK(r.best[0].cell == "w16_d2");
  CHECK(r.best[0].n_seeds == 1);
  for (const char* f : {"sweep_records.csv", "best.csv", "best_per_seed.csv", "pareto.csv"}) CHECK(fs::exists(dir / f));
  const auto back = read_records_csv(dir / "sweep_records.csv");
  REQUIRE(back.size() == 1);
  CHECK(back[0].metric == r.records[0].metric);
  CHECK(back[0].size_bytes == r.records[0].size_bytes);
}

TEST_CASE("multi-method sweep respects budgets") {
  const fs::path dir = scratch("sweep2");
  RunConfig c = small_config(dir);
  c.widths = {4, 32};
  c.depths = {1, 2};
  c.seeds = {0, 1};
  c.budgets = {2000, 10240};
  c.naive_rf_grid.n_estimators = {5};
  c.naive_rf_grid.max_depth = {2, std::nullopt};
  const auto r = cmd_sweep(c);
  for (const auto& row : r.best) {
    if (row.size_bytes) CHECK(*row.size_bytes <= row.budget);
    CHECK(row.method != "oracle");
  }
  for (const auto& sb : r.best_per_seed) CHECK(*sb.record.size_bytes <= sb.budget);
  const auto back = read_best_csv(dir / "best.csv");
  REQUIRE(back.size() == r.best.size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    CHECK(back[i].method == r.best[i].method);
    CHECK(back[i].cell == r.best[i].cell);
    CHECK(back[i].mean_metric == r.best[i].mean_metric);
  }
  const auto records = read_records_csv(dir / "sweep_records.csv");
  REQUIRE(records.size() == r.records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    CHECK(records[i].metric == r.records[i].metric);
    CHECK(records[i].size_bytes == r.records[i].size_bytes);
  }
  CHECK(std::any_of(r.records.begin(), r.records.end(), [](const SweepRecord& x) { return x.method == "oracle"; }));
  CHECK(std::any_of(r.records.begin(), r.records.end(), [](const SweepRecord& x) { return x.method == "naive_rf"; }));
}

TEST_CASE("NA when nothing fits") {
  const std::vector<SweepRecord> records{rec("scate", "w4_d1", 0, 900, 0.5), rec("naive_mlp", "w4_d1", 0, 700, 0.4)};
  const auto rows = best_under_budget(records, {100, 800});
  REQUIRE(rows.size() == 4);
  CHECK(rows[0].method == "scate");
  CHECK_FALSE(rows[0].cell.has_value());
  CHECK_FALSE(rows[0].mean_metric.has_value());
  CHECK_FALSE(rows[1].cell.has_value());
  CHECK_FALSE(rows[2].cell.has_value());
  CHECK(rows[3].cell == "w4_d1");
  const fs::path dir = scratch("na");
  write_best_csv(rows, dir / "best.csv");
  CHECK(slurp(dir / "best.csv").find("100,scate,NA,NA,NA") != std::string::npos);
  const auto back = read_best_csv(dir / "best.csv");
  CHECK_FALSE(back[0].cell.has_value());
}

TEST_CASE("selection averages over seeds and sizes by the largest seed") {
  const std::vector<SweepRecord> records{
      rec("scate", "a", 0, 100, 0.9), rec("scate", "a", 1, 120, 0.5),  // mean 0.7, size 120
      rec("scate", "b", 0, 110, 0.6), rec("scate", "b", 1, 110, 0.6),  // mean 0.6
  };
  const auto at115 = best_under_budget(records, {115});
  CHECK(at115[0].cell == "b");
  const auto at120 = best_under_budget(records, {120});
  CHECK(at120[0].cell == "a");
  CHECK(*at120[0].mean_metric == doctest::Approx(0.7));
  CHECK(*at120[0].std_error == doctest::Approx(0.2));
  CHECK(at120[0].n_seeds == 2);
  const auto per_seed = best_per_seed(records, {115});
  REQUIRE(per_seed.size() == 2);
  CHECK(per_seed[0].record.cell == "a");
  CHECK(per_seed[1].record.cell == "b");
}

TEST_CASE("Pareto points are not dominated") {
  Rng rng(5);
  std::vector<SweepRecord> records;
  for (int i = 0; i < 200; ++i) {
    records.push_back(rec(rng.below(2) ? "scate" : "naive_rf", "c" + std::to_string(i), 0, 100 + rng.below(1000),
                          rng.uniform()));
  }
  const auto front = pareto_frontier(records);
  CHECK_FALSE(front.empty());
  for (const auto& p : front) {
    for (const auto& r : records) {
      if (r.method != p.method) continue;
      const bool dominates = *r.size_bytes <= p.size_bytes && *r.metric >= p.mean_metric &&
                             (*r.size_bytes < p.size_bytes || *r.metric > p.mean_metric);
      CHECK_FALSE(dominates);
    }
  }
}

TEST_CASE("spectrum of a planted power law") {
  Rng rng(6);
  const int n = 150;
  Vector values(n);
  for (int i = 0; i < n; ++i) values(i) = std::pow(i + 1.0, -2.0);
  const Matrix A = testing::random_matrix(n, n, rng);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr{Eigen::MatrixXd(A)};
  const Matrix Q = Eigen::MatrixXd(qr.householderQ());
  const Matrix K = Q * values.asDiagonal() * Q.transpose();
  const fs::path dir = scratch("spectrum");
  write_matrix(K, dir / "planted.bin");
  RunConfig c;
  c.data.matrix = dir / "planted.bin";
  c.output_dir = dir;
  const auto r = cmd_spectrum(c);
  CHECK(r.fit.beta == doctest::Approx(2.0).epsilon(1e-6));
  CHECK(r.c2_satisfied);
  CHECK(r.values.size() == 100);
  CHECK(r.summary["c2_satisfied"] == true);
  std::ifstream in(dir / "spectrum.csv");
  std::string line;
  int rows = 0;
  while (std::getline(in, line)) {
    if (!line.empty() && std::isdigit(static_cast<unsigned char>(line[0]))) ++rows;
  }
  CHECK(rows <= 100);
  CHECK(fs::exists(dir / "spectrum.json"));

  const auto id = spectrum_of_matrix(Matrix::Identity(40, 40));
  CHECK(std::abs(id.fit.beta) <= 1e-12);
  CHECK_FALSE(id.c2_satisfied);
  CHECK(id.values.size() == 40);
}

TEST_CASE("spectrum of a forest operator") {
  const fs::path dir = scratch("spectrum_rf");
  const auto r = cmd_spectrum(small_config(dir));
  CHECK(r.values.size() == 100);
  CHECK(r.values(0) == doctest::Approx(1.0).epsilon(1e-8));
  CHECK(std::isfinite(r.fit.beta));
  CHECK(r.c2_satisfied == (r.fit.beta > 1.0));
}

TEST_CASE("timing bench") {
  const fs::path dir = scratch("bench");
  RunConfig c = small_config(dir);
  c.bench_repetitions = 3;
  const auto rows = cmd_bench_time(c);
  REQUIRE(rows.size() >= 3);
  bool has_base = false, has_scate = false;
  for (const auto& r : rows) {
    CHECK(std::isfinite(r.infer_s_per_1k_median));
    CHECK(r.infer_s_per_1k_median > 0.0);
    CHECK(r.infer_s_per_1k.size() == 3);
    CHECK(r.size_bucket == size_bucket(r.size_bytes));
    has_base |= r.method == "base";
    has_scate |= r.method == "scate";
  }
  CHECK(has_base);
  CHECK(has_scate);
  CHECK(fs::exists(dir / "timing.csv"));
  CHECK(size_bucket(5511) == "5-10KB");
  CHECK(size_bucket(100) == "0-5KB");
}

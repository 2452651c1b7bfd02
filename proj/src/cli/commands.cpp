#include "scate/cli/commands.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

#include "scate/error.hpp"
#include "scate/metrics.hpp"
#include "scate/model_io.hpp"
#include "scate/rng.hpp"

namespace scate::cli {

using nlohmann::json;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

template <typename F>
decltype(auto) stage(const std::string& name, F&& f) {
  try {
    return f();
  } catch (const Error& e) {
    throw Error(e.code(), name + ": " + e.what());
  }
}

constexpr std::uint64_t kMethodScate = 1;
constexpr std::uint64_t kMethodNaiveMlp = 2;

std::string arch_cell(Architecture a) { return "w" + std::to_string(a.width) + "_d" + std::to_string(a.depth); }

std::string rf_cell(int n, const std::optional<int>& depth) {
  return "n" + std::to_string(n) + "_d" + (depth ? std::to_string(*depth) : std::string("None"));
}

json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void ensure_dir(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::Io, "cannot create " + dir.string() + ": " + ec.message());
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  out << text;
}

// Query matrix of exactly `count` rows cycling through X.
Matrix cycle_rows(const Matrix& X, int count) {
  Matrix out(count, X.cols());
  for (int i = 0; i < count; ++i) out.row(i) = X.row(i % X.rows());
  return out;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double time_per_1k(const Matrix& X, const auto& predict_one) {
  const auto start = Clock::now();
  volatile double sink = 0.0;
  for (Eigen::Index i = 0; i < X.rows(); ++i) sink = sink + predict_one(row_span(X, i));
  return seconds_since(start) / static_cast<double>(X.rows()) * 1000.0;
}

}  // namespace

Matrix RunContext::basis_p() const { return eig ? Matrix(eig->eigenvectors.leftCols(p)) : Matrix(svd->V.leftCols(p)); }

Vector RunContext::base_predict(const Matrix& X) const { return forest ? predict_rf(*forest, X) : predict_gbm(*gbm, X); }

Matrix RunContext::teacher_outputs(bool scalar) const {
  if (forest) return scalar ? Matrix(predict_rf(*forest, op.features)) : per_tree_predictions(*forest, op.features);
  const GbmModel& model = gbm_op ? *gbm_op : *gbm;
  if (scalar) return Matrix(predict_gbm(model, op.features));
  // naive distillation averages its outputs; boosted trees add up instead
  return per_tree_predictions(model, op.features) * static_cast<double>(model.trees.size());
}

RunContext build_operator(const RunConfig& config, const Dataset& data, std::uint64_t seed) {
  RunContext ctx;
  ctx.seed = seed;
  ctx.kind = config.base;
  ctx.task = data.task;
  const SplitIndices idx = stage("split", [&] { return split(data.rows(), config.ratios, seed); });
  ctx.train = data.subset(idx.train);
  ctx.validation = data.subset(idx.validation);
  ctx.test = data.subset(idx.test);

  stage("base", [&] {
    const auto start = Clock::now();
    if (config.base == BaseKind::Rf) {
      ctx.forest = fit_rf(ctx.train, config.forest_params(seed));
      ctx.base_size = measure_size(*ctx.forest);
    } else {
      ctx.gbm = fit_gbm(ctx.train, config.gbm_params(seed));
      ctx.base_size = measure_size(*ctx.gbm);
    }
    ctx.base_fit_s = seconds_since(start);
    ctx.base_metric = task_metric(ctx.task, ctx.test.target, ctx.base_predict(ctx.test.features));
  });

  std::vector<int> all(ctx.train.rows());
  std::iota(all.begin(), all.end(), 0);
  const auto picked = subsample_operator(all, config.operator_cap, seed);
  const bool capped = picked.size() < all.size();
  ctx.op = capped ? ctx.train.subset(picked) : ctx.train;

  Matrix op_matrix = stage("operator", [&] {
    if (ctx.forest) {
      if (capped && ctx.forest->honest()) {
        throw Error(ErrorCode::Config, "honest forests cannot be combined with operator subsampling");
      }
      return rf_kernel_matrix(*ctx.forest, ctx.op.features).values;
    }
    if (capped) ctx.gbm_op = fit_gbm(ctx.op, config.gbm_params(seed));
    ctx.smoother = gbm_smoother_matrix(ctx.gbm_op ? *ctx.gbm_op : *ctx.gbm, ctx.op.features);
    return Matrix(ctx.smoother->matrix);
  });

  stage("decomposition", [&] {
    const int n = static_cast<int>(op_matrix.rows());
    const std::uint64_t spectral_seed = derive_seed(seed, {0x737065ULL});
    if (ctx.forest) {
      EigOptions options;
      options.seed = spectral_seed;
      ctx.eig = n <= options.dense_threshold ? eig_sym(op_matrix, std::nullopt, options)
                                             : eig_sym(op_matrix, std::max(config.p, std::min(100, n)), options);
      ctx.spectrum = ctx.eig->eigenvalues;
    } else {
      const int k = std::min(std::max(config.p, 100), n - 10);
      if (k < config.p) {
        throw Error(ErrorCode::RankTooLarge, "p=" + std::to_string(config.p) + " needs at least " +
                                                 std::to_string(config.p + 10) + " operator rows");
      }
      ctx.svd = svd_trunc(op_matrix, k, 10, 4, spectral_seed);
      ctx.spectrum = ctx.svd->sigma;
    }
    const int top = std::min(100, static_cast<int>(ctx.spectrum.size()));
    ctx.decay = decay_fit(ctx.spectrum, top);
  });
  return ctx;
}

RunContext build_context(const RunConfig& config, const Dataset& data, std::uint64_t seed) {
  RunContext ctx = build_operator(config, data, seed);
  ctx.p = config.p;
  stage("targets", [&] {
    ctx.targets = ctx.eig ? make_targets(*ctx.eig, ctx.op.target, ctx.p) : make_targets(*ctx.svd, ctx.op.target, ctx.p);
  });
  stage("oracle", [&] {
    if (ctx.forest) {
      ctx.cross = rf_kernel_cross(*ctx.forest, ctx.op.features, ctx.test.features);
      ctx.oracle = oracle_eval(*ctx.eig, ctx.cross, ctx.op.target, ctx.p);
    } else {
      ctx.cross = gbm_smoother_rows(*ctx.smoother, ctx.gbm_op ? *ctx.gbm_op : *ctx.gbm, ctx.test.features);
      ctx.oracle = oracle_eval(*ctx.svd, ctx.cross, ctx.op.target, ctx.p);
    }
  });
  return ctx;
}

namespace {

CellResult finish_cell(const RunContext& ctx, TrainResult trained, double train_s) {
  CellResult cell;
  cell.wall_train_s = train_s;
  cell.metric = task_metric(ctx.task, ctx.test.target, predict_distilled(trained.model, ctx.test.features));
  cell.size_bytes = measure_size(trained.model);
  const DistilledModel& model = trained.model;
  cell.wall_infer_s_per_1k =
      time_per_1k(ctx.test.features, [&](std::span<const double> x) { return predict_distilled_f32(model, x); });
  cell.trained = std::move(trained);
  return cell;
}

}  // namespace

CellResult run_scate_cell(const RunContext& ctx, const RunConfig& config, Architecture arch) {
  const TrainHyper hyper = config.train_hyper(
      derive_seed(ctx.seed, {kMethodScate, static_cast<std::uint64_t>(arch.width), static_cast<std::uint64_t>(arch.depth)}));
  const auto start = Clock::now();
  TrainResult trained = stage("train", [&] {
    return train_scate(ctx.op.features, ctx.targets, arch, hyper, ctx.task, std::string(to_string(ctx.kind)));
  });
  CellResult cell = finish_cell(ctx, std::move(trained), seconds_since(start));
  cell.network_error = network_cross_error(cell.trained.model, ctx.test.features, ctx.cross, ctx.spectrum_p(), ctx.basis_p());
  return cell;
}

CellResult run_naive_mlp_cell(const RunContext& ctx, const RunConfig& config, Architecture arch) {
  const TrainHyper hyper = config.train_hyper(derive_seed(
      ctx.seed, {kMethodNaiveMlp, static_cast<std::uint64_t>(arch.width), static_cast<std::uint64_t>(arch.depth)}));
  const Matrix teacher = ctx.teacher_outputs(config.naive_scalar_target);
  const auto start = Clock::now();
  TrainResult trained =
      stage("train", [&] { return naive_mlp_distill(ctx.op.features, teacher, arch, hyper, ctx.task); });
  return finish_cell(ctx, std::move(trained), seconds_since(start));
}

PipelineResult cmd_pipeline(const RunConfig& config) {
  const Dataset data = stage("data", [&] { return load_dataset(config); });
  const RunContext ctx = build_context(config, data, config.seed);
  PipelineResult result;
  result.cell = run_scate_cell(ctx, config, config.arch);
  const auto& model = result.cell.trained.model;
  const double oracle_metric = task_metric(ctx.task, ctx.test.target, ctx.oracle.predictions);
  const double eckart_young = ctx.eig ? (ctx.eig->complete() ? eckart_young_error(*ctx.eig, ctx.p) : NAN) : NAN;

  result.report = {
      {"base_kind", std::string(to_string(ctx.kind))},
      {"task", std::string(to_string(ctx.task))},
      {"metric", std::string(metric_name(ctx.task))},
      {"seed", config.seed},
      {"p", ctx.p},
      {"arch", {{"width", config.arch.width}, {"depth", config.arch.depth}}},
      {"n_train", ctx.train.rows()},
      {"n_operator", ctx.op.rows()},
      {"n_test", ctx.test.rows()},
      {"decomposition_converged", ctx.eig ? ctx.eig->converged : ctx.svd->converged},
      {"base_metric", finite_or_null(ctx.base_metric)},
      {"distilled_metric", finite_or_null(result.cell.metric)},
      {"oracle_metric_at_p", finite_or_null(oracle_metric)},
      {"frobenius_errors",
       {{"oracle", finite_or_null(ctx.oracle.frobenius_error)},
        {"network", finite_or_null(result.cell.network_error)},
        {"train_truncation", finite_or_null(eckart_young)}}},
      {"beta_fit",
       {{"beta", finite_or_null(ctx.decay.beta)},
        {"intercept", finite_or_null(ctx.decay.intercept)},
        {"r2", finite_or_null(ctx.decay.r2)},
        {"n_points", ctx.decay.n_points},
        {"c2_satisfied", ctx.decay.beta > 1.0}}},
      {"sizes",
       {{"distilled_bytes", result.cell.size_bytes},
        {"base_bytes", ctx.base_size},
        {"compression_factor", static_cast<double>(ctx.base_size) / static_cast<double>(result.cell.size_bytes)}}},
      {"final_loss", finite_or_null(result.cell.trained.trace.empty() ? NAN : result.cell.trained.trace.back().total)}};
  result.timing = {{"base_fit_s", ctx.base_fit_s},
                   {"train_s", result.cell.wall_train_s},
                   {"infer_s_per_1k", result.cell.wall_infer_s_per_1k}};

  stage("write", [&] {
    ensure_dir(config.output_dir);
    write_text(config.output_dir / "report.json", result.report.dump(2) + "\n");
    write_text(config.output_dir / "timing.json", result.timing.dump(2) + "\n");
    const int top = std::min(100, static_cast<int>(ctx.spectrum.size()));
    write_spectrum_csv(ctx.spectrum.head(top), ctx.decay, config.output_dir / "spectrum.csv",
                       ctx.eig ? "eigenvalue" : "singular_value");
    write_loss_trace(result.cell.trained.trace, config.output_dir / "loss_trace.csv");
    write_bytes(serialize(model), config.output_dir / "model.scte");
  });
  return result;
}

// ---- sweep ----

namespace {

struct SweepTask {
  std::string method;
  std::string cell;
  Architecture arch;
  int n_estimators = 0;
  std::optional<int> max_depth;
};

std::vector<SweepTask> plan_tasks(const RunConfig& config, int d_in) {
  std::vector<SweepTask> tasks;
  const std::size_t cap = config.budgets.back();
  auto wants = [&](const char* m) {
    return std::find(config.methods.begin(), config.methods.end(), m) != config.methods.end();
  };
  for (const char* method : {"scate", "naive_mlp"}) {
    if (!wants(method)) continue;
    const int out = std::string(method) == "scate" ? config.p : 1;
    for (int w : config.widths) {
      for (int dep : config.depths) {
        if (config.prune_to_budget && scte_size(mlp_dims(d_in, w, dep, out)) > cap) continue;
        SweepTask t{method, arch_cell({w, dep}), {w, dep}, 0, std::nullopt};
        tasks.push_back(t);
      }
    }
  }
  if (wants("naive_rf")) {
    for (int n : config.naive_rf_grid.n_estimators) {
      for (const auto& depth : config.naive_rf_grid.max_depth) {
        tasks.push_back({"naive_rf", rf_cell(n, depth), {}, n, depth});
      }
    }
  }
  return tasks;
}

std::string base_cell(const RunConfig& c) {
  return c.base == BaseKind::Rf ? rf_cell(c.rf_trees, c.rf_max_depth)
                                : "gbm_n" + std::to_string(c.gbm_trees) + "_d" +
                                      (c.gbm_max_depth ? std::to_string(*c.gbm_max_depth) : std::string("None"));
}

std::string clean_status(std::string s) {
  for (char& ch : s) {
    if (ch == ',' || ch == '\n' || ch == '\r' || ch == '"') ch = ';';
  }
  return s;
}

const std::vector<std::string> kMethodOrder{"scate", "naive_mlp", "naive_rf", "base", "oracle"};

struct Group {
  std::string method;
  std::string cell;
  std::size_t size = 0;
  std::vector<double> metrics;
};

// (method, cell) groups of successful sized records, in method order then first appearance.
std::vector<Group> sized_groups(const std::vector<SweepRecord>& records) {
  std::vector<Group> groups;
  for (const auto& method : kMethodOrder) {
    std::map<std::string, std::size_t> where;
    for (const auto& r : records) {
      if (r.method != method || !r.size_bytes || !r.metric || r.status != "ok") continue;
      auto it = where.find(r.cell);
      if (it == where.end()) {
        it = where.emplace(r.cell, groups.size()).first;
        groups.push_back({r.method, r.cell, 0, {}});
      }
      Group& g = groups[it->second];
      g.size = std::max(g.size, *r.size_bytes);
      g.metrics.push_back(*r.metric);
    }
  }
  return groups;
}

double mean_of(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0) / v.size(); }

double std_error_of(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / (v.size() - 1) / v.size());
}

}  // namespace

std::vector<BestRow> best_under_budget(const std::vector<SweepRecord>& records,
                                       const std::vector<std::size_t>& budgets) {
  const auto groups = sized_groups(records);
  std::vector<BestRow> rows;
  for (std::size_t budget : budgets) {
    for (const auto& method : kMethodOrder) {
      const bool present = std::any_of(records.begin(), records.end(),
                                       [&](const SweepRecord& r) { return r.method == method && r.size_bytes; });
      if (!present) continue;
      BestRow row;
      row.budget = budget;
      row.method = method;
      for (const auto& g : groups) {
        if (g.method != method || g.size > budget) continue;
        const double m = mean_of(g.metrics);
        if (!row.mean_metric || m > *row.mean_metric) {
          row.cell = g.cell;
          row.size_bytes = g.size;
          row.mean_metric = m;
          row.std_error = std_error_of(g.metrics);
          row.n_seeds = static_cast<int>(g.metrics.size());
        }
      }
      rows.push_back(row);
    }
  }
  return rows;
}

std::vector<SeedBest> best_per_seed(const std::vector<SweepRecord>& records, const std::vector<std::size_t>& budgets) {
  std::vector<SeedBest> out;
  for (std::size_t budget : budgets) {
    for (const auto& method : kMethodOrder) {
      std::vector<std::uint64_t> seeds;
      for (const auto& r : records) {
        if (r.method == method && std::find(seeds.begin(), seeds.end(), r.seed) == seeds.end()) seeds.push_back(r.seed);
      }
      for (std::uint64_t seed : seeds) {
        const SweepRecord* best = nullptr;
        for (const auto& r : records) {
          if (r.method != method || r.seed != seed || r.status != "ok" || !r.size_bytes || !r.metric) continue;
          if (*r.size_bytes > budget) continue;
          if (!best || *r.metric > *best->metric) best = &r;
        }
        if (best) out.push_back({budget, *best});
      }
    }
  }
  return out;
}

std::vector<ParetoPoint> pareto_frontier(const std::vector<SweepRecord>& records) {
  std::vector<ParetoPoint> out;
  const auto groups = sized_groups(records);
  for (const auto& method : kMethodOrder) {
    std::vector<ParetoPoint> pts;
    for (const auto& g : groups) {
      if (g.method == method) pts.push_back({g.method, g.cell, g.size, mean_of(g.metrics)});
    }
    std::stable_sort(pts.begin(), pts.end(), [](const ParetoPoint& a, const ParetoPoint& b) {
      return a.size_bytes != b.size_bytes ? a.size_bytes < b.size_bytes : a.mean_metric > b.mean_metric;
    });
    double best = -INFINITY;
    for (const auto& p : pts) {
      if (p.mean_metric > best) {
        out.push_back(p);
        best = p.mean_metric;
      }
    }
  }
  return out;
}

SweepResult run_sweep(const RunConfig& config) {
  const Dataset data = stage("data", [&] { return load_dataset(config); });
  auto wants = [&](const char* m) {
    return std::find(config.methods.begin(), config.methods.end(), m) != config.methods.end();
  };
  SweepResult result;
  for (std::uint64_t seed : config.seeds) {
    const auto tasks = plan_tasks(config, data.dims());
    std::optional<RunContext> ctx;
    std::string context_error;
    try {
      ctx = build_context(config, data, seed);
    } catch (const Error& e) {
      context_error = e.what();
    }
    if (!ctx) {
      for (const auto& t : tasks) result.records.push_back({t.method, t.cell, seed, {}, {}, 0, 0, clean_status("error: " + context_error)});
      if (wants("base")) result.records.push_back({"base", base_cell(config), seed, {}, {}, 0, 0, clean_status("error: " + context_error)});
      if (wants("oracle")) result.records.push_back({"oracle", "p" + std::to_string(config.p), seed, {}, {}, 0, 0, clean_status("error: " + context_error)});
      continue;
    }

    std::vector<SweepRecord> cells(tasks.size());
#pragma omp parallel for schedule(dynamic)
    for (int k = 0; k < static_cast<int>(tasks.size()); ++k) {
      const SweepTask& t = tasks[k];
      SweepRecord& rec = cells[k];
      rec.method = t.method;
      rec.cell = t.cell;
      rec.seed = seed;
      try {
        if (t.method == "naive_rf") {
          NaiveRfGrid grid{{t.n_estimators}, {t.max_depth}};
          const auto start = Clock::now();
          auto points = naive_small_rf(ctx->train, ctx->test, grid, seed);
          rec.wall_train_s = seconds_since(start);
          const Forest& f = points.front().forest;
          rec.size_bytes = points.front().size_bytes;
          rec.metric = points.front().score;
          rec.wall_infer_s_per_1k =
              time_per_1k(ctx->test.features, [&](std::span<const double> x) { return predict_rf(f, x); });
        } else {
          const CellResult cell = t.method == "scate" ? run_scate_cell(*ctx, config, t.arch)
                                                      : run_naive_mlp_cell(*ctx, config, t.arch);
          rec.size_bytes = cell.size_bytes;
          rec.metric = cell.metric;
          rec.wall_train_s = cell.wall_train_s;
          rec.wall_infer_s_per_1k = cell.wall_infer_s_per_1k;
        }
        if (!std::isfinite(*rec.metric)) throw Error(ErrorCode::ConvergenceFailure, "non-finite metric");
      } catch (const std::exception& e) {
        rec.size_bytes.reset();
        rec.metric.reset();
        rec.status = clean_status(std::string("error: ") + e.what());
      }
    }
    result.records.insert(result.records.end(), cells.begin(), cells.end());

    if (wants("base")) {
      SweepRecord rec{"base", base_cell(config), seed, ctx->base_size, ctx->base_metric, ctx->base_fit_s, 0.0, "ok"};
      rec.wall_infer_s_per_1k = time_per_1k(ctx->test.features, [&](std::span<const double> x) {
        return ctx->forest ? predict_rf(*ctx->forest, x) : predict_gbm(*ctx->gbm, x);
      });
      result.records.push_back(rec);
    }
    if (wants("oracle")) {
      SweepRecord rec{"oracle", "p" + std::to_string(config.p), seed, std::nullopt,
                      task_metric(ctx->task, ctx->test.target, ctx->oracle.predictions), 0.0, 0.0, "ok"};
      result.records.push_back(rec);
    }
  }
  result.best = best_under_budget(result.records, config.budgets);
  result.best_per_seed = best_per_seed(result.records, config.budgets);
  result.pareto = pareto_frontier(result.records);
  return result;
}

void write_records_csv(const std::vector<SweepRecord>& records, const std::filesystem::path& path) {
  std::ostringstream out;
  out << "method,cell,seed,size_bytes,metric,wall_train_s,wall_infer_s_per_1k,status\n";
  for (const auto& r : records) {
    out << r.method << ',' << r.cell << ',' << r.seed << ',' << (r.size_bytes ? std::to_string(*r.size_bytes) : "NA")
        << ',' << (r.metric ? format_double(*r.metric) : "NA") << ',' << format_double(r.wall_train_s) << ','
        << format_double(r.wall_infer_s_per_1k) << ',' << clean_status(r.status) << '\n';
  }
  write_text(path, out.str());
}

namespace {

std::vector<std::vector<std::string>> read_simple_csv(const std::filesystem::path& path, std::size_t columns) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot read " + path.string());
  std::vector<std::vector<std::string>> rows;
  std::string line;
  bool header = true;
  while (std::getline(in, line)) {
    if (header) {
      header = false;
      continue;
    }
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (!line.empty() && line.back() == ',') fields.emplace_back();
    if (fields.size() != columns) throw Error(ErrorCode::ParseError, "bad row in " + path.string() + ": " + line);
    rows.push_back(std::move(fields));
  }
  return rows;
}

std::optional<double> opt_double(const std::string& s) {
  if (s == "NA") return std::nullopt;
  return std::stod(s);
}

std::optional<std::size_t> opt_size(const std::string& s) {
  if (s == "NA") return std::nullopt;
  return static_cast<std::size_t>(std::stoull(s));
}

}  // namespace

std::vector<SweepRecord> read_records_csv(const std::filesystem::path& path) {
  std::vector<SweepRecord> out;
  for (const auto& f : read_simple_csv(path, 8)) {
    out.push_back({f[0], f[1], std::stoull(f[2]), opt_size(f[3]), opt_double(f[4]), std::stod(f[5]), std::stod(f[6]), f[7]});
  }
  return out;
}

void write_best_csv(const std::vector<BestRow>& rows, const std::filesystem::path& path) {
  std::ostringstream out;
  out << "budget,method,cell,size_bytes,mean_metric,std_error,n_seeds\n";
  for (const auto& r : rows) {
    out << r.budget << ',' << r.method << ',' << r.cell.value_or("NA") << ','
        << (r.size_bytes ? std::to_string(*r.size_bytes) : "NA") << ','
        << (r.mean_metric ? format_double(*r.mean_metric) : "NA") << ','
        << (r.std_error ? format_double(*r.std_error) : "NA") << ',' << r.n_seeds << '\n';
  }
  write_text(path, out.str());
}

std::vector<BestRow> read_best_csv(const std::filesystem::path& path) {
  std::vector<BestRow> out;
  for (const auto& f : read_simple_csv(path, 7)) {
    BestRow r;
    r.budget = std::stoull(f[0]);
    r.method = f[1];
    if (f[2] != "NA") r.cell = f[2];
    r.size_bytes = opt_size(f[3]);
    r.mean_metric = opt_double(f[4]);
    r.std_error = opt_double(f[5]);
    r.n_seeds = std::stoi(f[6]);
    out.push_back(r);
  }
  return out;
}

SweepResult cmd_sweep(const RunConfig& config) {
  SweepResult result = run_sweep(config);
  stage("write", [&] {
    ensure_dir(config.output_dir);
    write_records_csv(result.records, config.output_dir / "sweep_records.csv");
    write_best_csv(result.best, config.output_dir / "best.csv");
    std::ostringstream seeds;
    seeds << "budget,method,seed,cell,size_bytes,metric\n";
    for (const auto& b : result.best_per_seed) {
      seeds << b.budget << ',' << b.record.method << ',' << b.record.seed << ',' << b.record.cell << ','
            << *b.record.size_bytes << ',' << format_double(*b.record.metric) << '\n';
    }
    write_text(config.output_dir / "best_per_seed.csv", seeds.str());
    std::ostringstream pareto;
    pareto << "method,cell,size_bytes,mean_metric\n";
    for (const auto& p : result.pareto) {
      pareto << p.method << ',' << p.cell << ',' << p.size_bytes << ',' << format_double(p.mean_metric) << '\n';
    }
    write_text(config.output_dir / "pareto.csv", pareto.str());
  });
  return result;
}

// ---- spectrum ----

namespace {

SpectrumResult summarize_spectrum(Vector values, const char* kind) {
  SpectrumResult r;
  const int top = std::min(100, static_cast<int>(values.size()));
  r.values = values.head(top);
  r.fit = decay_fit(r.values, top);
  r.c2_satisfied = r.fit.beta > 1.0;
  r.summary = {{"kind", kind},
               {"n_values", top},
               {"beta", finite_or_null(r.fit.beta)},
               {"intercept", finite_or_null(r.fit.intercept)},
               {"r2", finite_or_null(r.fit.r2)},
               {"n_points", r.fit.n_points},
               {"c2_satisfied", r.c2_satisfied}};
  return r;
}

}  // namespace

SpectrumResult spectrum_of_matrix(const Matrix& M) {
  const double scale = std::max(1.0, M.cwiseAbs().maxCoeff());
  const bool symmetric = M.rows() == M.cols() && (M - M.transpose()).cwiseAbs().maxCoeff() <= 1e-10 * scale;
  if (symmetric) {
    const int n = static_cast<int>(M.rows());
    const EigOptions options;
    const auto eig = n <= options.dense_threshold ? eig_sym(M) : eig_sym(M, std::min(100, n));
    return summarize_spectrum(eig.eigenvalues, "eigenvalue");
  }
  const int k = std::min<int>(100, static_cast<int>(std::min(M.rows(), M.cols())) - 10);
  if (k < 1) throw Error(ErrorCode::RankTooLarge, "matrix too small for a truncated SVD");
  return summarize_spectrum(svd_trunc(M, k).sigma, "singular_value");
}

SpectrumResult cmd_spectrum(const RunConfig& config) {
  SpectrumResult r;
  if (config.data.matrix) {
    const Matrix M = stage("data", [&] { return read_matrix(*config.data.matrix); });
    r = stage("decomposition", [&] { return spectrum_of_matrix(M); });
  } else {
    const Dataset data = stage("data", [&] { return load_dataset(config); });
    const RunContext ctx = build_operator(config, data, config.seed);
    r = summarize_spectrum(ctx.spectrum, ctx.eig ? "eigenvalue" : "singular_value");
  }
  stage("write", [&] {
    ensure_dir(config.output_dir);
    write_spectrum_csv(r.values, r.fit, config.output_dir / "spectrum.csv", r.summary["kind"].get<std::string>());
    write_text(config.output_dir / "spectrum.json", r.summary.dump(2) + "\n");
  });
  return r;
}

// ---- timing ----

namespace {

TimingRow timing_row(std::string method, std::string cell, std::size_t size) {
  TimingRow row;
  row.method = std::move(method);
  row.cell = std::move(cell);
  row.size_bytes = size;
  return row;
}

}  // namespace

std::string size_bucket(std::size_t bytes) {
  const std::size_t lo = bytes / 5120 * 5;
  return std::to_string(lo) + "-" + std::to_string(lo + 5) + "KB";
}

std::vector<TimingRow> cmd_bench_time(const RunConfig& config) {
  const Dataset data = stage("data", [&] { return load_dataset(config); });
  const RunContext ctx = build_context(config, data, config.seed);
  const Matrix queries = cycle_rows(ctx.test.features, 1000);
  const int reps = config.bench_repetitions;
  std::vector<TimingRow> rows;

  auto timed = [&](TimingRow row, const auto& train_once, const auto& predict_one) {
    std::vector<double> train_s;
    for (int r = 0; r < reps; ++r) {
      const auto start = Clock::now();
      train_once();
      train_s.push_back(seconds_since(start));
    }
    for (int r = 0; r < reps; ++r) row.infer_s_per_1k.push_back(time_per_1k(queries, predict_one));
    row.train_s_median = median(train_s);
    row.infer_s_per_1k_median = median(row.infer_s_per_1k);
    row.size_bucket = size_bucket(row.size_bytes);
    rows.push_back(std::move(row));
  };

  const std::string cell = base_cell(config);
  auto refit_base = [&] {
    if (ctx.forest) {
      (void)fit_rf(ctx.train, config.forest_params(ctx.seed));
    } else {
      (void)fit_gbm(ctx.train, config.gbm_params(ctx.seed));
    }
  };
  timed(timing_row("base", cell, ctx.base_size), refit_base, [&](std::span<const double> x) {
    return ctx.forest ? predict_rf(*ctx.forest, x) : predict_gbm(*ctx.gbm, x);
  });
  const Bytes forest_bytes = ctx.forest ? serialize_forest(*ctx.forest) : serialize_forest(*ctx.gbm);
  const MinimalForest minimal = deserialize_forest(forest_bytes);
  timed(timing_row("base_sctf", cell, forest_bytes.size()), refit_base,
        [&](std::span<const double> x) { return static_cast<double>(minimal.predict(x)); });

  CellResult scate = run_scate_cell(ctx, config, config.arch);
  timed(timing_row("scate", arch_cell(config.arch), scate.size_bytes), [&] { (void)run_scate_cell(ctx, config, config.arch); },
        [&](std::span<const double> x) { return static_cast<double>(predict_distilled_f32(scate.trained.model, x)); });
  CellResult naive = run_naive_mlp_cell(ctx, config, config.arch);
  timed(timing_row("naive_mlp", arch_cell(config.arch), naive.size_bytes),
        [&] { (void)run_naive_mlp_cell(ctx, config, config.arch); },
        [&](std::span<const double> x) { return static_cast<double>(predict_distilled_f32(naive.trained.model, x)); });

  stage("write", [&] {
    ensure_dir(config.output_dir);
    std::ostringstream out;
    out << "method,cell,size_bytes,size_bucket,train_s_median,infer_s_per_1k_median,infer_s_per_1k_reps\n";
    for (const auto& r : rows) {
      out << r.method << ',' << r.cell << ',' << r.size_bytes << ',' << r.size_bucket << ','
          << format_double(r.train_s_median) << ',' << format_double(r.infer_s_per_1k_median) << ',';
      for (std::size_t k = 0; k < r.infer_s_per_1k.size(); ++k) {
        out << (k ? ";" : "") << format_double(r.infer_s_per_1k[k]);
      }
      out << '\n';
    }
    write_text(config.output_dir / "timing.csv", out.str());
  });
  return rows;
}

}  // namespace scate::cli

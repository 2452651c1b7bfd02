#include <iostream>

#include <CLI11.hpp>

#include "scate/cli/commands.hpp"
#include "scate/error.hpp"
#include "scate/model_io.hpp"

namespace scate::cli {

namespace {

struct Overrides {
  std::string config_path;
  std::optional<std::string> out, csv, target, task, base, matrix;
  std::optional<std::uint64_t> seed, data_seed;
  std::vector<std::uint64_t> seeds;
  std::vector<std::size_t> budgets;
  std::vector<std::string> methods;
  std::optional<int> p, epochs, width, depth, n, d, operator_cap, batch_size, trees, reps;
  std::optional<double> noise, gamma, lr;
  bool prune = false;
};

void add_common(CLI::App* sub, Overrides& o) {
  sub->add_option("-c,--config", o.config_path, "JSON run configuration");
  sub->add_option("-o,--out", o.out, "output directory");
  sub->add_option("--csv", o.csv, "input CSV");
  sub->add_option("--target", o.target, "target column of the CSV");
  sub->add_option("--task", o.task, "regression or classification");
  sub->add_option("--n", o.n, "synthetic rows");
  sub->add_option("--d", o.d, "synthetic features");
  sub->add_option("--noise", o.noise, "synthetic noise sd");
  sub->add_option("--data-seed", o.data_seed, "synthetic data seed");
  sub->add_option("--base", o.base, "rf or gbm");
  sub->add_option("--trees", o.trees, "base ensemble size");
  sub->add_option("--seed", o.seed, "run seed");
  sub->add_option("--p", o.p, "number of spectral components");
  sub->add_option("--operator-cap", o.operator_cap, "max training rows in the operator");
  sub->add_option("--epochs", o.epochs);
  sub->add_option("--gamma", o.gamma, "orthogonality penalty weight");
  sub->add_option("--lr", o.lr);
  sub->add_option("--batch-size", o.batch_size);
  sub->add_option("--width", o.width);
  sub->add_option("--depth", o.depth);
}

RunConfig resolve(const Overrides& o) {
  RunConfig c = o.config_path.empty() ? RunConfig{} : load_config(o.config_path);
  if (o.out) c.output_dir = *o.out;
  if (o.csv) c.data.csv = *o.csv;
  if (o.target) c.data.target = *o.target;
  if (o.task) {
    try {
      c.data.task = parse_task(*o.task);
    } catch (const Error& e) {
      throw Error(ErrorCode::Config, e.what());
    }
  }
  if (o.matrix) c.data.matrix = *o.matrix;
  if (o.n) c.data.synthetic.n = *o.n;
  if (o.d) c.data.synthetic.d = *o.d;
  if (o.noise) c.data.synthetic.noise_sd = *o.noise;
  if (o.data_seed) c.data.synthetic.seed = *o.data_seed;
  if (o.base) {
    if (*o.base == "rf") {
      c.base = BaseKind::Rf;
    } else if (*o.base == "gbm") {
      c.base = BaseKind::Gbm;
    } else {
      throw Error(ErrorCode::Config, "--base must be rf or gbm");
    }
  }
  if (o.trees) (c.base == BaseKind::Rf ? c.rf_trees : c.gbm_trees) = *o.trees;
  if (o.seed) c.seed = *o.seed;
  if (!o.seeds.empty()) c.seeds = o.seeds;
  if (!o.budgets.empty()) c.budgets = o.budgets;
  if (!o.methods.empty()) c.methods = o.methods;
  if (o.p) c.p = *o.p;
  if (o.operator_cap) c.operator_cap = *o.operator_cap;
  if (o.epochs) c.epochs = *o.epochs;
  if (o.gamma) c.gamma = *o.gamma;
  if (o.lr) c.lr = *o.lr;
  if (o.batch_size) c.batch_size = *o.batch_size;
  if (o.width) c.arch.width = *o.width;
  if (o.depth) c.arch.depth = *o.depth;
  if (o.reps) c.bench_repetitions = *o.reps;
  if (o.prune) c.prune_to_budget = true;
  validate(c);
  return c;
}

nlohmann::json inspect(const std::filesystem::path& path) {
  const Bytes bytes = read_bytes(path);
  const std::string magic(bytes.begin(), bytes.begin() + std::min<std::size_t>(4, bytes.size()));
  if (magic == "SCTF") {
    const MinimalForest f = deserialize_forest(bytes);
    std::size_t nodes = 0;
    for (const auto& t : f.trees) nodes += t.feature.size();
    return {{"format", "SCTF"},
            {"kind", f.kind == MinimalForest::Kind::Average ? "average" : "boosted_sum"},
            {"n_features", f.n_features},
            {"n_trees", f.trees.size()},
            {"n_nodes", nodes},
            {"size_bytes", bytes.size()}};
  }
  const DistilledModel m = deserialize(bytes);
  return {{"format", "SCTE"},
          {"version", kScteVersion},
          {"task", std::string(to_string(m.task))},
          {"dims", m.mlp.dims},
          {"p", m.p},
          {"n_params", m.mlp.param_count()},
          {"size_bytes", bytes.size()},
          {"crc", "ok"}};
}

}  // namespace

int run(int argc, const char* const* argv) {
  CLI::App app{"Distill tree ensembles into small spectral networks"};
  app.require_subcommand(1);
  Overrides o;

  auto* pipeline = app.add_subcommand("pipeline", "split, fit, decompose, distill and evaluate");
  add_common(pipeline, o);
  auto* sweep = app.add_subcommand("sweep", "size-constrained sweep over methods and architectures");
  add_common(sweep, o);
  sweep->add_option("--seeds", o.seeds, "seeds to average over");
  sweep->add_option("--budgets", o.budgets, "size budgets in bytes");
  sweep->add_option("--methods", o.methods, "scate naive_mlp naive_rf oracle base");
  sweep->add_flag("--prune", o.prune, "skip cells larger than the largest budget");
  auto* spectrum = app.add_subcommand("spectrum", "operator spectrum and power-law decay fit");
  add_common(spectrum, o);
  spectrum->add_option("--matrix", o.matrix, "decompose a stored matrix instead of building an operator");
  auto* bench = app.add_subcommand("bench-time", "training and inference timing");
  add_common(bench, o);
  bench->add_option("--reps", o.reps, "repetitions per measurement");
  auto* gen = app.add_subcommand("gen-data", "write a synthetic Friedman #1 dataset");
  add_common(gen, o);
  std::string model_path;
  auto* inspect_cmd = app.add_subcommand("inspect-model", "describe a .scte or .sctf file");
  inspect_cmd->add_option("path", model_path)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  RunConfig config;
  if (!inspect_cmd->parsed()) {
    try {
      config = resolve(o);
    } catch (const Error& e) {
      std::cerr << "config error: " << e.what() << '\n';
      return 2;
    }
  }

  try {
    if (pipeline->parsed()) {
      const auto r = cmd_pipeline(config);
      std::cout << r.report.dump(2) << '\n';
    } else if (sweep->parsed()) {
      const auto r = cmd_sweep(config);
      std::cout << "budget,method,cell,size_bytes,mean_metric\n";
      for (const auto& b : r.best) {
        std::cout << b.budget << ',' << b.method << ',' << b.cell.value_or("NA") << ','
                  << (b.size_bytes ? std::to_string(*b.size_bytes) : "NA") << ','
                  << (b.mean_metric ? std::to_string(*b.mean_metric) : "NA") << '\n';
      }
    } else if (spectrum->parsed()) {
      std::cout << cmd_spectrum(config).summary.dump(2) << '\n';
    } else if (bench->parsed()) {
      for (const auto& r : cmd_bench_time(config)) {
        std::cout << r.method << ' ' << r.cell << ' ' << r.size_bytes << "B train " << r.train_s_median
                  << "s infer/1k " << r.infer_s_per_1k_median << "s\n";
      }
    } else if (gen->parsed()) {
      std::filesystem::create_directories(config.output_dir);
      const auto path = config.output_dir / "data.csv";
      write_csv(load_dataset(config), path);
      std::cout << path.string() << '\n';
    } else if (inspect_cmd->parsed()) {
      std::cout << inspect(model_path).dump(2) << '\n';
    }
  } catch (const Error& e) {
    if (e.code() == ErrorCode::Config) {
      std::cerr << "config error: " << e.what() << '\n';
      return 2;
    }
    std::cerr << "error [" << to_string(e.code()) << "]: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

}  // namespace scate::cli

#include "scate/cli/config.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include "scate/error.hpp"
#include "scate/rng.hpp"

namespace scate::cli {

using nlohmann::json;

namespace {

[[noreturn]] void config_error(const std::string& what) { throw Error(ErrorCode::Config, what); }

void check_keys(const json& j, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) config_error(where + " must be an object");
  for (const auto& [key, _] : j.items()) {
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; })) {
      config_error("unknown key '" + key + "' in " + where);
    }
  }
}

template <typename T>
void read(const json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    config_error(std::string("bad value for '") + key + "': " + e.what());
  }
}

void read_depth(const json& j, const char* key, std::optional<int>& out) {
  if (!j.contains(key)) return;
  if (j.at(key).is_null()) {
    out.reset();
  } else {
    int v = 0;
    read(j, key, v);
    out = v;
  }
}

json depth_json(const std::optional<int>& d) { return d ? json(*d) : json(nullptr); }

}  // namespace

std::string_view to_string(BaseKind kind) { return kind == BaseKind::Rf ? "rf" : "gbm"; }

ForestParams RunConfig::forest_params(std::uint64_t run_seed) const {
  ForestParams p;
  p.n_trees = rf_trees;
  p.tree.max_depth = rf_max_depth;
  p.tree.min_samples_leaf = rf_min_samples_leaf;
  p.tree.mtry = rf_mtry;
  p.tree.honest = rf_honest;
  p.seed = derive_seed(run_seed, {0x626173ULL});
  return p;
}

GbmParams RunConfig::gbm_params(std::uint64_t run_seed) const {
  GbmParams p;
  p.n_trees = gbm_trees;
  p.learning_rate = gbm_learning_rate;
  p.tree.max_depth = gbm_max_depth;
  p.seed = derive_seed(run_seed, {0x626173ULL});
  return p;
}

TrainHyper RunConfig::train_hyper(std::uint64_t run_seed) const {
  TrainHyper h;
  h.epochs = epochs;
  h.gamma = gamma;
  h.lr = lr;
  h.batch_size = batch_size;
  h.seed = derive_seed(run_seed, {0x6e6574ULL});
  return h;
}

RunConfig config_from_json(const json& j, RunConfig c) {
  check_keys(j, "config",
             {"data", "base", "p", "operator_cap", "split", "arch", "grid", "train", "seed", "seeds", "budgets",
              "methods", "naive_rf_grid", "prune_to_budget", "bench_repetitions", "output_dir"});
  if (j.contains("data")) {
    const json& d = j["data"];
    check_keys(d, "data", {"csv", "target", "task", "synthetic", "matrix"});
    if (d.contains("csv")) {
      std::string path;
      read(d, "csv", path);
      c.data.csv = path;
    }
    if (d.contains("matrix")) {
      std::string path;
      read(d, "matrix", path);
      c.data.matrix = path;
    }
    read(d, "target", c.data.target);
    if (d.contains("task")) {
      std::string task;
      read(d, "task", task);
      try {
        c.data.task = parse_task(task);
      } catch (const Error& e) {
        config_error(e.what());
      }
    }
    if (d.contains("synthetic")) {
      const json& s = d["synthetic"];
      check_keys(s, "data.synthetic", {"n", "d", "noise_sd", "seed"});
      read(s, "n", c.data.synthetic.n);
      read(s, "d", c.data.synthetic.d);
      read(s, "noise_sd", c.data.synthetic.noise_sd);
      read(s, "seed", c.data.synthetic.seed);
    }
  }
  if (j.contains("base")) {
    const json& b = j["base"];
    check_keys(b, "base", {"kind", "rf", "gbm"});
    if (b.contains("kind")) {
      std::string kind;
      read(b, "kind", kind);
      if (kind == "rf") {
        c.base = BaseKind::Rf;
      } else if (kind == "gbm") {
        c.base = BaseKind::Gbm;
      } else {
        config_error("base.kind must be rf or gbm");
      }
    }
    if (b.contains("rf")) {
      const json& r = b["rf"];
      check_keys(r, "base.rf", {"n_trees", "max_depth", "min_samples_leaf", "mtry", "honest"});
      read(r, "n_trees", c.rf_trees);
      read_depth(r, "max_depth", c.rf_max_depth);
      read(r, "min_samples_leaf", c.rf_min_samples_leaf);
      read(r, "mtry", c.rf_mtry);
      read(r, "honest", c.rf_honest);
    }
    if (b.contains("gbm")) {
      const json& g = b["gbm"];
      check_keys(g, "base.gbm", {"n_trees", "max_depth", "learning_rate"});
      read(g, "n_trees", c.gbm_trees);
      read_depth(g, "max_depth", c.gbm_max_depth);
      read(g, "learning_rate", c.gbm_learning_rate);
    }
  }
  read(j, "p", c.p);
  read(j, "operator_cap", c.operator_cap);
  if (j.contains("split")) {
    const json& s = j["split"];
    check_keys(s, "split", {"train", "validation", "test"});
    read(s, "train", c.ratios.train);
    read(s, "validation", c.ratios.validation);
    read(s, "test", c.ratios.test);
  }
  if (j.contains("arch")) {
    const json& a = j["arch"];
    check_keys(a, "arch", {"width", "depth"});
    read(a, "width", c.arch.width);
    read(a, "depth", c.arch.depth);
  }
  if (j.contains("grid")) {
    const json& g = j["grid"];
    check_keys(g, "grid", {"widths", "depths"});
    read(g, "widths", c.widths);
    read(g, "depths", c.depths);
  }
  if (j.contains("train")) {
    const json& t = j["train"];
    check_keys(t, "train", {"epochs", "gamma", "lr", "batch_size", "naive_scalar_target"});
    read(t, "epochs", c.epochs);
    read(t, "gamma", c.gamma);
    read(t, "lr", c.lr);
    read(t, "batch_size", c.batch_size);
    read(t, "naive_scalar_target", c.naive_scalar_target);
  }
  read(j, "seed", c.seed);
  read(j, "seeds", c.seeds);
  read(j, "budgets", c.budgets);
  read(j, "methods", c.methods);
  if (j.contains("naive_rf_grid")) {
    const json& g = j["naive_rf_grid"];
    check_keys(g, "naive_rf_grid", {"n_estimators", "max_depth"});
    read(g, "n_estimators", c.naive_rf_grid.n_estimators);
    if (g.contains("max_depth")) {
      if (!g["max_depth"].is_array()) config_error("naive_rf_grid.max_depth must be an array");
      c.naive_rf_grid.max_depth.clear();
      for (const auto& v : g["max_depth"]) {
        if (v.is_null()) {
          c.naive_rf_grid.max_depth.push_back(std::nullopt);
        } else if (v.is_number_integer()) {
          c.naive_rf_grid.max_depth.push_back(v.get<int>());
        } else {
          config_error("naive_rf_grid.max_depth entries must be integers or null");
        }
      }
    }
  }
  read(j, "prune_to_budget", c.prune_to_budget);
  read(j, "bench_repetitions", c.bench_repetitions);
  if (j.contains("output_dir")) {
    std::string dir;
    read(j, "output_dir", dir);
    c.output_dir = dir;
  }
  validate(c);
  return c;
}

json config_to_json(const RunConfig& c) {
  json data = {{"target", c.data.target},
               {"task", std::string(to_string(c.data.task))},
               {"synthetic",
                {{"n", c.data.synthetic.n},
                 {"d", c.data.synthetic.d},
                 {"noise_sd", c.data.synthetic.noise_sd},
                 {"seed", c.data.synthetic.seed}}}};
  if (c.data.csv) data["csv"] = c.data.csv->string();
  if (c.data.matrix) data["matrix"] = c.data.matrix->string();
  json depths = json::array();
  for (const auto& d : c.naive_rf_grid.max_depth) depths.push_back(depth_json(d));
  return {{"data", data},
          {"base",
           {{"kind", std::string(to_string(c.base))},
            {"rf",
             {{"n_trees", c.rf_trees},
              {"max_depth", depth_json(c.rf_max_depth)},
              {"min_samples_leaf", c.rf_min_samples_leaf},
              {"mtry", c.rf_mtry},
              {"honest", c.rf_honest}}},
            {"gbm",
             {{"n_trees", c.gbm_trees},
              {"max_depth", depth_json(c.gbm_max_depth)},
              {"learning_rate", c.gbm_learning_rate}}}}},
          {"p", c.p},
          {"operator_cap", c.operator_cap},
          {"split", {{"train", c.ratios.train}, {"validation", c.ratios.validation}, {"test", c.ratios.test}}},
          {"arch", {{"width", c.arch.width}, {"depth", c.arch.depth}}},
          {"grid", {{"widths", c.widths}, {"depths", c.depths}}},
          {"train",
           {{"epochs", c.epochs},
            {"gamma", c.gamma},
            {"lr", c.lr},
            {"batch_size", c.batch_size},
            {"naive_scalar_target", c.naive_scalar_target}}},
          {"seed", c.seed},
          {"seeds", c.seeds},
          {"budgets", c.budgets},
          {"methods", c.methods},
          {"naive_rf_grid", {{"n_estimators", c.naive_rf_grid.n_estimators}, {"max_depth", depths}}},
          {"prune_to_budget", c.prune_to_budget},
          {"bench_repetitions", c.bench_repetitions},
          {"output_dir", c.output_dir.string()}};
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) config_error("cannot open config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    config_error("config " + path.string() + " is not valid JSON: " + e.what());
  }
  return config_from_json(j);
}

void validate(RunConfig& c) {
  auto positive = [](long long v, const char* name) {
    if (v < 1) config_error(std::string(name) + " must be positive");
  };
  positive(c.rf_trees, "base.rf.n_trees");
  positive(c.gbm_trees, "base.gbm.n_trees");
  positive(c.rf_min_samples_leaf, "base.rf.min_samples_leaf");
  if (c.rf_mtry < 0) config_error("base.rf.mtry must be >= 0");
  if (c.rf_max_depth && *c.rf_max_depth < 0) config_error("base.rf.max_depth must be >= 0");
  if (c.gbm_max_depth && *c.gbm_max_depth < 0) config_error("base.gbm.max_depth must be >= 0");
  if (!(c.gbm_learning_rate > 0.0 && c.gbm_learning_rate <= 1.0)) {
    config_error("base.gbm.learning_rate must lie in (0, 1]");
  }
  positive(c.p, "p");
  positive(c.operator_cap, "operator_cap");
  positive(c.arch.width, "arch.width");
  positive(c.arch.depth, "arch.depth");
  positive(c.epochs, "train.epochs");
  positive(c.bench_repetitions, "bench_repetitions");
  if (c.gamma < 0.0) config_error("train.gamma must be >= 0");
  if (!(c.lr > 0.0)) config_error("train.lr must be positive");
  if (c.batch_size < 0) config_error("train.batch_size must be >= 0");
  if (c.widths.empty() || c.depths.empty()) config_error("grid must be non-empty");
  for (int w : c.widths) positive(w, "grid.widths");
  for (int d : c.depths) positive(d, "grid.depths");
  if (c.seeds.empty()) config_error("seeds must be non-empty");
  if (c.budgets.empty()) config_error("budgets must be non-empty");
  for (auto b : c.budgets) positive(static_cast<long long>(b), "budgets");
  std::sort(c.budgets.begin(), c.budgets.end());
  c.budgets.erase(std::unique(c.budgets.begin(), c.budgets.end()), c.budgets.end());
  static const std::set<std::string> known{"scate", "naive_mlp", "naive_rf", "oracle", "base"};
  if (c.methods.empty()) config_error("methods must be non-empty");
  for (const auto& m : c.methods) {
    if (!known.contains(m)) config_error("unknown method '" + m + "'");
  }
  for (int n : c.naive_rf_grid.n_estimators) positive(n, "naive_rf_grid.n_estimators");
  if (c.data.synthetic.n < 1) config_error("data.synthetic.n must be positive");
  if (c.data.synthetic.d < 5) config_error("data.synthetic.d must be at least 5");
  if (c.data.synthetic.noise_sd < 0.0) config_error("data.synthetic.noise_sd must be >= 0");
  const double total = c.ratios.train + c.ratios.validation + c.ratios.test;
  if (c.ratios.train <= 0.0 || c.ratios.validation < 0.0 || c.ratios.test <= 0.0 || std::abs(total - 1.0) > 1e-9) {
    config_error("split ratios must be non-negative, with positive train/test, and sum to 1");
  }
}

Dataset load_dataset(const RunConfig& config) {
  if (config.data.csv) return load_csv(*config.data.csv, config.data.target, config.data.task);
  const auto& s = config.data.synthetic;
  return gen_friedman1(s.n, s.d, s.noise_sd, s.seed);
}

}  // namespace scate::cli

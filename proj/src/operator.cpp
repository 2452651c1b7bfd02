#include "scate/operator.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <numeric>

#include "scate/error.hpp"
#include "scate/rng.hpp"

namespace scate {

namespace {

// Leaf groups for one tree given which normalization rows reach which leaf.
kernels::TreeGroups build_groups(const Tree& tree, const std::vector<int>& norm_leaf,
                                 const std::vector<int>& norm_cols) {
  const int nodes = tree.node_count();
  std::vector<std::vector<int>> leaf_members(nodes);
  for (std::size_t k = 0; k < norm_cols.size(); ++k) leaf_members[norm_leaf[k]].push_back(norm_cols[k]);

  std::vector<int> count(nodes, 0);
  for (int node = nodes - 1; node >= 0; --node) {
    // Children always carry larger indices than their parent.
    count[node] = tree.is_leaf(node) ? static_cast<int>(leaf_members[node].size())
                                     : count[tree.left[node]] + count[tree.right[node]];
  }
  const auto parent = tree.parents();

  kernels::TreeGroups groups;
  std::vector<int> group_of_source(nodes, -1);
  std::vector<int> group_of_leaf(nodes, -1);
  for (int node = 0; node < nodes; ++node) {
    if (!tree.is_leaf(node)) continue;
    int source = node;
    while (count[source] == 0) {
      if (parent[source] < 0) throw Error(ErrorCode::EmptyTraining, "tree has no normalization rows");
      source = parent[source];
    }
    if (group_of_source[source] < 0) {
      group_of_source[source] = static_cast<int>(groups.members.size());
      std::vector<int> members;
      std::vector<int> stack{source};
      while (!stack.empty()) {
        const int v = stack.back();
        stack.pop_back();
        if (tree.is_leaf(v)) {
          members.insert(members.end(), leaf_members[v].begin(), leaf_members[v].end());
        } else {
          stack.push_back(tree.right[v]);
          stack.push_back(tree.left[v]);
        }
      }
      std::sort(members.begin(), members.end());
      groups.members.push_back(std::move(members));
    }
    group_of_leaf[node] = group_of_source[source];
  }
  // group_of_row is filled by the caller; stash the leaf mapping there temporarily.
  groups.group_of_row = std::move(group_of_leaf);
  return groups;
}

std::vector<int> leaves_of(const Tree& tree, const Matrix& X) {
  std::vector<int> leaves(static_cast<std::size_t>(X.rows()));
  for (Eigen::Index i = 0; i < X.rows(); ++i) leaves[i] = leaf_id(tree, row_span(X, i));
  return leaves;
}

void check_features(int expected, const Matrix& X) {
  if (X.cols() != expected) {
    throw Error(ErrorCode::DimensionMismatch,
                "expected " + std::to_string(expected) + " features, got " + std::to_string(X.cols()));
  }
}

}  // namespace

std::uint64_t fingerprint(const Forest& forest) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&h](std::uint64_t v) {
    h ^= v;
    h *= 0x100000001b3ULL;
  };
  for (const auto& tree : forest.trees) {
    mix(static_cast<std::uint64_t>(tree.node_count()));
    for (int node = 0; node < tree.node_count(); ++node) {
      mix(static_cast<std::uint64_t>(tree.feature[node] + 1));
      mix(std::bit_cast<std::uint64_t>(tree.threshold[node]));
    }
  }
  return h;
}

std::vector<kernels::TreeGroups> forest_groups(const Forest& forest, const Matrix& X_train,
                                               const Matrix& X_rows) {
  check_features(forest.n_features, X_train);
  check_features(forest.n_features, X_rows);
  const int n = static_cast<int>(X_train.rows());
  std::vector<int> all_cols(n);
  std::iota(all_cols.begin(), all_cols.end(), 0);
  const bool same_rows = &X_train == &X_rows;

  std::vector<kernels::TreeGroups> out(forest.trees.size());
#pragma omp parallel for schedule(dynamic)
  for (int b = 0; b < forest.size(); ++b) {
    const Tree& tree = forest.trees[b];
    const auto train_leaf = leaves_of(tree, X_train);
    const std::vector<int>& cols = forest.honest() ? forest.label_rows[b] : all_cols;
    std::vector<int> norm_leaf(cols.size());
    for (std::size_t k = 0; k < cols.size(); ++k) norm_leaf[k] = train_leaf[cols[k]];
    auto groups = build_groups(tree, norm_leaf, cols);
    const std::vector<int> leaf_to_group = std::move(groups.group_of_row);
    const auto row_leaf = same_rows ? train_leaf : leaves_of(tree, X_rows);
    groups.group_of_row.resize(row_leaf.size());
    for (std::size_t i = 0; i < row_leaf.size(); ++i) groups.group_of_row[i] = leaf_to_group[row_leaf[i]];
    out[b] = std::move(groups);
  }
  return out;
}

KernelMatrix rf_kernel_matrix(const Forest& forest, const Matrix& X_train) {
  const auto groups = forest_groups(forest, X_train, X_train);
  const int n = static_cast<int>(X_train.rows());
  return {kernels::kernel_accumulate(groups, n, n), n, fingerprint(forest)};
}

KernelMatrix rf_kernel_matrix_serial(const Forest& forest, const Matrix& X_train) {
  const auto groups = forest_groups(forest, X_train, X_train);
  const int n = static_cast<int>(X_train.rows());
  return {kernels::kernel_accumulate_serial(groups, n, n), n, fingerprint(forest)};
}

Matrix rf_kernel_cross(const Forest& forest, const Matrix& X_train, const Matrix& X_query) {
  const auto groups = forest_groups(forest, X_train, X_query);
  return kernels::kernel_accumulate(groups, static_cast<int>(X_query.rows()),
                                    static_cast<int>(X_train.rows()));
}

KernelDiagnostics diagnose_kernel(const Matrix& K) {
  KernelDiagnostics d;
  d.max_asymmetry = (K - K.transpose()).cwiseAbs().maxCoeff();
  d.max_row_sum_error = (K.rowwise().sum().array() - 1.0).abs().maxCoeff();
  d.max_col_sum_error = (K.colwise().sum().array() - 1.0).abs().maxCoeff();
  d.min_entry = K.minCoeff();
  d.max_entry = K.maxCoeff();
  return d;
}

namespace {

template <typename RoundFn>
SmootherState build_smoother(const GbmModel& model, const Matrix& X_train, RoundFn&& round) {
  check_features(model.n_features, X_train);
  const int n = static_cast<int>(X_train.rows());
  SmootherState state;
  state.eta = model.learning_rate;
  state.matrix = Matrix::Zero(n, n);
  std::vector<int> rows(n);
  std::iota(rows.begin(), rows.end(), 0);
  for (const Tree& tree : model.trees) {
    const auto leaves = leaves_of(tree, X_train);
    std::vector<int> counts(tree.node_count(), 0);
    for (int leaf : leaves) ++counts[leaf];
    for (int node = 0; node < tree.node_count(); ++node) {
      if (tree.is_leaf(node) && counts[node] != tree.n_node_samples[node]) {
        throw Error(ErrorCode::ModelDataMismatch,
                    "leaf " + std::to_string(node) + " holds " + std::to_string(counts[node]) +
                        " rows, tree was fit with " + std::to_string(tree.n_node_samples[node]));
      }
    }
    auto groups = build_groups(tree, leaves, rows);
    SmootherRound r;
    r.group_of_node = std::move(groups.group_of_row);
    groups.group_of_row.resize(n);
    for (int i = 0; i < n; ++i) groups.group_of_row[i] = r.group_of_node[leaves[i]];
    r.correction = round(state.matrix, groups, model.learning_rate);
    r.members = std::move(groups.members);
    state.rounds.push_back(std::move(r));
  }
  return state;
}

}  // namespace

SmootherState gbm_smoother_matrix(const GbmModel& model, const Matrix& X_train) {
  return build_smoother(model, X_train, kernels::smoother_round);
}

SmootherState gbm_smoother_matrix_serial(const GbmModel& model, const Matrix& X_train) {
  return build_smoother(model, X_train, kernels::smoother_round_serial);
}

Vector gbm_smoother_row(const SmootherState& state, const GbmModel& model, std::span<const double> x) {
  if (static_cast<int>(x.size()) != model.n_features) {
    throw Error(ErrorCode::DimensionMismatch, "query has wrong feature count");
  }
  const auto n = state.matrix.cols();
  Vector row = Vector::Zero(n);
  for (std::size_t b = 0; b < state.rounds.size(); ++b) {
    const auto& r = state.rounds[b];
    const int g = r.group_of_node[leaf_id(model.trees[b], x)];
    kernels::apply_round(row.data(), n, r.members[g], r.correction.row(g).data(), state.eta);
  }
  return row;
}

Matrix gbm_smoother_rows(const SmootherState& state, const GbmModel& model, const Matrix& X) {
  check_features(model.n_features, X);
  Matrix out(X.rows(), state.matrix.cols());
#pragma omp parallel for schedule(static)
  for (Eigen::Index i = 0; i < X.rows(); ++i) out.row(i) = gbm_smoother_row(state, model, row_span(X, i)).transpose();
  return out;
}

std::vector<int> subsample_operator(const std::vector<int>& rows, int cap, std::uint64_t seed) {
  if (static_cast<int>(rows.size()) <= cap) return rows;
  Rng rng(derive_seed(seed, {0x6f70ULL}));
  auto picks = rng.sample_without_replacement(static_cast<int>(rows.size()), cap);
  std::sort(picks.begin(), picks.end());
  std::vector<int> out;
  out.reserve(picks.size());
  for (int p : picks) out.push_back(rows[p]);
  return out;
}

namespace {

constexpr char kMatrixMagic[8] = {'S', 'C', 'T', 'E', 'M', 'A', 'T', '0'};

template <typename T>
void put_le(std::vector<std::uint8_t>& out, T value) {
  auto bits = std::bit_cast<std::array<std::uint8_t, sizeof(T)>>(value);
  if constexpr (std::endian::native == std::endian::big) std::reverse(bits.begin(), bits.end());
  out.insert(out.end(), bits.begin(), bits.end());
}

template <typename T>
T get_le(std::span<const std::uint8_t> bytes, std::size_t offset) {
  std::array<std::uint8_t, sizeof(T)> bits{};
  std::memcpy(bits.data(), bytes.data() + offset, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bits.begin(), bits.end());
  return std::bit_cast<T>(bits);
}

}  // namespace

std::vector<std::uint8_t> encode_matrix(const Matrix& M) {
  std::vector<std::uint8_t> out(std::begin(kMatrixMagic), std::end(kMatrixMagic));
  put_le<std::uint64_t>(out, static_cast<std::uint64_t>(M.rows()));
  put_le<std::uint64_t>(out, static_cast<std::uint64_t>(M.cols()));
  out.reserve(out.size() + static_cast<std::size_t>(M.size()) * 8);
  for (Eigen::Index i = 0; i < M.rows(); ++i) {
    for (Eigen::Index j = 0; j < M.cols(); ++j) put_le<double>(out, M(i, j));
  }
  return out;
}

Matrix decode_matrix(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 24) throw Error(ErrorCode::Truncated, "matrix header");
  if (std::memcmp(bytes.data(), kMatrixMagic, 8) != 0) throw Error(ErrorCode::BadMagic, "not a SCTEMAT0 file");
  const auto rows = get_le<std::uint64_t>(bytes, 8);
  const auto cols = get_le<std::uint64_t>(bytes, 16);
  if (bytes.size() != 24 + rows * cols * 8) throw Error(ErrorCode::Truncated, "matrix payload");
  Matrix M(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  std::size_t offset = 24;
  for (Eigen::Index i = 0; i < M.rows(); ++i) {
    for (Eigen::Index j = 0; j < M.cols(); ++j, offset += 8) M(i, j) = get_le<double>(bytes, offset);
  }
  return M;
}

void write_matrix(const Matrix& M, const std::filesystem::path& path) {
  const auto bytes = encode_matrix(M);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

Matrix read_matrix(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_matrix(bytes);
}

}  // namespace scate

#include "scate/parallel_kernels.hpp"

namespace scate::kernels {

namespace {

inline void add_tree_row(const TreeGroups& tree, int i, double* row) {
  const auto& cols = tree.members[tree.group_of_row[i]];
  const double w = 1.0 / static_cast<double>(cols.size());
  for (int j : cols) row[j] += w;
}

inline void correction_row(const Matrix& smoother, const std::vector<int>& members, double* out) {
  const auto n = smoother.cols();
  for (Eigen::Index j = 0; j < n; ++j) out[j] = 0.0;
  for (int i : members) {
    const double* src = smoother.row(i).data();
    for (Eigen::Index j = 0; j < n; ++j) out[j] += src[j];
  }
  const double inv = 1.0 / static_cast<double>(members.size());
  for (Eigen::Index j = 0; j < n; ++j) out[j] *= inv;
}

inline void update_smoother_row(Matrix& smoother, const TreeGroups& groups, const Matrix& correction,
                                double eta, int i) {
  const int g = groups.group_of_row[i];
  apply_round(smoother.row(i).data(), smoother.cols(), groups.members[g], correction.row(g).data(), eta);
}

inline void dense_forward_row(const Matrix& X, const Matrix& W, const Vector& b, Matrix& out,
                              Eigen::Index i) {
  const auto in = W.rows();
  const auto fan_out = W.cols();
  double* o = out.row(i).data();
  const double* x = X.row(i).data();
  for (Eigen::Index c = 0; c < fan_out; ++c) o[c] = b(c);
  for (Eigen::Index k = 0; k < in; ++k) {
    const double xk = x[k];
    const double* w = W.row(k).data();
    for (Eigen::Index c = 0; c < fan_out; ++c) o[c] += xk * w[c];
  }
}

inline void dense_weight_grad_row(const Matrix& X, const Matrix& G, Matrix& dW, Eigen::Index k) {
  const auto fan_out = G.cols();
  double* out = dW.row(k).data();
  for (Eigen::Index c = 0; c < fan_out; ++c) out[c] = 0.0;
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    const double xik = X(i, k);
    const double* g = G.row(i).data();
    for (Eigen::Index c = 0; c < fan_out; ++c) out[c] += xik * g[c];
  }
}

inline void dense_input_grad_row(const Matrix& W, const Matrix& G, Matrix& dX, Eigen::Index i) {
  const double* g = G.row(i).data();
  double* out = dX.row(i).data();
  for (Eigen::Index k = 0; k < W.rows(); ++k) {
    const double* w = W.row(k).data();
    double acc = 0.0;
    for (Eigen::Index c = 0; c < W.cols(); ++c) acc += g[c] * w[c];
    out[k] = acc;
  }
}

inline void bias_grad(const Matrix& G, Vector& db) {
  db = Vector::Zero(G.cols());
  for (Eigen::Index i = 0; i < G.rows(); ++i) {
    for (Eigen::Index c = 0; c < G.cols(); ++c) db(c) += G(i, c);
  }
}

}  // namespace

void apply_round(double* row, Eigen::Index n, const std::vector<int>& leaf_members,
                 const double* correction, double eta) {
  for (Eigen::Index j = 0; j < n; ++j) row[j] -= eta * correction[j];
  const double w = eta / static_cast<double>(leaf_members.size());
  for (int j : leaf_members) row[j] += w;
}

Matrix kernel_accumulate(const std::vector<TreeGroups>& trees, int n_rows, int n_cols) {
  Matrix K = Matrix::Zero(n_rows, n_cols);
  const double inv_b = 1.0 / static_cast<double>(trees.size());
#pragma omp parallel for schedule(dynamic, 16)
  for (int i = 0; i < n_rows; ++i) {
    double* row = K.row(i).data();
    for (const auto& tree : trees) add_tree_row(tree, i, row);
    for (int j = 0; j < n_cols; ++j) row[j] *= inv_b;
  }
  return K;
}

Matrix kernel_accumulate_serial(const std::vector<TreeGroups>& trees, int n_rows, int n_cols) {
  Matrix K = Matrix::Zero(n_rows, n_cols);
  for (const auto& tree : trees) {
    for (int i = 0; i < n_rows; ++i) add_tree_row(tree, i, K.row(i).data());
  }
  K *= 1.0 / static_cast<double>(trees.size());
  return K;
}

Matrix smoother_round(Matrix& smoother, const TreeGroups& groups, double eta) {
  const int n_groups = static_cast<int>(groups.members.size());
  Matrix correction(n_groups, smoother.cols());
#pragma omp parallel for schedule(static)
  for (int g = 0; g < n_groups; ++g) correction_row(smoother, groups.members[g], correction.row(g).data());
#pragma omp parallel for schedule(static)
  for (int i = 0; i < static_cast<int>(smoother.rows()); ++i) {
    update_smoother_row(smoother, groups, correction, eta, i);
  }
  return correction;
}

Matrix smoother_round_serial(Matrix& smoother, const TreeGroups& groups, double eta) {
  const int n_groups = static_cast<int>(groups.members.size());
  Matrix correction(n_groups, smoother.cols());
  for (int g = 0; g < n_groups; ++g) correction_row(smoother, groups.members[g], correction.row(g).data());
  for (int i = 0; i < static_cast<int>(smoother.rows()); ++i) {
    update_smoother_row(smoother, groups, correction, eta, i);
  }
  return correction;
}

void dense_forward(const Matrix& X, const Matrix& W, const Vector& b, Matrix& out) {
  out.resize(X.rows(), W.cols());
#pragma omp parallel for schedule(static) if (X.rows() * W.size() > 32768)
  for (Eigen::Index i = 0; i < X.rows(); ++i) dense_forward_row(X, W, b, out, i);
}

void dense_forward_serial(const Matrix& X, const Matrix& W, const Vector& b, Matrix& out) {
  out.resize(X.rows(), W.cols());
  for (Eigen::Index i = 0; i < X.rows(); ++i) dense_forward_row(X, W, b, out, i);
}

void dense_backward(const Matrix& X, const Matrix& W, const Matrix& G, Matrix& dW, Vector& db,
                    Matrix* dX) {
  dW.resize(W.rows(), W.cols());
  const bool big = X.rows() * W.size() > 32768;
#pragma omp parallel for schedule(static) if (big)
  for (Eigen::Index k = 0; k < W.rows(); ++k) dense_weight_grad_row(X, G, dW, k);
  bias_grad(G, db);
  if (dX) {
    dX->resize(X.rows(), X.cols());
#pragma omp parallel for schedule(static) if (big)
    for (Eigen::Index i = 0; i < X.rows(); ++i) dense_input_grad_row(W, G, *dX, i);
  }
}

void dense_backward_serial(const Matrix& X, const Matrix& W, const Matrix& G, Matrix& dW, Vector& db,
                           Matrix* dX) {
  dW.resize(W.rows(), W.cols());
  for (Eigen::Index k = 0; k < W.rows(); ++k) dense_weight_grad_row(X, G, dW, k);
  bias_grad(G, db);
  if (dX) {
    dX->resize(X.rows(), X.cols());
    for (Eigen::Index i = 0; i < X.rows(); ++i) dense_input_grad_row(W, G, *dX, i);
  }
}

}  // namespace scate::kernels

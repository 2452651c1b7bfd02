#pragma once

// Data-parallel inner loops. Each kernel has an OpenMP version and a serial reference
// with the same per-element accumulation order, so both produce bit-identical results
// for any thread count. The serial versions back the tests and the benchmark target.

#include <vector>

#include "scate/types.hpp"

namespace scate::kernels {

// Leaf co-membership structure of one tree over a set of normalization rows.
// group_of_row[i] is the weight group of query/row i; members[g] are the normalization
// columns sharing that group.
struct TreeGroups {
  std::vector<int> group_of_row;
  std::vector<std::vector<int>> members;
};

// K(i, j) = (1/B) sum_b 1{j in members[group_of_row[i]]} / |members[...]|
Matrix kernel_accumulate(const std::vector<TreeGroups>& trees, int n_rows, int n_cols);
Matrix kernel_accumulate_serial(const std::vector<TreeGroups>& trees, int n_rows, int n_cols);

// One boosting round of the smoother recursion applied in place to the stacked rows:
// correction row g is the mean of `smoother` rows over members[g], then
// smoother(i,:) += eta * (tree weights(i) - correction(group_of_row[i], :)).
// Returns the correction matrix (one row per group).
// Single-row form of the round update, shared by the stacked and out-of-sample paths.
void apply_round(double* row, Eigen::Index n, const std::vector<int>& leaf_members,
                 const double* correction, double eta);

Matrix smoother_round(Matrix& smoother, const TreeGroups& groups, double eta);
Matrix smoother_round_serial(Matrix& smoother, const TreeGroups& groups, double eta);

// Dense layer: out = X * W + 1 b^T with W stored (fan_in x fan_out) row-major.
// Each output is accumulated over k in increasing order.
void dense_forward(const Matrix& X, const Matrix& W, const Vector& b, Matrix& out);
void dense_forward_serial(const Matrix& X, const Matrix& W, const Vector& b, Matrix& out);

// Gradients of a dense layer: dW = X^T G, db = colsum(G), dX = G W^T (dX optional).
void dense_backward(const Matrix& X, const Matrix& W, const Matrix& G, Matrix& dW, Vector& db,
                    Matrix* dX);
void dense_backward_serial(const Matrix& X, const Matrix& W, const Matrix& G, Matrix& dW, Vector& db,
                           Matrix* dX);

}  // namespace scate::kernels

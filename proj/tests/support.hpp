#pragma once

// Shared fixtures and independent reference computations for the test suites.

#include <algorithm>
#include <cmath>
#include <vector>

#include "scate/cart.hpp"
#include "scate/data.hpp"
#include "scate/ensemble.hpp"
#include "scate/rng.hpp"
#include "scate/types.hpp"

namespace scate::testing {

inline Matrix random_matrix(int rows, int cols, Rng& rng) {
  Matrix m(rows, cols);
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < cols; ++j) m(i, j) = rng.normal();
  }
  return m;
}

inline Matrix random_psd(int n, Rng& rng) {
  const Matrix a = random_matrix(n, n, rng);
  return a * a.transpose();
}

inline Vector random_vector(int n, Rng& rng) {
  Vector v(n);
  for (int i = 0; i < n; ++i) v(i) = rng.normal();
  return v;
}

// Small random regression problem with a few tied feature values.
inline Dataset random_dataset(int n, int d, Rng& rng, bool classification = false) {
  Dataset data;
  data.features.resize(n, d);
  data.target.resize(n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < d; ++j) {
      data.features(i, j) = std::round(rng.uniform() * 40.0) / 40.0;
    }
    const double signal = std::sin(3.0 * data.features(i, 0)) + (d > 1 ? data.features(i, 1) : 0.0);
    data.target(i) = classification ? (signal + 0.3 * rng.normal() > 0.8 ? 1.0 : 0.0) : signal + 0.1 * rng.normal();
  }
  data.task = classification ? Task::BinaryClassification : Task::Regression;
  for (int j = 0; j < d; ++j) data.feature_names.push_back("x" + std::to_string(j));
  data.column_kinds.assign(d, ColumnKind::Numeric);
  return data;
}

inline Dataset from_arrays(const std::vector<std::vector<double>>& rows, const std::vector<double>& y) {
  Dataset data;
  data.features.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
  data.target.resize(static_cast<Eigen::Index>(y.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < rows[i].size(); ++j) data.features(i, j) = rows[i][j];
    data.target(i) = y[i];
  }
  for (std::size_t j = 0; j < rows.front().size(); ++j) {
    data.feature_names.push_back("x" + std::to_string(j));
    data.column_kinds.push_back(ColumnKind::Numeric);
  }
  return data;
}

// Kernel straight from the pairwise definition: (1/B) sum_b 1{same leaf} / |training rows in leaf|.
inline Matrix brute_force_kernel(const Forest& forest, const Matrix& X_train, const Matrix& X_query) {
  const int n = static_cast<int>(X_train.rows());
  const int q = static_cast<int>(X_query.rows());
  Matrix K = Matrix::Zero(q, n);
  for (const Tree& tree : forest.trees) {
    std::vector<int> train_leaf(n);
    for (int j = 0; j < n; ++j) train_leaf[j] = leaf_id(tree, row_span(X_train, j));
    for (int i = 0; i < q; ++i) {
      const int li = leaf_id(tree, row_span(X_query, i));
      const double count = static_cast<double>(std::count(train_leaf.begin(), train_leaf.end(), li));
      for (int j = 0; j < n; ++j) {
        if (train_leaf[j] == li) K(i, j) += 1.0 / count;
      }
    }
  }
  return K / static_cast<double>(forest.trees.size());
}

struct JacobiSvd {
  Vector sigma;  // descending
  Matrix U;
  Matrix V;
};

// One-sided Jacobi SVD: orthogonalize column pairs of A by plane rotations until every
// pair is numerically orthogonal. Independent of Eigen's decompositions.
inline JacobiSvd jacobi_svd(const Matrix& A_in) {
  Matrix A = A_in;
  const int n = static_cast<int>(A.cols());
  Matrix V = Matrix::Identity(n, n);
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (int p = 0; p < n - 1; ++p) {
      for (int q = p + 1; q < n; ++q) {
        double alpha = 0.0, beta = 0.0, gamma = 0.0;
        for (int i = 0; i < A.rows(); ++i) {
          alpha += A(i, p) * A(i, p);
          beta += A(i, q) * A(i, q);
          gamma += A(i, p) * A(i, q);
        }
        if (std::abs(gamma) <= 1e-15 * std::sqrt(alpha * beta) || gamma == 0.0) continue;
        off = std::max(off, std::abs(gamma) / std::sqrt(alpha * beta));
        const double zeta = (beta - alpha) / (2.0 * gamma);
        const double t = (zeta >= 0 ? 1.0 : -1.0) / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = c * t;
        for (int i = 0; i < A.rows(); ++i) {
          const double ap = A(i, p), aq = A(i, q);
          A(i, p) = c * ap - s * aq;
          A(i, q) = s * ap + c * aq;
        }
        for (int i = 0; i < n; ++i) {
          const double vp = V(i, p), vq = V(i, q);
          V(i, p) = c * vp - s * vq;
          V(i, q) = s * vp + c * vq;
        }
      }
    }
    if (off < 1e-15) break;
  }
  std::vector<int> order(n);
  Vector norms(n);
  for (int j = 0; j < n; ++j) {
    norms(j) = A.col(j).norm();
    order[j] = j;
  }
  std::sort(order.begin(), order.end(), [&](int a, int b) { return norms(a) > norms(b); });
  JacobiSvd out;
  out.sigma.resize(n);
  out.U.resize(A.rows(), n);
  out.V.resize(n, n);
  for (int k = 0; k < n; ++k) {
    const int j = order[k];
    out.sigma(k) = norms(j);
    out.U.col(k) = norms(j) > 0 ? Vector(A.col(j) / norms(j)) : Vector(Vector::Zero(A.rows()));
    out.V.col(k) = V.col(j);
  }
  return out;
}

// Textbook least-squares slope/intercept/r2 by explicit sums.
struct Ols {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
};

inline Ols ols(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    sxy += x[i] * y[i];
  }
  Ols r;
  r.slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  r.intercept = (sy - r.slope * sx) / n;
  double ss_res = 0, ss_tot = 0;
  const double mean = sy / n;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double e = y[i] - (r.intercept + r.slope * x[i]);
    ss_res += e * e;
    ss_tot += (y[i] - mean) * (y[i] - mean);
  }
  r.r2 = ss_tot > 0 ? 1.0 - ss_res / ss_tot : 1.0;
  return r;
}

inline double max_abs(const Matrix& m) { return m.size() ? m.cwiseAbs().maxCoeff() : 0.0; }

}  // namespace scate::testing

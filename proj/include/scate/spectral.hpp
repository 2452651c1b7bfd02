#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>

#include "scate/types.hpp"

namespace scate {

// Eigenpairs sorted by descending eigenvalue. rank_full is the order of the decomposed
// matrix; the decomposition is complete when eigenvalues.size() == rank_full.
struct EigenDecomposition {
  Vector eigenvalues;
  Matrix eigenvectors;  // N x P, orthonormal columns
  int rank_full = 0;
  bool converged = true;  // false when subspace iteration stopped at its pass budget

  int rank() const { return static_cast<int>(eigenvalues.size()); }
  bool complete() const { return rank() == rank_full; }
};

struct SvdTriplet {
  Matrix U;  // N x P
  Vector sigma;
  Matrix V;  // N x P
  int rank_full = 0;
  bool converged = true;

  int rank() const { return static_cast<int>(sigma.size()); }
  bool complete() const { return rank() == rank_full; }
};

struct DecayFit {
  double beta = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
  int n_points = 0;
};

struct EigOptions {
  int dense_threshold = 2000;  // full dense solve at or below this order
  int oversample = 10;
  int power_iters = 4;  // minimum passes
  int max_iters = 64;
  std::uint64_t seed = 0;
};

// Flips each column so its largest-magnitude entry is positive; `partner` columns are
// flipped in tandem (V for an SVD).
void apply_sign_convention(Matrix& vectors, Matrix* partner = nullptr);

// Top-P eigenpairs of a symmetric matrix (P = std::nullopt keeps all N). Dense
// tridiagonal QL below the threshold, randomized block Krylov iteration with thick
// restarts above it (block width P + oversample, basis capped at max(6 block, 600)
// columns). The iteration runs at least power_iters passes and stops once every Ritz
// residual is within 1e-6 max(lambda_1, 1), or at max_iters with converged = false.
EigenDecomposition eig_sym(const Matrix& K, std::optional<int> P = std::nullopt,
                           const EigOptions& options = {});

// Same block Krylov scheme on S^T S from a Gaussian start; sigma_j and u_j are taken
// from S v_j. Stops once ||S^T u_j - sigma_j v_j|| <= 1e-6 max(sigma_1, 1) sigma_j.
SvdTriplet svd_trunc(const Matrix& S, int P, int oversample = 10, int power_iters = 4,
                     std::uint64_t seed = 0, int max_iters = 64);

// OLS of log(lambda_i) on log(i) over the positive values among the top_m, dropping
// values at or below 1e-14 * lambda_1. beta is the negated slope.
DecayFit decay_fit(const Vector& eigenvalues, int top_m);

// Frobenius error of the rank-P truncation, sqrt(sum_{j>P} lambda_j^2).
double eckart_young_error(const EigenDecomposition& decomp, int P);
double eckart_young_error(const SvdTriplet& decomp, int P);

// index,eigenvalue rows followed by a JSON footer line with the decay fit.
void write_spectrum_csv(const Vector& values, const std::optional<DecayFit>& fit,
                        const std::filesystem::path& path, const std::string& value_name = "eigenvalue");

}  // namespace scate

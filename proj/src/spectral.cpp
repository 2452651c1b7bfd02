#include "scate/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include <json.hpp>

#include "scate/error.hpp"
#include "scate/rng.hpp"

namespace scate {

namespace {

using ColMatrix = Eigen::MatrixXd;

ColMatrix gaussian(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed) {
  Rng rng(seed);
  ColMatrix G(rows, cols);
  // Column-major fill order keeps the draw sequence independent of storage choices.
  for (Eigen::Index j = 0; j < cols; ++j) {
    for (Eigen::Index i = 0; i < rows; ++i) G(i, j) = rng.normal();
  }
  return G;
}

ColMatrix orthonormalize(const ColMatrix& Y) {
  Eigen::HouseholderQR<ColMatrix> qr(Y);
  return qr.householderQ() * ColMatrix::Identity(Y.rows(), Y.cols());
}

// Orthonormal block spanning W with the span of `basis` removed (two projection passes).
ColMatrix extend_basis(const ColMatrix& basis, ColMatrix W) {
  for (int pass = 0; pass < 2; ++pass) {
    W -= basis * (basis.transpose() * W);
    W = orthonormalize(W);
  }
  return W;
}

struct KrylovOutcome {
  Vector values;     // Ritz values of M, descending
  ColMatrix vectors;  // n x keep
  ColMatrix side;     // side products of the vectors (A v for an SVD)
  bool converged = false;
};

// Top eigenpairs of a symmetric operator M through block Krylov iteration with thick
// restarts. `apply(W, side)` returns M W and may fill side products; `accept(values,
// residual_norms)` decides convergence. Counts one pass per application of M.
template <class Apply, class Accept>
KrylovOutcome block_krylov(Apply apply, Accept accept, Eigen::Index n, int keep, int block, int min_passes,
                           int max_passes, std::uint64_t seed) {
  const Eigen::Index cap = std::min<Eigen::Index>(n, std::max<Eigen::Index>(6 * block, 600));
  ColMatrix B = orthonormalize(gaussian(n, block, seed));
  ColMatrix side;
  ColMatrix MB = apply(B, side);
  ColMatrix SB = side;
  KrylovOutcome out;
  for (int pass = 1;; ++pass) {
    const ColMatrix T = B.transpose() * MB;
    Eigen::SelfAdjointEigenSolver<ColMatrix> solver(0.5 * (T + T.transpose()));
    if (solver.info() != Eigen::Success) {
      throw Error(ErrorCode::ConvergenceFailure, "projected eigenproblem did not converge");
    }
    const Eigen::Index m = B.cols();
    const int held = static_cast<int>(std::min<Eigen::Index>(block, m));
    const Vector values = solver.eigenvalues().reverse().head(held);
    const ColMatrix S = solver.eigenvectors().rowwise().reverse().leftCols(held);
    const ColMatrix X = B * S;
    const ColMatrix MX = MB * S;
    const ColMatrix R = MX - X * values.asDiagonal();
    const Vector norms = R.leftCols(keep).colwise().norm();
    const bool settled = pass >= min_passes && accept(values.head(keep), norms);
    if (settled || pass >= std::max(max_passes, min_passes) || m >= n) {
      out.values = values.head(keep);
      out.vectors = X.leftCols(keep);
      if (SB.size()) out.side = (SB * S).leftCols(keep);
      out.converged = settled || (m >= n && accept(values.head(keep), norms));
      return out;
    }
    ColMatrix next;
    if (m + block > cap) {
      // Thick restart on the leading Ritz block; its residuals extend the space.
      B = X;
      MB = MX;
      if (SB.size()) SB = SB * S;
      next = extend_basis(B, R);
    } else {
      next = extend_basis(B, MB.rightCols(std::min<Eigen::Index>(block, MB.cols())));
    }
    next = next.leftCols(std::min<Eigen::Index>(next.cols(), n - B.cols()));
    const ColMatrix Mnext = apply(next, side);
    const Eigen::Index old = B.cols();
    B.conservativeResize(Eigen::NoChange, old + next.cols());
    B.rightCols(next.cols()) = next;
    MB.conservativeResize(Eigen::NoChange, old + next.cols());
    MB.rightCols(next.cols()) = Mnext;
    if (side.size()) {
      SB.conservativeResize(side.rows(), old + next.cols());
      SB.rightCols(next.cols()) = side;
    }
  }
}

}  // namespace

void apply_sign_convention(Matrix& vectors, Matrix* partner) {
  for (Eigen::Index j = 0; j < vectors.cols(); ++j) {
    const double peak = vectors.col(j).cwiseAbs().maxCoeff();
    // First entry within rounding of the peak decides, so ties resolve by index.
    Eigen::Index pick = 0;
    for (Eigen::Index i = 0; i < vectors.rows(); ++i) {
      if (std::abs(vectors(i, j)) >= peak * (1.0 - 1e-9)) {
        pick = i;
        break;
      }
    }
    if (vectors(pick, j) < 0.0) {
      vectors.col(j) *= -1.0;
      if (partner) partner->col(j) *= -1.0;
    }
  }
}

EigenDecomposition eig_sym(const Matrix& K, std::optional<int> P, const EigOptions& options) {
  const auto n = static_cast<int>(K.rows());
  if (K.rows() != K.cols()) throw Error(ErrorCode::NotSymmetric, "matrix is not square");
  const double scale = std::max(1.0, K.cwiseAbs().maxCoeff());
  if ((K - K.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale) {
    throw Error(ErrorCode::NotSymmetric, "asymmetry exceeds 1e-10");
  }
  const int keep = P.value_or(n);
  if (keep < 1 || keep > n) throw Error(ErrorCode::RankTooLarge, "requested rank " + std::to_string(keep));

  EigenDecomposition out;
  out.rank_full = n;
  if (n <= options.dense_threshold || keep + options.oversample >= n) {
    // Householder tridiagonalization followed by implicit-shift QL/QR iteration.
    Eigen::SelfAdjointEigenSolver<ColMatrix> solver(ColMatrix(K), Eigen::ComputeEigenvectors);
    if (solver.info() != Eigen::Success) {
      throw Error(ErrorCode::ConvergenceFailure, "tridiagonal QL did not converge");
    }
    out.eigenvalues = solver.eigenvalues().reverse().head(keep);
    out.eigenvectors = solver.eigenvectors().rowwise().reverse().leftCols(keep);
  } else {
    const ColMatrix A = K;
    auto apply = [&](const ColMatrix& W, ColMatrix&) -> ColMatrix { return A * W; };
    auto accept = [](const Vector& values, const Vector& norms) {
      return norms.maxCoeff() <= 1e-6 * std::max(std::abs(values(0)), 1.0);
    };
    auto r = block_krylov(apply, accept, n, keep, keep + options.oversample, options.power_iters,
                          options.max_iters, derive_seed(options.seed, {0x657967ULL}));
    out.eigenvalues = r.values;
    out.eigenvectors = r.vectors;
    out.converged = r.converged;
  }
  apply_sign_convention(out.eigenvectors);
  return out;
}

SvdTriplet svd_trunc(const Matrix& S, int P, int oversample, int power_iters, std::uint64_t seed,
                     int max_iters) {
  const auto rows = S.rows();
  const auto cols = S.cols();
  const auto width = static_cast<Eigen::Index>(P) + oversample;
  if (P < 1 || width > std::min(rows, cols)) {
    throw Error(ErrorCode::RankTooLarge, "P + oversample exceeds the matrix order");
  }
  const ColMatrix A = S;
  // Krylov space of A^T A on the right; A v is kept so U and sigma come from A directly.
  auto apply = [&](const ColMatrix& W, ColMatrix& side) -> ColMatrix {
    side = A * W;
    return A.transpose() * side;
  };
  // ||A^T u - sigma v|| = ||A^T A v - sigma^2 v|| / sigma.
  auto accept = [](const Vector& values, const Vector& norms) {
    const double top = std::sqrt(std::max(values(0), 0.0));
    for (Eigen::Index j = 0; j < values.size(); ++j) {
      const double sigma = std::sqrt(std::max(values(j), 0.0));
      if (!(norms(j) <= 1e-6 * std::max(top, 1.0) * sigma)) return false;
    }
    return true;
  };
  auto r = block_krylov(apply, accept, cols, P, static_cast<int>(width), power_iters, max_iters,
                        derive_seed(seed, {0x737664ULL}));
  SvdTriplet out;
  out.rank_full = static_cast<int>(std::min(rows, cols));
  out.converged = r.converged;
  out.V = r.vectors;
  out.sigma = r.side.colwise().norm().transpose();
  out.U = r.side;
  for (int j = 0; j < P; ++j) {
    if (out.sigma(j) > 0.0) out.U.col(j) /= out.sigma(j);
  }
  apply_sign_convention(out.U, &out.V);
  return out;
}

DecayFit decay_fit(const Vector& eigenvalues, int top_m) {
  if (top_m > eigenvalues.size() || top_m < 1) {
    throw Error(ErrorCode::TooFewPositive, "top_m outside the available spectrum");
  }
  const double floor = 1e-14 * std::max(eigenvalues(0), 0.0);
  std::vector<double> xs, ys;
  for (int i = 0; i < top_m; ++i) {
    const double v = eigenvalues(i);
    if (v > 0.0 && v > floor) {
      xs.push_back(std::log(static_cast<double>(i + 1)));
      ys.push_back(std::log(v));
    }
  }
  if (xs.size() < 3) throw Error(ErrorCode::TooFewPositive, "need at least 3 positive eigenvalues");
  const double m = static_cast<double>(xs.size());
  double mx = 0, my = 0;
  for (std::size_t k = 0; k < xs.size(); ++k) {
    mx += xs[k];
    my += ys[k];
  }
  mx /= m;
  my /= m;
  double sxx = 0, sxy = 0, syy = 0;
  for (std::size_t k = 0; k < xs.size(); ++k) {
    sxx += (xs[k] - mx) * (xs[k] - mx);
    sxy += (xs[k] - mx) * (ys[k] - my);
    syy += (ys[k] - my) * (ys[k] - my);
  }
  const double slope = sxy / sxx;
  DecayFit fit;
  fit.beta = -slope;
  fit.intercept = my - slope * mx;
  // A flat spectrum has no variance to explain; report a perfect fit of the constant.
  fit.r2 = syy > 0 ? (sxy * sxy) / (sxx * syy) : 1.0;
  fit.n_points = static_cast<int>(xs.size());
  return fit;
}

namespace {
double tail_norm(const Vector& values, int full, int P, int have) {
  if (have != full) throw Error(ErrorCode::RequiresFullSpectrum, "decomposition was truncated");
  if (P < 0 || P > full) throw Error(ErrorCode::RankTooLarge, "P outside the spectrum");
  return std::sqrt(values.tail(full - P).squaredNorm());
}
}  // namespace

double eckart_young_error(const EigenDecomposition& decomp, int P) {
  return tail_norm(decomp.eigenvalues, decomp.rank_full, P, decomp.rank());
}

double eckart_young_error(const SvdTriplet& decomp, int P) {
  return tail_norm(decomp.sigma, decomp.rank_full, P, decomp.rank());
}

void write_spectrum_csv(const Vector& values, const std::optional<DecayFit>& fit,
                        const std::filesystem::path& path, const std::string& value_name) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  out.precision(17);
  out << "index," << value_name << '\n';
  for (Eigen::Index i = 0; i < values.size(); ++i) out << (i + 1) << ',' << values(i) << '\n';
  if (fit) {
    nlohmann::json footer = {{"beta", fit->beta}, {"intercept", fit->intercept}, {"r2", fit->r2}};
    out << footer.dump() << '\n';
  }
}

}  // namespace scate

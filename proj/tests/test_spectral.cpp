#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "scate/error.hpp"
#include "scate/spectral.hpp"
#include "support.hpp"

using namespace scate;
using testing::max_abs;

namespace {

void check_orthonormal(const Matrix& V, double tol) {
  CHECK(max_abs(V.transpose() * V - Matrix::Identity(V.cols(), V.cols())) <= tol);
}

void check_sign_convention(const Matrix& V) {
  for (Eigen::Index j = 0; j < V.cols(); ++j) {
    Eigen::Index arg = 0;
    V.col(j).cwiseAbs().maxCoeff(&arg);
    CHECK(V(arg, j) > 0.0);
  }
}

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::Config;
}

Matrix with_spectrum(const Vector& values, Rng& rng) {
  const Matrix A = testing::random_matrix(static_cast<int>(values.size()), static_cast<int>(values.size()), rng);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr{Eigen::MatrixXd(A)};
  const Matrix Q = Eigen::MatrixXd(qr.householderQ());
  return Q * values.asDiagonal() * Q.transpose();
}

}  // namespace

TEST_CASE("eig_sym on a rank-one doubly stochastic matrix") {
  const Matrix K = Matrix::Constant(2, 2, 0.5);
  const auto e = eig_sym(K);
  CHECK(e.eigenvalues(0) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(std::abs(e.eigenvalues(1)) <= 1e-15);
  CHECK(e.eigenvectors(0, 0) == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-14));
  CHECK(e.eigenvectors(1, 0) == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-14));
  CHECK(e.complete());
}

TEST_CASE("eig_sym of the identity") {
  const auto e = eig_sym(Matrix::Identity(7, 7));
  CHECK((e.eigenvalues.array() - 1.0).abs().maxCoeff() <= 1e-14);
  check_orthonormal(e.eigenvectors, 1e-12);
}

TEST_CASE("eig_sym of AA^T matches squared Jacobi singular values") {
  Rng rng(11);
  for (int trial = 0; trial < 5; ++trial) {
    const Matrix A = testing::random_matrix(50, 50, rng);
    const Matrix K = A * A.transpose();
    const auto e = eig_sym(K);
    const auto oracle = testing::jacobi_svd(A);
    const double scale = oracle.sigma(0) * oracle.sigma(0);
    CHECK((e.eigenvalues - oracle.sigma.cwiseAbs2()).cwiseAbs().maxCoeff() <= 1e-8 * scale);
    check_orthonormal(e.eigenvectors, 1e-10);
    check_sign_convention(e.eigenvectors);
    const Matrix rebuilt = e.eigenvectors * e.eigenvalues.asDiagonal() * e.eigenvectors.transpose();
    CHECK((rebuilt - K).norm() <= 1e-8 * K.norm());
    for (int j = 0; j < e.rank(); ++j) {
      const Vector r = K * e.eigenvectors.col(j) - e.eigenvalues(j) * e.eigenvectors.col(j);
      CHECK(r.norm() <= 1e-6 * std::max(e.eigenvalues(0), 1.0));
    }
  }
}

TEST_CASE("eig_sym truncation and randomized path") {
  Rng rng(12);
  Vector values(300);
  for (int i = 0; i < 300; ++i) values(i) = std::pow(i + 1.0, -2.0);
  const Matrix K = with_spectrum(values, rng);
  const auto top = eig_sym(K, 10);
  CHECK(top.rank() == 10);
  CHECK(top.rank_full == 300);
  CHECK_FALSE(top.complete());
  CHECK((top.eigenvalues - values.head(10)).cwiseAbs().maxCoeff() <= 1e-12);

  EigOptions randomized;
  randomized.dense_threshold = 100;
  randomized.seed = 5;
  const auto r = eig_sym(K, 10, randomized);
  CHECK((r.eigenvalues - values.head(10)).cwiseAbs().maxCoeff() <= 1e-8);
  check_orthonormal(r.eigenvectors, 1e-10);
  check_sign_convention(r.eigenvectors);
  for (int j = 0; j < 10; ++j) {
    const Vector res = K * r.eigenvectors.col(j) - r.eigenvalues(j) * r.eigenvectors.col(j);
    CHECK(res.norm() <= 1e-6);
    CHECK(std::abs(r.eigenvectors.col(j).dot(top.eigenvectors.col(j))) == doctest::Approx(1.0).epsilon(1e-6));
  }
  CHECK(r.converged);
  randomized.max_iters = 4;
  CHECK_FALSE(eig_sym(K, 10, randomized).converged);
  randomized.max_iters = 64;
  const auto again = eig_sym(K, 10, randomized);
  CHECK(max_abs(again.eigenvectors - r.eigenvectors) == 0.0);
}

TEST_CASE("eig_sym errors") {
  Matrix K = Matrix::Identity(3, 3);
  K(0, 1) = 1e-6;
  CHECK(code_of([&] { eig_sym(K); }) == ErrorCode::NotSymmetric);
  CHECK(code_of([&] { eig_sym(Matrix::Zero(2, 3)); }) == ErrorCode::NotSymmetric);
  CHECK(code_of([&] { eig_sym(Matrix::Identity(3, 3), 4); }) == ErrorCode::RankTooLarge);
}

TEST_CASE("sign convention flips partners in tandem") {
  Matrix U(3, 2), V(3, 2);
  U << 0.1, -0.2, -0.9, 0.1, 0.3, 0.05;
  V << 1, 2, 3, 4, 5, 6;
  apply_sign_convention(U, &V);
  CHECK(U(1, 0) == 0.9);
  CHECK(V(0, 0) == -1.0);
  CHECK(U(0, 1) == 0.2);
  CHECK(V(0, 1) == -2.0);
}

TEST_CASE("svd_trunc on a diagonal matrix") {
  Matrix S = Matrix::Zero(4, 4);
  S.diagonal() << 3, 2, 1, 0;
  const auto t = svd_trunc(S, 2, 2, 4, 1);
  CHECK((t.sigma - Vector((Vector(2) << 3, 2).finished())).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK(max_abs(t.U - Matrix::Identity(4, 2)) <= 1e-12);
  CHECK(max_abs(t.V - Matrix::Identity(4, 2)) <= 1e-12);
  CHECK_FALSE(t.complete());
  CHECK(code_of([&] { svd_trunc(S, 2, 10, 4, 1); }) == ErrorCode::RankTooLarge);
  CHECK(code_of([&] { svd_trunc(S, 0, 2, 4, 1); }) == ErrorCode::RankTooLarge);
}

TEST_CASE("svd_trunc of the identity") {
  const auto t = svd_trunc(Matrix::Identity(30, 30), 5);
  CHECK((t.sigma.array() - 1.0).abs().maxCoeff() <= 1e-12);
  check_orthonormal(t.U, 1e-10);
}

TEST_CASE("svd_trunc against a one-sided Jacobi reference") {
  Rng rng(13);
  const Matrix S = testing::random_matrix(100, 100, rng);
  const auto t = svd_trunc(S, 20, 10, 4, 3);
  const auto oracle = testing::jacobi_svd(S);
  const Vector decay = [] {
    Vector v(100);
    for (int i = 0; i < 100; ++i) v(i) = std::pow(0.8, i);
    return v;
  }();
  const Matrix D = oracle.U * decay.asDiagonal() * oracle.V.transpose();
  const auto td = svd_trunc(D, 20, 10, 4, 3);
  const auto od = testing::jacobi_svd(D);
  CHECK(((td.sigma - od.sigma.head(20)).array() / od.sigma.head(20).array()).abs().maxCoeff() <= 1e-6);
  check_orthonormal(td.U, 1e-6);
  check_orthonormal(td.V, 1e-6);
  check_sign_convention(td.U);
  for (int j = 0; j < 20; ++j) {
    CHECK((D * td.V.col(j) - td.sigma(j) * td.U.col(j)).norm() <= 1e-5 * td.sigma(0));
  }
  CHECK(t.converged);
  CHECK(((t.sigma - oracle.sigma.head(20)).array() / oracle.sigma.head(20).array()).abs().maxCoeff() <= 1e-6);
  CHECK_FALSE(svd_trunc(S, 20, 10, 4, 3, 4).converged);
  const auto again = svd_trunc(D, 20, 10, 4, 3);
  CHECK(max_abs(again.U - td.U) == 0.0);
}

TEST_CASE("svd_trunc residuals on gap-conditioned random matrices") {
  Rng rng(14);
  for (int trial = 0; trial < 5; ++trial) {
    const int n = 60 + 10 * trial;
    const int P = 5 + trial;
    const auto base = testing::jacobi_svd(testing::random_matrix(n, n, rng));
    Vector s(n);
    for (int i = 0; i < n; ++i) s(i) = i < P ? 10.0 - i : 0.5 * std::pow(0.9, i);
    const Matrix S = base.U * s.asDiagonal() * base.V.transpose();
    const auto t = svd_trunc(S, P, 10, 4, trial);
    for (int j = 0; j < P; ++j) {
      CHECK((S * t.V.col(j) - t.sigma(j) * t.U.col(j)).norm() <= 1e-5 * t.sigma(0));
    }
    CHECK((t.sigma - s.head(P)).cwiseAbs().maxCoeff() <= 1e-6 * s(0));
  }
}

TEST_CASE("decay_fit on exact power laws") {
  Vector v(100);
  for (int i = 0; i < 100; ++i) v(i) = std::pow(i + 1.0, -2.0);
  const auto f = decay_fit(v, 100);
  CHECK(f.beta == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(f.r2 == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(f.n_points == 100);

  Rng rng(15);
  for (int trial = 0; trial < 20; ++trial) {
    const double c = std::exp(rng.uniform(-10, 10));
    Vector w(50);
    for (int i = 0; i < 50; ++i) w(i) = c * std::pow(i + 1.0, -0.7);
    CHECK(decay_fit(w, 50).beta == doctest::Approx(0.7).epsilon(1e-10));
  }
}

TEST_CASE("decay_fit on geometric decay matches a direct OLS") {
  Vector v(30);
  for (int i = 0; i < 30; ++i) v(i) = std::pow(2.0, -(i + 1.0));
  std::vector<double> xs, ys;
  for (int i = 0; i < 20; ++i) {
    xs.push_back(std::log(i + 1.0));
    ys.push_back(std::log(v(i)));
  }
  const auto oracle = testing::ols(xs, ys);
  const auto f = decay_fit(v, 20);
  CHECK(std::abs(f.beta + oracle.slope) <= 1e-9);
  CHECK(std::abs(f.intercept - oracle.intercept) <= 1e-9);
  CHECK(std::abs(f.r2 - oracle.r2) <= 1e-9);
}

TEST_CASE("decay_fit is invariant to positive scaling") {
  Rng rng(16);
  for (int trial = 0; trial < 30; ++trial) {
    const int n = 5 + static_cast<int>(rng.below(100));
    Vector v(n);
    for (int i = 0; i < n; ++i) v(i) = std::exp(rng.uniform(-5, 0));
    std::sort(v.data(), v.data() + n, std::greater<>());
    const auto a = decay_fit(v, n);
    const auto b = decay_fit(v * 1024.0, n);
    CHECK(a.beta == doctest::Approx(b.beta).epsilon(1e-10));
    CHECK(a.r2 == doctest::Approx(b.r2).epsilon(1e-10));
  }
}

TEST_CASE("decay_fit skips non-positive values and needs three") {
  Vector v(6);
  v << 1.0, 0.25, 0.0, 1.0 / 16, -1e-3, 1.0 / 36;
  const auto f = decay_fit(v, 6);
  CHECK(f.n_points == 4);
  Vector exact(4);
  CHECK(decay_fit((Vector(4) << 1.0, 0.25, 1.0 / 9, 1.0 / 16).finished(), 4).beta == doctest::Approx(2.0));
  CHECK(code_of([&] { decay_fit((Vector(4) << 1, 0.5, 0, 0).finished(), 4); }) == ErrorCode::TooFewPositive);
  CHECK(code_of([&] { decay_fit(v, 7); }) == ErrorCode::TooFewPositive);
}

TEST_CASE("Eckart-Young error") {
  const auto full = eig_sym(Matrix::Identity(4, 4));
  CHECK(eckart_young_error(full, 4) == 0.0);
  Matrix D = Matrix::Zero(3, 3);
  D.diagonal() << 3, 2, 1;
  CHECK(eckart_young_error(eig_sym(D), 2) == doctest::Approx(1.0).epsilon(1e-12));

  Rng rng(17);
  for (int trial = 0; trial < 5; ++trial) {
    const Matrix K = testing::random_psd(30, rng);
    const auto e = eig_sym(K);
    for (int P : {0, 1, 7, 29, 30}) {
      const Matrix low = e.eigenvectors.leftCols(P) * e.eigenvalues.head(P).asDiagonal() *
                         e.eigenvectors.leftCols(P).transpose();
      CHECK(std::abs(eckart_young_error(e, P) - (K - low).norm()) <= 1e-10 * std::max(1.0, K.norm()));
    }
  }
  CHECK(code_of([&] { eckart_young_error(eig_sym(D, 2), 1); }) == ErrorCode::RequiresFullSpectrum);
  CHECK(code_of([&] { eckart_young_error(full, 5); }) == ErrorCode::RankTooLarge);
}

TEST_CASE("spectrum csv with footer") {
  const auto path = std::filesystem::temp_directory_path() / "scate_test_spectrum.csv";
  const Vector v = (Vector(3) << 4, 1, 0.25).finished();
  write_spectrum_csv(v, decay_fit(v, 3), path, "singular_value");
  std::ifstream in(path);
  std::string line;
  std::getline(in, line);
  CHECK(line == "index,singular_value");
  std::getline(in, line);
  CHECK(line.rfind("1,4", 0) == 0);
  std::getline(in, line);
  std::getline(in, line);
  std::getline(in, line);
  CHECK(line.find("\"beta\"") != std::string::npos);
  std::filesystem::remove(path);
}

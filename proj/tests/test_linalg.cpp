#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "gcca/linalg.hpp"
#include "gcca/seed.hpp"
#include "oracles.hpp"

using gcca::linalg::Matrix;
using gcca::linalg::Vector;

TEST_CASE("jacobi_eigen on a known 2x2 matrix", "[linalg]") {
  Matrix a(2, 2);
  a << 2, 1, 1, 2;
  const auto eig = gcca::linalg::jacobi_eigen(a);
  REQUIRE(eig.values(0) == Catch::Approx(1.0).margin(1e-14));
  REQUIRE(eig.values(1) == Catch::Approx(3.0).margin(1e-14));
  const double r = 1.0 / std::sqrt(2.0);
  REQUIRE(std::abs(eig.vectors(0, 1)) == Catch::Approx(r).margin(1e-14));
  REQUIRE(std::abs(eig.vectors(1, 1)) == Catch::Approx(r).margin(1e-14));
}

TEST_CASE("jacobi_eigen on a diagonal matrix needs no rotation", "[linalg]") {
  Matrix a = Vector::LinSpaced(4, 4.0, 1.0).asDiagonal();
  const auto eig = gcca::linalg::jacobi_eigen(a);
  REQUIRE(eig.sweeps == 0);
  for (int i = 0; i < 4; ++i) REQUIRE(eig.values(i) == static_cast<double>(i + 1));
}

TEST_CASE("jacobi_eigen reconstructs random symmetric matrices", "[linalg]") {
  std::mt19937_64 rng(gcca::derive_seed(7, 1));
  for (int trial = 0; trial < 200; ++trial) {
    const Eigen::Index n = 2 + trial % 6;
    Matrix g(n, n);
    std::normal_distribution<double> normal;
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < n; ++j) g(i, j) = normal(rng);
    const Matrix a = g + g.transpose();
    const auto eig = gcca::linalg::jacobi_eigen(a);
    const Matrix v = eig.vectors;
    REQUIRE((v.transpose() * v - Matrix::Identity(n, n)).norm() <= 1e-13);
    REQUIRE((v * eig.values.asDiagonal() * v.transpose() - a).norm() <= 1e-12 * a.norm());
    for (Eigen::Index i = 1; i < n; ++i) REQUIRE(eig.values(i - 1) <= eig.values(i));
    // eigenvalues agree with the characteristic polynomial of a
    const auto ref = oracle::pencil_eigenvalues_by_determinant(a, Matrix::Identity(n, n));
    for (Eigen::Index i = 0; i < n; ++i)
      REQUIRE(std::abs(eig.values(i) - ref[static_cast<std::size_t>(i)]) <= 1e-9 * a.norm());
  }
}

TEST_CASE("cholesky_lower reconstructs SPD matrices", "[linalg]") {
  std::mt19937_64 rng(gcca::derive_seed(7, 2));
  for (int trial = 0; trial < 100; ++trial) {
    const Eigen::Index n = 1 + trial % 6;
    const Matrix a = oracle::random_spd(n, rng, 0.1);
    const Matrix l = gcca::linalg::cholesky_lower(a);
    REQUIRE((l * l.transpose() - a).norm() <= 1e-13 * a.norm());
    for (Eigen::Index i = 0; i < n; ++i) {
      REQUIRE(l(i, i) > 0.0);
      for (Eigen::Index j = i + 1; j < n; ++j) REQUIRE(l(i, j) == 0.0);
    }
  }
}

TEST_CASE("cholesky_lower rejects indefinite and singular matrices", "[linalg]") {
  Matrix indefinite(2, 2);
  indefinite << 1, 2, 2, 1;
  REQUIRE_THROWS_AS(gcca::linalg::cholesky_lower(indefinite), gcca::precondition_error);
  Matrix singular(2, 2);
  singular << 1, 1, 1, 1;
  REQUIRE_THROWS_AS(gcca::linalg::cholesky_lower(singular), gcca::precondition_error);
}

TEST_CASE("is_symmetric uses a relative tolerance", "[linalg]") {
  Matrix a(2, 2);
  a << 1e6, 3, 3 + 1e-9, 1;
  REQUIRE(gcca::linalg::is_symmetric(a));
  a(1, 0) = 4;
  REQUIRE_FALSE(gcca::linalg::is_symmetric(a));
}

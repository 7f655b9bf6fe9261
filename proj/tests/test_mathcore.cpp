#include "doctest.h"

#include "rdlda/mathcore.hpp"

#include <cmath>
#include <random>

using namespace rdlda;

namespace {

Matrix random_spd(int dim, std::mt19937_64& rng) {
  std::normal_distribution<double> gauss;
  Matrix m(dim, dim);
  for (int i = 0; i < dim; ++i)
    for (int j = 0; j < dim; ++j) m(i, j) = gauss(rng);
  return m * m.transpose() + 0.1 * Matrix::Identity(dim, dim);
}

Matrix random_psd(int dim, int rank, std::mt19937_64& rng) {
  std::normal_distribution<double> gauss;
  Matrix m(dim, rank);
  for (int i = 0; i < dim; ++i)
    for (int j = 0; j < rank; ++j) m(i, j) = gauss(rng);
  return m * m.transpose();
}

}  // namespace

TEST_CASE("sym_eig identity") {
  auto sol = sym_eig(SymMatrix::identity(3));
  for (int i = 0; i < 3; ++i) CHECK(sol.values(i) == doctest::Approx(1.0));
  // Under the sign convention identity eigenvectors are the standard basis.
  CHECK((sol.vectors - Matrix::Identity(3, 3)).norm() < 1e-12);
}

TEST_CASE("sym_eig 2x2 hand oracle") {
  // [[2,1],[1,2]]: characteristic polynomial (2-v)^2 - 1 -> v = 1, 3.
  Matrix a(2, 2);
  a << 2, 1, 1, 2;
  auto sol = sym_eig(SymMatrix(a));
  CHECK(sol.values(0) == doctest::Approx(1.0));
  CHECK(sol.values(1) == doctest::Approx(3.0));
  const double s = 1.0 / std::sqrt(2.0);
  CHECK(std::abs(std::abs(sol.vectors(0, 0)) - s) < 1e-10);
  // Sign rule: largest-magnitude component positive (tie -> lowest index).
  CHECK(sol.vectors(0, 0) > 0);
  CHECK(sol.vectors(0, 1) > 0);
  CHECK(sol.vectors(0, 1) == doctest::Approx(sol.vectors(1, 1)));
}

TEST_CASE("sym_eig diagonal is sorted permuted axes") {
  Matrix a = Matrix::Zero(3, 3);
  a.diagonal() << 5, -2, 0;
  auto sol = sym_eig(SymMatrix(a));
  CHECK(sol.values(0) == doctest::Approx(-2.0));
  CHECK(sol.values(1) == doctest::Approx(0.0));
  CHECK(sol.values(2) == doctest::Approx(5.0));
  CHECK(std::abs(sol.vectors(1, 0)) == doctest::Approx(1.0));
  CHECK(std::abs(sol.vectors(2, 1)) == doctest::Approx(1.0));
  CHECK(std::abs(sol.vectors(0, 2)) == doctest::Approx(1.0));
}

TEST_CASE("sym_eig residual, reconstruction and trace on random matrices") {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    const int dim = 2 + static_cast<int>(rng() % 7);
    SymMatrix a(random_spd(dim, rng));
    auto sol = sym_eig(a);
    const double scale = a.mat().norm();
    for (int i = 0; i < dim; ++i) {
      CHECK((a.mat() * sol.vectors.col(i) - sol.values(i) * sol.vectors.col(i))
                .norm() < 1e-8 * scale);
    }
    Matrix rec =
        sol.vectors * sol.values.asDiagonal() * sol.vectors.transpose();
    CHECK((rec - a.mat()).norm() < 1e-8 * scale);
    CHECK(sol.values.sum() ==
          doctest::Approx(a.mat().trace()).epsilon(1e-9));
  }
}

TEST_CASE("sym_eig rejects non-finite input") {
  Matrix a(2, 2);
  a << 1, 0, 0, std::nan("");
  CHECK_THROWS_AS(SymMatrix{a}, std::invalid_argument);
}

TEST_CASE("cholesky identity") {
  Matrix l = cholesky(SymMatrix::identity(4));
  CHECK((l - Matrix::Identity(4, 4)).norm() == 0.0);
}

TEST_CASE("cholesky hand oracle") {
  // L = [[2,0],[1,2]] gives L L^T = [[4,2],[2,5]].
  Matrix a(2, 2);
  a << 4, 2, 2, 5;
  Matrix l = cholesky(SymMatrix(a));
  CHECK(l(0, 0) == doctest::Approx(2.0));
  CHECK(l(1, 0) == doctest::Approx(1.0));
  CHECK(l(1, 1) == doctest::Approx(2.0));
  CHECK(l(0, 1) == 0.0);
  CHECK((l * l.transpose() - a).norm() < 1e-10 * a.norm());
}

TEST_CASE("cholesky rejects indefinite input naming the pivot") {
  // Second pivot is 1 - 4 = -3.
  Matrix a(2, 2);
  a << 1, 2, 2, 1;
  CHECK_THROWS_WITH_AS(cholesky(SymMatrix(a)),
                       doctest::Contains("not positive definite"),
                       std::runtime_error);
  try {
    cholesky(SymMatrix(a));
  } catch (const std::runtime_error& e) {
    CHECK(std::string(e.what()).find("pivot 1") != std::string::npos);
  }
}

TEST_CASE("cholesky round trip on random SPD") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const int dim = 1 + static_cast<int>(rng() % 8);
    SymMatrix a(random_spd(dim, rng));
    Matrix l = cholesky(a);
    CHECK((l * l.transpose() - a.mat()).norm() < 1e-10 * a.mat().norm());
    CHECK((l.diagonal().array() > 0).all());
  }
}

TEST_CASE("generalized_eig zero sb") {
  std::mt19937_64 rng(3);
  SymMatrix sw(random_spd(4, rng));
  auto sol = generalized_eig(SymMatrix(Matrix::Zero(4, 4)), sw);
  CHECK(sol.values.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("generalized_eig identity sw reduces to sym_eig") {
  Matrix sb = Matrix::Zero(2, 2);
  sb(0, 0) = 2;
  auto sol = generalized_eig(SymMatrix(sb), SymMatrix::identity(2));
  CHECK(sol.values(0) == doctest::Approx(0.0));
  CHECK(sol.values(1) == doctest::Approx(2.0));
}

TEST_CASE("generalized_eig diagonal hand oracle") {
  // Whitening with L = diag(sqrt(2), 1): B = diag(2/2, 1/1) = I -> values 1,1.
  Matrix sb(2, 2), sw(2, 2);
  sb << 2, 0, 0, 1;
  sw << 2, 0, 0, 1;
  auto sol = generalized_eig(SymMatrix(sb), SymMatrix(sw));
  CHECK(sol.values(0) == doctest::Approx(1.0));
  CHECK(sol.values(1) == doctest::Approx(1.0));
}

TEST_CASE("generalized_eig residual, sw-normalization, whitening agreement") {
  std::mt19937_64 rng(19);
  for (int trial = 0; trial < 30; ++trial) {
    const int dim = 2 + static_cast<int>(rng() % 7);
    SymMatrix sw(random_spd(dim, rng));
    SymMatrix sb(random_psd(dim, 1 + static_cast<int>(rng() % dim), rng));
    auto sol = generalized_eig(sb, sw);
    const double scale = sb.mat().norm();
    for (int i = 0; i < dim; ++i) {
      const Vector e = sol.vectors.col(i);
      CHECK((sb.mat() * e - sol.values(i) * (sw.mat() * e)).norm() <
            1e-7 * scale);
      CHECK(e.dot(sw.mat() * e) == doctest::Approx(1.0).epsilon(1e-8));
      CHECK(sol.values(i) >= 0.0);
    }
    // Independent route: eigenvalues of L^{-1} sb L^{-T} via sym_eig.
    Matrix l = cholesky(sw);
    Matrix b = l.triangularView<Eigen::Lower>().solve(sb.mat());
    b = l.triangularView<Eigen::Lower>().solve(b.transpose()).eval();
    auto direct = sym_eig(SymMatrix(b));
    for (int i = 0; i < dim; ++i) {
      CHECK(std::abs(sol.values(i) - std::max(0.0, direct.values(i))) <
            1e-8 * std::max(1.0, scale));
    }
  }
}

TEST_CASE("generalized_eig dimension mismatch") {
  CHECK_THROWS_AS(
      generalized_eig(SymMatrix::identity(2), SymMatrix::identity(3)),
      std::invalid_argument);
}

TEST_CASE("determinism: repeated calls are bit-identical") {
  std::mt19937_64 rng(23);
  SymMatrix sw(random_spd(6, rng));
  SymMatrix sb(random_psd(6, 3, rng));
  auto a = generalized_eig(sb, sw);
  auto b = generalized_eig(sb, sw);
  CHECK(a.values == b.values);
  CHECK(a.vectors == b.vectors);
}

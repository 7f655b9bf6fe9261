#include "doctest.h"

#include "rdlda/classic_lda.hpp"

#include <cmath>
#include <random>

using namespace rdlda;

namespace {

LabeledBatch two_gaussians(int per_class, int d, const Vector& mu0,
                           const Vector& mu1, double sigma,
                           std::mt19937_64& rng) {
  std::normal_distribution<double> gauss(0.0, sigma);
  LabeledBatch batch;
  batch.class_count = 2;
  batch.features = Matrix(2 * per_class, d);
  for (int i = 0; i < 2 * per_class; ++i) {
    const int y = i % 2;
    const Vector& mu = y == 0 ? mu0 : mu1;
    for (int j = 0; j < d; ++j) batch.features(i, j) = mu(j) + gauss(rng);
    batch.labels.push_back(y);
  }
  return batch;
}

}  // namespace

TEST_CASE("fit on 1-D pair spans the data axis") {
  std::mt19937_64 rng(1);
  LabeledBatch batch;
  batch.class_count = 2;
  batch.features = Matrix(4, 1);
  batch.features << -1.0, 1.0, -1.001, 0.999;
  batch.labels = {0, 1, 0, 1};
  auto model = lda_fit(batch, 1.0, 1e-3);
  CHECK(model.projection.cols() == 1);
  CHECK(std::abs(model.projection(0, 0)) > 0.0);
}

TEST_CASE("top direction matches the analytic two-class solution") {
  std::mt19937_64 rng(3);
  Vector mu0(2), mu1(2);
  mu0 << 0, 0;
  mu1 << 3, 1;
  LabeledBatch batch = two_gaussians(400, 2, mu0, mu1, 1.0, rng);
  auto model = lda_fit(batch, 1.0, 1e-3);

  // Analytic oracle: direction of S_W^{-1} (mu1 - mu0) computed from the
  // empirical scatter, independent of the eigensolver path.
  auto means = class_means(batch);
  Matrix sw = within_scatter(batch, means).mat();
  sw.diagonal().array() += 1e-3;
  Vector diff =
      means.class_means.row(1).transpose() - means.class_means.row(0).transpose();
  Vector oracle = sw.ldlt().solve(diff).normalized();
  Vector top = model.projection.col(0).normalized();
  const double angle = std::acos(std::min(1.0, std::abs(top.dot(oracle))));
  CHECK(angle < 1e-3);
}

TEST_CASE("collinear class means leave the second eigenvalue at zero") {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> gauss(0.0, 0.01);
  LabeledBatch batch;
  batch.class_count = 3;
  batch.features = Matrix(30, 3);
  for (int i = 0; i < 30; ++i) {
    const int y = i % 3;
    batch.features.row(i) = Eigen::RowVector3d(2.0 * y, 0, 0);
    for (int j = 0; j < 3; ++j) batch.features(i, j) += gauss(rng);
    batch.labels.push_back(y);
  }
  auto model = lda_fit(batch, 1.0, 1e-3);
  REQUIRE(model.eigenvalues.size() == 2);
  CHECK(model.eigenvalues(1) < 1e-4 * model.eigenvalues(0));
}

TEST_CASE("predict returns the class of its own mean") {
  std::mt19937_64 rng(7);
  Vector mu0(3), mu1(3);
  mu0 << -2, 0, 1;
  mu1 << 2, 1, -1;
  LabeledBatch batch = two_gaussians(100, 3, mu0, mu1, 0.5, rng);
  auto model = lda_fit(batch, 1.0, 1e-3);
  auto means = class_means(batch);
  auto labels = lda_predict(model, means.class_means);
  CHECK(labels[0] == 0);
  CHECK(labels[1] == 1);
}

TEST_CASE("tie breaks toward the lowest class index") {
  LabeledBatch batch;
  batch.class_count = 2;
  batch.features = Matrix(8, 2);
  batch.features << -1, 0.1, 1, 0.1, -1, -0.1, 1, -0.1, -1.2, 0, 1.2, 0, -0.8,
      0, 0.8, 0;
  batch.labels = {0, 1, 0, 1, 0, 1, 0, 1};
  auto model = lda_fit(batch, 1.0, 1e-3);
  Matrix query(1, 2);
  query << 0, 0;  // exactly between symmetric class means
  CHECK(lda_predict(model, query)[0] == 0);
}

TEST_CASE("well-separated classes are classified perfectly") {
  std::mt19937_64 rng(20);
  Vector mu0 = Vector::Zero(4);
  Vector mu1 = Vector::Zero(4);
  mu1(0) = 6.0;  // 6 sigma apart
  LabeledBatch train = two_gaussians(200, 4, mu0, mu1, 1.0, rng);
  LabeledBatch test = two_gaussians(200, 4, mu0, mu1, 1.0, rng);
  auto model = lda_fit(train, 1.0, 1e-3);
  auto labels = lda_predict(model, test.features);
  int correct = 0;
  for (size_t i = 0; i < labels.size(); ++i)
    if (labels[i] == test.labels[i]) ++correct;
  CHECK(correct == 400);

  // Brute-force nearest-projected-mean oracle (equal priors).
  Matrix projected = test.features * model.projection;
  for (Eigen::Index i = 0; i < projected.rows(); ++i) {
    int best = 0;
    double bd = 1e300;
    for (int j = 0; j < 2; ++j) {
      double d2 =
          (projected.row(i) - model.projected_class_means.row(j)).squaredNorm();
      if (d2 < bd) {
        bd = d2;
        best = j;
      }
    }
    CHECK(best == labels[i]);
  }
}

TEST_CASE("translation invariance of predictions") {
  std::mt19937_64 rng(11);
  Vector mu0 = Vector::Zero(3);
  Vector mu1 = Vector::Constant(3, 2.0);
  LabeledBatch train = two_gaussians(100, 3, mu0, mu1, 1.0, rng);
  LabeledBatch test = two_gaussians(50, 3, mu0, mu1, 1.0, rng);
  auto base = lda_predict(lda_fit(train, 0.5, 1e-3), test.features);

  Eigen::RowVector3d shift(13.0, -4.0, 0.25);
  LabeledBatch train2 = train;
  train2.features.rowwise() += shift;
  Matrix test2 = test.features.rowwise() + shift;
  auto shifted = lda_predict(lda_fit(train2, 0.5, 1e-3), test2);
  CHECK(base == shifted);
}

TEST_CASE("orthogonal change of basis preserves eigenvalues") {
  std::mt19937_64 rng(13);
  Vector mu0 = Vector::Zero(3);
  Vector mu1 = Vector::Constant(3, 1.5);
  LabeledBatch batch = two_gaussians(100, 3, mu0, mu1, 1.0, rng);
  auto base = lda_fit(batch, 1.0, 1e-3);

  // Householder reflection as a full-rank orthogonal map.
  Vector v = Vector::Random(3).normalized();
  Matrix q = Matrix::Identity(3, 3) - 2.0 * v * v.transpose();
  LabeledBatch rotated = batch;
  rotated.features = batch.features * q;
  auto rot = lda_fit(rotated, 1.0, 1e-3);
  CHECK((base.eigenvalues - rot.eigenvalues).cwiseAbs().maxCoeff() < 1e-8);
}

#include "doctest.h"

#include "rdlda/subclass.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <random>
#include <set>

using namespace rdlda;

namespace {

// Reconstruction loss at the current parameters, no side effects on grads.
double recon_loss(AutoencoderModel& ae, const Matrix& x) {
  const Matrix recon = ae.net.forward(x, Mode::kEval);
  return (recon - x).squaredNorm() / double(x.rows());
}

// Exhaustive minimum inertia over all partitions into k non-empty clusters.
double brute_force_inertia(const Matrix& pts, int k) {
  const int n = int(pts.rows());
  double best = std::numeric_limits<double>::infinity();
  std::vector<int> assign(n, 0);
  const long total = [&] {
    long t = 1;
    for (int i = 0; i < n; ++i) t *= k;
    return t;
  }();
  for (long code = 0; code < total; ++code) {
    long c = code;
    std::set<int> used;
    for (int i = 0; i < n; ++i) {
      assign[i] = int(c % k);
      used.insert(assign[i]);
      c /= k;
    }
    if (int(used.size()) != k) continue;
    Matrix centroids = Matrix::Zero(k, pts.cols());
    std::vector<int> counts(k, 0);
    for (int i = 0; i < n; ++i) {
      centroids.row(assign[i]) += pts.row(i);
      ++counts[assign[i]];
    }
    for (int j = 0; j < k; ++j) centroids.row(j) /= double(counts[j]);
    double inertia = 0.0;
    for (int i = 0; i < n; ++i)
      inertia += (pts.row(i) - centroids.row(assign[i])).squaredNorm();
    best = std::min(best, inertia);
  }
  return best;
}

}  // namespace

TEST_CASE("autoencoder encode basics") {
  auto ae = make_autoencoder(4, 2, 5);
  CHECK(ae.net.layer_count() == 4);

  // Zero weights and biases map everything to tanh(0) = 0.
  for (Param* p : ae.net.params()) p->value.setZero();
  Matrix x = Matrix::Constant(3, 4, 0.5);
  CHECK(encode(ae, x).cwiseAbs().maxCoeff() == 0.0);

  // Random weights: embeddings stay strictly inside (-1, 1) and are
  // deterministic for identical inputs.
  auto ae2 = make_autoencoder(4, 2, 5);
  Matrix e1 = encode(ae2, x);
  CHECK(e1.cwiseAbs().maxCoeff() < 1.0);
  Matrix pair(2, 4);
  pair.row(0) = x.row(0);
  pair.row(1) = x.row(0);
  Matrix e2 = encode(ae2, pair);
  CHECK(e2.row(0) == e2.row(1));
}

TEST_CASE("ae_train_step rejects out-of-range input") {
  auto ae = make_autoencoder(3, 2, 1);
  Matrix bad = Matrix::Constant(2, 3, 1.5);
  CHECK_THROWS_AS(ae_train_step(ae, bad, 0.1), std::invalid_argument);
  bad.setConstant(-0.1);
  CHECK_THROWS_AS(ae_train_step(ae, bad, 0.1), std::invalid_argument);
}

TEST_CASE("autoencoder gradient check on a 4-2-4 net") {
  auto ae = make_autoencoder(4, 2, 17);
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0.05, 0.95);
  Matrix x(6, 4);
  for (Eigen::Index i = 0; i < 6; ++i)
    for (Eigen::Index j = 0; j < 4; ++j) x(i, j) = u(rng);

  // Analytic gradients of the mean squared reconstruction error.
  const Matrix recon = ae.net.forward(x, Mode::kTrain);
  ae.net.zero_grad();
  ae.net.backward(Matrix(2.0 / double(x.rows()) * (recon - x)));

  const double h = 1e-5;
  double max_rel = 0.0;
  for (Param* p : ae.net.params()) {
    for (Eigen::Index i = 0; i < p->value.rows(); ++i)
      for (Eigen::Index j = 0; j < p->value.cols(); ++j) {
        const double keep = p->value(i, j);
        p->value(i, j) = keep + h;
        const double up = recon_loss(ae, x);
        p->value(i, j) = keep - h;
        const double down = recon_loss(ae, x);
        p->value(i, j) = keep;
        const double fd = (up - down) / (2 * h);
        const double rel = std::abs(fd - p->grad(i, j)) /
                           std::max(1.0, std::abs(fd));
        max_rel = std::max(max_rel, rel);
      }
  }
  CHECK(max_rel < 1e-5);
}

TEST_CASE("autoencoder training drives the loss down") {
  // 2-D structure embedded in 4-D: a 2-bottleneck can reconstruct it.
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Matrix data(64, 4);
  for (Eigen::Index i = 0; i < data.rows(); ++i) {
    const double a = u(rng), b = u(rng);
    data(i, 0) = a;
    data(i, 1) = b;
    data(i, 2) = 0.5 * (a + b);
    data(i, 3) = 1.0 - a;
  }
  auto ae = make_autoencoder(4, 2, 33);
  auto curve = train_autoencoder(ae, data, 150, 16, 0.05, 77);
  CHECK(curve.back() < 0.01);

  // Smoothed over 10-epoch windows the loss never goes back up much.
  for (std::size_t w = 10; w + 10 <= curve.size(); w += 10) {
    double prev = 0, cur = 0;
    for (std::size_t i = w - 10; i < w; ++i) prev += curve[i];
    for (std::size_t i = w; i < w + 10; ++i) cur += curve[i];
    CHECK(cur <= prev * 1.05);
  }
}

TEST_CASE("kmeans hand example") {
  Matrix pts(4, 2);
  pts << 0, 0, 0, 1, 10, 10, 10, 11;
  auto res = kmeans(pts, 2, 1);
  CHECK(res.assignments[0] == res.assignments[1]);
  CHECK(res.assignments[2] == res.assignments[3]);
  CHECK(res.assignments[0] != res.assignments[2]);
  const int lo = res.assignments[0];
  CHECK(res.centroids(lo, 0) == 0.0);
  CHECK(res.centroids(lo, 1) == 0.5);
  CHECK(res.centroids(1 - lo, 0) == 10.0);
  CHECK(res.centroids(1 - lo, 1) == 10.5);
  CHECK(res.inertia == doctest::Approx(1.0));
}

TEST_CASE("kmeans degenerate ks") {
  Matrix pts(3, 2);
  pts << 1, 2, 3, 4, 5, 6;
  auto singles = kmeans(pts, 3, 4);
  CHECK(singles.inertia == doctest::Approx(0.0));
  std::set<int> ids(singles.assignments.begin(), singles.assignments.end());
  CHECK(ids.size() == 3);

  auto one = kmeans(pts, 1, 4);
  CHECK(one.centroids.row(0)(0) == doctest::Approx(3.0));
  double dev = 0;
  for (int i = 0; i < 3; ++i)
    dev += (pts.row(i) - pts.colwise().mean()).squaredNorm();
  CHECK(one.inertia == doctest::Approx(dev));

  CHECK_THROWS_AS(kmeans(pts, 4, 0), std::invalid_argument);
}

TEST_CASE("kmeans matches exhaustive partition search on small instances") {
  std::mt19937_64 rng(123);
  std::normal_distribution<double> gauss;
  for (int t = 0; t < 8; ++t) {
    const int n = 5 + int(rng() % 4);  // 5..8
    const int k = 2 + int(rng() % 2);  // 2..3
    Matrix pts(n, 2);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < 2; ++j) pts(i, j) = gauss(rng);
    auto res = kmeans(pts, k, rng());
    const double best = brute_force_inertia(pts, k);
    CHECK(res.inertia == doctest::Approx(best).epsilon(1e-9));
  }
}

TEST_CASE("kmeans determinism") {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> gauss;
  Matrix pts(30, 3);
  for (Eigen::Index i = 0; i < 30; ++i)
    for (Eigen::Index j = 0; j < 3; ++j) pts(i, j) = gauss(rng);
  auto a = kmeans(pts, 3, 99);
  auto b = kmeans(pts, 3, 99);
  CHECK(a.assignments == b.assignments);
  CHECK(a.centroids == b.centroids);
  CHECK(a.inertia == b.inertia);
}

TEST_CASE("label map round trip") {
  LabelMap map{3, 2};
  CHECK(subclass_to_class({0, 1, 2, 3, 4, 5}, map) ==
        std::vector<int>{0, 0, 1, 1, 2, 2});
  for (int cls = 0; cls < 3; ++cls)
    for (int s = 0; s < 2; ++s) CHECK(map.to_class(map.flat(cls, s)) == cls);
  CHECK_THROWS_AS(map.to_class(6), std::out_of_range);
  CHECK_THROWS_AS(map.to_class(-1), std::out_of_range);

  LabelMap identity{4, 1};
  CHECK(subclass_to_class({0, 1, 2, 3}, identity) ==
        std::vector<int>{0, 1, 2, 3});
}

TEST_CASE("split_subclasses recovers planted blobs") {
  // Two classes, each a pair of blobs around distant centers.
  std::mt19937_64 rng(41);
  std::normal_distribution<double> gauss(0.0, 0.1);
  const int per_blob = 10;
  Matrix emb(4 * per_blob, 2);
  std::vector<int> labels;
  double centers[4][2] = {{0, 0}, {8, 8}, {0, 8}, {8, 0}};
  for (int blob = 0; blob < 4; ++blob)
    for (int i = 0; i < per_blob; ++i) {
      const int r = blob * per_blob + i;
      emb(r, 0) = centers[blob][0] + gauss(rng);
      emb(r, 1) = centers[blob][1] + gauss(rng);
      labels.push_back(blob / 2);
    }

  auto flat = split_subclasses(emb, labels, 2, 7);
  // Each planted blob maps to exactly one flat subclass of its own class.
  for (int blob = 0; blob < 4; ++blob) {
    std::set<int> ids;
    for (int i = 0; i < per_blob; ++i) ids.insert(flat[blob * per_blob + i]);
    CHECK(ids.size() == 1);
    CHECK(*ids.begin() / 2 == blob / 2);  // never mixes classes
  }
  CHECK(std::set<int>(flat.begin(), flat.end()).size() == 4);

  // k = 1 is the identity on class labels.
  auto identity = split_subclasses(emb, labels, 1, 7);
  CHECK(identity == labels);

  // Permuting the samples yields the same labeling.
  std::vector<int> perm(labels.size());
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  Matrix emb2(emb.rows(), 2);
  std::vector<int> labels2(labels.size());
  for (std::size_t i = 0; i < perm.size(); ++i) {
    emb2.row(Eigen::Index(i)) = emb.row(perm[i]);
    labels2[i] = labels[perm[i]];
  }
  auto flat2 = split_subclasses(emb2, labels2, 2, 7);
  for (std::size_t i = 0; i < perm.size(); ++i)
    CHECK(flat2[i] == flat[std::size_t(perm[i])]);

  // Undersized classes are named in the error.
  std::vector<int> tiny_labels = {0, 0, 0, 1};
  Matrix tiny = Matrix::Random(4, 2);
  CHECK_THROWS_WITH_AS(split_subclasses(tiny, tiny_labels, 2, 1),
                       doctest::Contains("class 1"), std::invalid_argument);
}

TEST_CASE("subclass csv export") {
  LabelMap map{2, 2};
  std::vector<int> classes = {0, 0, 1, 1};
  std::vector<int> flat = {1, 0, 2, 3};
  export_subclass_csv(classes, flat, map, "t_subclass.csv");
  std::ifstream in("t_subclass.csv");
  std::string line;
  std::getline(in, line);
  CHECK(line == "sample_index,class,subclass_local,subclass_flat");
  std::getline(in, line);
  CHECK(line == "0,0,1,1");
  std::getline(in, line);
  CHECK(line == "1,0,0,0");
  std::getline(in, line);
  CHECK(line == "2,1,0,2");
  std::getline(in, line);
  CHECK(line == "3,1,1,3");
  std::remove("t_subclass.csv");
}

TEST_CASE("pipeline with k = 1 matches plain training bit for bit") {
  SyntheticSpec spec;
  spec.class_count = 2;
  spec.per_class = 40;
  spec.dim = 4;
  spec.separation = 5.0;
  spec.seed = 13;
  auto train = make_synthetic(spec);
  auto val = make_synthetic(spec, "val");
  auto test = make_synthetic(spec, "test");

  LossConfig loss;
  loss.alpha = 0.3;
  TrainConfig tc;
  tc.epochs = 5;
  tc.batch_size = 20;
  SeedSplitter seeds{99};

  SubclassConfig sc;
  sc.k = 1;
  sc.ae_epochs = 3;
  sc.embedding_dim = 2;
  auto piped = run_subclass_pipeline(train, val, test, sc, loss, tc, "mlp",
                                     PredictorKind::kEuclidean, seeds);

  Model model = build_preset("mlp", TensorShape{int(train.dim()), 1, 1},
                             train.class_count, seeds.stream("init"));
  auto hist = train_model(model, train, val, loss, tc, seeds,
                          PredictorKind::kEuclidean);
  auto ev = make_evaluator(model, train, loss);
  auto base = evaluate(ev, model, test.features, PredictorKind::kEuclidean);

  CHECK(piped.predicted_classes == base);
  CHECK(piped.history.loss_curve == hist.loss_curve);
  CHECK(piped.history.val_accuracy == hist.val_accuracy);

  // Same seeds, same predictions, end to end.
  auto again = run_subclass_pipeline(train, val, test, sc, loss, tc, "mlp",
                                     PredictorKind::kEuclidean, seeds);
  CHECK(again.predicted_classes == piped.predicted_classes);
}

#include "rdlda/subclass.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace rdlda {

AutoencoderModel make_autoencoder(int input_dim, int embedding_dim,
                                  std::uint64_t seed) {
  if (input_dim <= 0 || embedding_dim <= 0)
    throw std::invalid_argument("autoencoder dims must be positive");
  std::mt19937_64 rng(seed);
  AutoencoderModel ae;
  ae.input_dim = input_dim;
  ae.embedding_dim = embedding_dim;
  ae.net = Model(TensorShape{input_dim, 1, 1});
  ae.net.add(make_dense(input_dim, embedding_dim, rng));
  ae.net.add(make_tanh());
  ae.net.add(make_dense(embedding_dim, input_dim, rng));
  ae.net.add(make_sigmoid());
  return ae;
}

double ae_train_step(AutoencoderModel& model, const Matrix& batch, double lr) {
  if (batch.cols() != model.input_dim)
    throw std::invalid_argument("ae_train_step: input width mismatch");
  if ((batch.array() < 0.0).any() || (batch.array() > 1.0).any())
    throw std::invalid_argument(
        "ae_train_step: inputs must lie in [0, 1] (sigmoid decoder range)");

  const Matrix recon = model.net.forward(batch, Mode::kTrain);
  const Matrix diff = recon - batch;
  const double n = double(batch.rows());
  const double loss = diff.squaredNorm() / n;

  model.net.zero_grad();
  model.net.backward(Matrix(2.0 / n * diff));
  TrainConfig opt;
  opt.base_lr = lr;
  opt.momentum = 0.9;
  opt.weight_decay = 0.0;  // pure reconstruction objective
  sgd_nesterov_step(model.net, opt, 0);
  return loss;
}

Matrix encode(AutoencoderModel& model, const Matrix& batch) {
  if (batch.cols() != model.input_dim)
    throw std::invalid_argument("encode: input width mismatch");
  Matrix h = model.net.layer(0).forward(batch, Mode::kEval, nullptr);
  return model.net.layer(1).forward(h, Mode::kEval, nullptr);
}

std::vector<double> train_autoencoder(AutoencoderModel& model,
                                      const Matrix& data01, int epochs,
                                      int batch_size, double lr,
                                      std::uint64_t batch_seed) {
  Dataset wrap;
  wrap.features = data01;
  wrap.labels.assign(std::size_t(data01.rows()), 0);
  wrap.class_count = 1;
  BatchPlan plan;
  plan.batch_size = std::min<int>(batch_size, int(data01.rows()));
  plan.stratified = false;
  plan.seed = batch_seed;

  std::vector<double> curve;
  for (int epoch = 0; epoch < epochs; ++epoch) {
    double sum = 0.0;
    auto batches = make_batches(wrap, plan, epoch);
    for (const auto& b : batches) sum += ae_train_step(model, b.features, lr);
    curve.push_back(sum / double(batches.size()));
  }
  return curve;
}

int LabelMap::to_class(int flat_id) const {
  if (flat_id < 0 || flat_id >= flat_count())
    throw std::out_of_range("subclass id " + std::to_string(flat_id) +
                            " outside [0, " + std::to_string(flat_count()) +
                            ")");
  return flat_id / subclasses_per_class;
}

std::vector<int> subclass_to_class(const std::vector<int>& flat_ids,
                                   const LabelMap& map) {
  std::vector<int> out(flat_ids.size());
  for (std::size_t i = 0; i < flat_ids.size(); ++i)
    out[i] = map.to_class(flat_ids[i]);
  return out;
}

namespace {

int nearest_centroid(const Matrix& centroids, const Eigen::RowVectorXd& p) {
  int best = 0;
  double best_d = (p - centroids.row(0)).squaredNorm();
  for (Eigen::Index j = 1; j < centroids.rows(); ++j) {
    const double d = (p - centroids.row(j)).squaredNorm();
    if (d < best_d) {  // strict: ties keep the lowest index
      best_d = d;
      best = int(j);
    }
  }
  return best;
}

double clustering_inertia(const Matrix& points, const Matrix& centroids,
                          const std::vector<int>& assign) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < points.rows(); ++i)
    s += (points.row(i) - centroids.row(assign[i])).squaredNorm();
  return s;
}

ClusterResult kmeans_once(const Matrix& points, int k, std::mt19937_64& rng) {
  const auto n = points.rows();
  // k-means++ seeding: first centroid uniform, then D^2 sampling.
  Matrix centroids(k, points.cols());
  std::uniform_int_distribution<Eigen::Index> uni(0, n - 1);
  centroids.row(0) = points.row(uni(rng));
  Vector d2(n);
  for (int j = 1; j < k; ++j) {
    for (Eigen::Index i = 0; i < n; ++i) {
      double best = std::numeric_limits<double>::infinity();
      for (int m = 0; m < j; ++m)
        best = std::min(best, (points.row(i) - centroids.row(m)).squaredNorm());
      d2(i) = best;
    }
    const double total = d2.sum();
    if (total <= 0.0) {
      centroids.row(j) = points.row(uni(rng));  // all points coincide
      continue;
    }
    std::uniform_real_distribution<double> u(0.0, total);
    double target = u(rng), acc = 0.0;
    Eigen::Index pick = n - 1;
    for (Eigen::Index i = 0; i < n; ++i) {
      acc += d2(i);
      if (acc >= target) {
        pick = i;
        break;
      }
    }
    centroids.row(j) = points.row(pick);
  }

  std::vector<int> assign(std::size_t(n), -1);
  double prev_inertia = std::numeric_limits<double>::infinity();
  for (int iter = 0; iter < 300; ++iter) {
    std::vector<int> next(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i)
      next[std::size_t(i)] = nearest_centroid(centroids, points.row(i));

    // Repair empty clusters by stealing the worst-fit point.
    std::vector<int> counts(static_cast<std::size_t>(k), 0);
    for (int a : next) ++counts[std::size_t(a)];
    for (int e = 0; e < k; ++e) {
      if (counts[std::size_t(e)] > 0) continue;
      Eigen::Index worst = -1;
      double worst_d = -1.0;
      for (Eigen::Index i = 0; i < n; ++i) {
        const int a = next[std::size_t(i)];
        if (counts[std::size_t(a)] <= 1) continue;
        const double d = (points.row(i) - centroids.row(a)).squaredNorm();
        if (d > worst_d) {
          worst_d = d;
          worst = i;
        }
      }
      if (worst < 0) throw std::logic_error("kmeans: cannot repair cluster");
      --counts[std::size_t(next[std::size_t(worst)])];
      next[std::size_t(worst)] = e;
      ++counts[std::size_t(e)];
      centroids.row(e) = points.row(worst);
    }

    const bool converged = next == assign;
    assign = std::move(next);
    for (int j = 0; j < k; ++j) {
      Eigen::RowVectorXd mean = Eigen::RowVectorXd::Zero(points.cols());
      for (Eigen::Index i = 0; i < n; ++i)
        if (assign[std::size_t(i)] == j) mean += points.row(i);
      centroids.row(j) = mean / double(counts[std::size_t(j)]);
    }
    const double inertia = clustering_inertia(points, centroids, assign);
    if (inertia > prev_inertia + 1e-9 * (1.0 + prev_inertia))
      throw std::logic_error("kmeans: inertia increased across an iteration");
    prev_inertia = inertia;
    if (converged) break;
  }

  ClusterResult res;
  res.assignments = std::move(assign);
  res.centroids = std::move(centroids);
  res.inertia = prev_inertia;
  return res;
}

}  // namespace

ClusterResult kmeans(const Matrix& points, int k, std::uint64_t seed) {
  if (k <= 0) throw std::invalid_argument("kmeans: k must be positive");
  if (points.rows() < k)
    throw std::invalid_argument("kmeans: " + std::to_string(points.rows()) +
                                " points cannot fill " + std::to_string(k) +
                                " clusters");
  SeedSplitter split{seed};
  ClusterResult best;
  best.inertia = std::numeric_limits<double>::infinity();
  for (int restart = 0; restart < 5; ++restart) {
    std::mt19937_64 rng(split.stream("restart", std::uint64_t(restart)));
    ClusterResult r = kmeans_once(points, k, rng);
    if (r.inertia < best.inertia) best = std::move(r);
  }
  return best;
}

namespace {

bool row_less(const Matrix& m, Eigen::Index a, Eigen::Index b) {
  for (Eigen::Index j = 0; j < m.cols(); ++j) {
    if (m(a, j) < m(b, j)) return true;
    if (m(a, j) > m(b, j)) return false;
  }
  return false;
}

}  // namespace

std::vector<int> split_subclasses(const Matrix& embeddings,
                                  const std::vector<int>& labels, int k,
                                  std::uint64_t seed) {
  if (std::size_t(embeddings.rows()) != labels.size())
    throw std::invalid_argument("split_subclasses: label count mismatch");
  const int c = labels.empty() ? 0 : *std::max_element(labels.begin(),
                                                       labels.end()) + 1;
  SeedSplitter split{seed};
  std::vector<int> flat(labels.size());
  for (int cls = 0; cls < c; ++cls) {
    std::vector<Eigen::Index> idx;
    for (std::size_t i = 0; i < labels.size(); ++i)
      if (labels[i] == cls) idx.push_back(Eigen::Index(i));
    if (int(idx.size()) < k)
      throw std::invalid_argument(
          "split_subclasses: class " + std::to_string(cls) + " has " +
          std::to_string(idx.size()) + " samples, fewer than k = " +
          std::to_string(k));

    // Canonical point order so the clustering (and therefore the labeling)
    // is invariant under permutations of the input rows.
    std::sort(idx.begin(), idx.end(), [&](Eigen::Index a, Eigen::Index b) {
      if (row_less(embeddings, a, b)) return true;
      if (row_less(embeddings, b, a)) return false;
      return a < b;
    });
    Matrix pts(idx.size(), embeddings.cols());
    for (std::size_t i = 0; i < idx.size(); ++i)
      pts.row(Eigen::Index(i)) = embeddings.row(idx[i]);

    auto clusters = kmeans(pts, k, split.stream("class", std::uint64_t(cls)));

    // Stable local ids: rank clusters by lexicographic centroid order.
    std::vector<int> order(static_cast<std::size_t>(k));
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
      return row_less(clusters.centroids, a, b);
    });
    std::vector<int> rank(static_cast<std::size_t>(k));
    for (int r = 0; r < k; ++r) rank[std::size_t(order[std::size_t(r)])] = r;

    for (std::size_t i = 0; i < idx.size(); ++i)
      flat[std::size_t(idx[i])] =
          cls * k + rank[std::size_t(clusters.assignments[i])];
  }
  return flat;
}

void export_subclass_csv(const std::vector<int>& class_labels,
                         const std::vector<int>& flat_ids, const LabelMap& map,
                         const std::string& path) {
  if (class_labels.size() != flat_ids.size())
    throw std::invalid_argument("export_subclass_csv: length mismatch");
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "sample_index,class,subclass_local,subclass_flat\n";
  for (std::size_t i = 0; i < flat_ids.size(); ++i) {
    const int local = flat_ids[i] - class_labels[i] * map.subclasses_per_class;
    out << i << ',' << class_labels[i] << ',' << local << ',' << flat_ids[i]
        << '\n';
  }
}

SubclassAssignment assign_subclasses(const Dataset& train,
                                     const SubclassConfig& cfg,
                                     const SeedSplitter& seeds) {
  if (cfg.k <= 0) throw std::invalid_argument("subclass k must be positive");

  // Min-max rescale to [0, 1]: the sigmoid decoder cannot reproduce values
  // outside that range. Constant features collapse to 0.
  Matrix scaled = train.features;
  for (Eigen::Index j = 0; j < scaled.cols(); ++j) {
    const double lo = scaled.col(j).minCoeff();
    const double hi = scaled.col(j).maxCoeff();
    if (hi - lo > 1e-12)
      scaled.col(j) = (scaled.col(j).array() - lo) / (hi - lo);
    else
      scaled.col(j).setZero();
  }

  AutoencoderModel ae = make_autoencoder(int(scaled.cols()), cfg.embedding_dim,
                                         seeds.stream("ae-init"));
  SubclassAssignment out;
  out.ae_loss_curve =
      train_autoencoder(ae, scaled, cfg.ae_epochs, cfg.ae_batch_size,
                        cfg.ae_lr, seeds.stream("ae-batch"));
  out.embeddings = encode(ae, scaled);
  out.flat_labels = split_subclasses(out.embeddings, train.labels, cfg.k,
                                     seeds.stream("kmeans"));
  out.map = LabelMap{train.class_count, cfg.k};
  return out;
}

PipelineResult run_subclass_pipeline(const Dataset& train, const Dataset& val,
                                     const Dataset& test,
                                     const SubclassConfig& cfg,
                                     const LossConfig& loss_cfg,
                                     const TrainConfig& tc,
                                     const std::string& net_preset,
                                     PredictorKind predictor,
                                     const SeedSplitter& seeds) {
  auto assignment = assign_subclasses(train, cfg, seeds);
  const LabelMap map = assignment.map;

  if (tc.batch_size / std::max(map.flat_count(), 1) < 10)
    std::cerr << "warning: fewer than 10 samples per subclass per batch; "
                 "scatter estimates may be unrepresentative\n";

  Dataset relabeled = train;
  relabeled.labels = assignment.flat_labels;
  relabeled.class_count = map.flat_count();

  TensorShape input = train.image_mode
                          ? train.image_shape
                          : TensorShape{int(train.dim()), 1, 1};
  Model model = build_preset(net_preset, input, map.flat_count(),
                             seeds.stream("init"));

  PipelineResult res;
  res.map = map;
  res.train_flat_labels = assignment.flat_labels;
  res.ae_loss_curve = std::move(assignment.ae_loss_curve);
  res.history = train_model(
      model, relabeled, val, loss_cfg, tc, seeds, predictor, 0.0,
      [map](int flat) { return map.to_class(flat); });

  Evaluator ev = make_evaluator(model, relabeled, loss_cfg);
  auto flat_pred = evaluate(ev, model, test.features, predictor);
  res.predicted_classes = subclass_to_class(flat_pred, map);
  return res;
}

}  // namespace rdlda

#include "rdlda/harness.hpp"

#include "json.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

namespace rdlda {

namespace {

using nlohmann::json;

std::string objective_name(Objective o) {
  switch (o) {
    case Objective::kRdlda: return "rdlda";
    case Objective::kDlda: return "dlda";
    case Objective::kCce: return "cce";
  }
  throw std::logic_error("unreachable");
}

std::uint64_t fnv1a64(const std::string& text) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  std::ostringstream out;
  out << std::hex << std::setw(16) << std::setfill('0') << v;
  return out.str();
}

json config_json(const ExperimentConfig& cfg) {
  json j;
  j["data_path"] = cfg.data_path;
  j["test_path"] = cfg.test_path;
  j["label_column"] = cfg.label_column;
  j["synthetic"] = cfg.synthetic;
  j["objective"] = objective_name(cfg.objective);
  j["alpha"] = cfg.alpha;
  j["lambda"] = cfg.lambda;
  j["epsilon"] = cfg.epsilon;
  j["alphas"] = cfg.alphas;
  j["net_preset"] = cfg.net_preset;
  j["train"] = {{"base_lr", cfg.train.base_lr},
                {"momentum", cfg.train.momentum},
                {"weight_decay", cfg.train.weight_decay},
                {"lr_halving_period", cfg.train.lr_halving_period},
                {"epochs", cfg.train.epochs},
                {"batch_size", cfg.train.batch_size}};
  j["subclass"] = {{"enabled", cfg.subclass.enabled},
                   {"k", cfg.subclass.k},
                   {"ae_epochs", cfg.subclass.ae_epochs},
                   {"embedding_dim", cfg.subclass.embedding_dim},
                   {"ae_lr", cfg.subclass.ae_lr},
                   {"ae_batch_size", cfg.subclass.ae_batch_size}};
  j["predictor"] = predictor_name(cfg.predictor);
  j["seed"] = cfg.seed;
  j["val_fraction"] = cfg.val_fraction;
  j["test_fraction"] = cfg.test_fraction;
  j["hflip"] = cfg.hflip;
  j["histogram_bins"] = cfg.histogram_bins;
  return j;
}

/// Moves a stratified fraction of ds into the returned dataset.
Dataset split_off(Dataset& ds, double fraction, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<std::vector<int>> by_class(std::size_t(ds.class_count));
  for (std::size_t i = 0; i < ds.labels.size(); ++i)
    by_class[std::size_t(ds.labels[i])].push_back(int(i));
  std::vector<int> take, keep;
  for (auto& idx : by_class) {
    std::shuffle(idx.begin(), idx.end(), rng);
    const int m = std::max(1, int(std::lround(fraction * double(idx.size()))));
    if (m >= int(idx.size()))
      throw std::invalid_argument("split fraction leaves a class empty");
    take.insert(take.end(), idx.begin(), idx.begin() + m);
    keep.insert(keep.end(), idx.begin() + m, idx.end());
  }
  std::sort(take.begin(), take.end());
  std::sort(keep.begin(), keep.end());

  auto select = [&](const std::vector<int>& rows) {
    Dataset out = ds;
    out.features = Matrix(rows.size(), ds.dim());
    out.labels.clear();
    for (std::size_t i = 0; i < rows.size(); ++i) {
      out.features.row(Eigen::Index(i)) = ds.features.row(rows[i]);
      out.labels.push_back(ds.labels[std::size_t(rows[i])]);
    }
    return out;
  };
  Dataset part = select(take);
  ds = select(keep);
  return part;
}

std::string timestamp_utc() {
  const std::time_t now =
      std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  char buf[32];
  std::tm tm_utc{};
  gmtime_r(&now, &tm_utc);
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm_utc);
  return buf;
}

void write_confusion_csv(const ConfusionResult& conf, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  const auto c = conf.matrix.rows();
  out << "true\\pred";
  for (Eigen::Index j = 0; j < c; ++j) out << ',' << j;
  out << '\n';
  for (Eigen::Index i = 0; i < c; ++i) {
    out << i;
    for (Eigen::Index j = 0; j < c; ++j)
      out << ',' << std::llround(conf.matrix(i, j));
    out << '\n';
  }
}

}  // namespace

ConfusionResult confusion_matrix(const std::vector<int>& predicted,
                                 const std::vector<int>& truth,
                                 int class_count) {
  if (predicted.size() != truth.size())
    throw std::invalid_argument("confusion_matrix: length mismatch");
  ConfusionResult res;
  res.matrix = Matrix::Zero(class_count, class_count);
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i] < 0 || truth[i] >= class_count || predicted[i] < 0 ||
        predicted[i] >= class_count)
      throw std::invalid_argument("confusion_matrix: label out of range");
    res.matrix(truth[i], predicted[i]) += 1.0;
  }
  const double n = double(truth.size());
  res.accuracy = n > 0 ? res.matrix.trace() / n : 0.0;
  if (class_count == 2) {
    const double pos = res.matrix(1, 0) + res.matrix(1, 1);
    const double neg = res.matrix(0, 0) + res.matrix(0, 1);
    if (pos > 0) res.sensitivity = res.matrix(1, 1) / pos;
    if (neg > 0) res.specificity = res.matrix(0, 0) / neg;
  }
  return res;
}

DimensionDistributions dimension_distributions(const LabeledBatch& latents,
                                               int bins) {
  if (bins < 2)
    throw std::invalid_argument("dimension_distributions: bins must be >= 2");
  const auto n = latents.sample_count();
  const auto d = latents.dim();
  const int c = latents.class_count;
  if (n < 1 || c < 1)
    throw std::invalid_argument("dimension_distributions: empty input");

  DimensionDistributions out;
  out.bins = bins;
  out.edges = Matrix(d, bins + 1);
  out.mean = Matrix::Zero(c, d);
  out.variance = Matrix::Zero(c, d);
  out.fisher.assign(std::size_t(d), std::nan(""));

  std::vector<int> counts_per_class(std::size_t(c), 0);
  for (int y : latents.labels) ++counts_per_class[std::size_t(y)];

  for (Eigen::Index j = 0; j < d; ++j) {
    double lo = latents.features.col(j).minCoeff();
    double hi = latents.features.col(j).maxCoeff();
    if (hi - lo < 1e-12) {
      lo -= 0.5;
      hi += 0.5;
    }
    for (int b = 0; b <= bins; ++b)
      out.edges(j, b) = lo + (hi - lo) * double(b) / double(bins);

    Matrix hist = Matrix::Zero(c, bins);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double x = latents.features(i, j);
      int b = int(std::floor((x - lo) / (hi - lo) * bins));
      b = std::clamp(b, 0, bins - 1);
      hist(latents.labels[std::size_t(i)], b) += 1.0;
      out.mean(latents.labels[std::size_t(i)], j) += x;
    }
    out.counts.push_back(std::move(hist));
  }
  for (int y = 0; y < c; ++y)
    out.mean.row(y) /= double(std::max(counts_per_class[std::size_t(y)], 1));
  for (Eigen::Index i = 0; i < n; ++i) {
    const int y = latents.labels[std::size_t(i)];
    out.variance.row(y) +=
        (latents.features.row(i) - out.mean.row(y)).array().square().matrix();
  }
  for (int y = 0; y < c; ++y)
    out.variance.row(y) /=
        double(std::max(counts_per_class[std::size_t(y)], 1));

  if (c < 2) {
    out.fisher_note = "undefined: single class";
    return out;
  }
  // Per-dimension Fisher ratio from the raw scatter diagonals.
  Vector total_mean = latents.features.colwise().mean();
  Vector sb = Vector::Zero(d), sw = Vector::Zero(d);
  for (int y = 0; y < c; ++y) {
    sb += double(counts_per_class[std::size_t(y)]) *
          (out.mean.row(y).transpose() - total_mean).array().square().matrix();
    sw += double(counts_per_class[std::size_t(y)]) *
          out.variance.row(y).transpose();
  }
  for (Eigen::Index j = 0; j < d; ++j) out.fisher[std::size_t(j)] = sb(j) / sw(j);
  return out;
}

void write_dimhist_csv(const DimensionDistributions& dist,
                       const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "record,dim,class,bin,lo,hi,value,note\n";
  out.precision(17);
  const auto d = dist.edges.rows();
  const int c = int(dist.mean.rows());
  for (Eigen::Index j = 0; j < d; ++j)
    for (int y = 0; y < c; ++y)
      for (int b = 0; b < dist.bins; ++b)
        out << "count," << j << ',' << y << ',' << b << ',' << dist.edges(j, b)
            << ',' << dist.edges(j, b + 1) << ','
            << dist.counts[std::size_t(j)](y, b) << ",\n";
  for (Eigen::Index j = 0; j < d; ++j)
    for (int y = 0; y < c; ++y) {
      out << "mean," << j << ',' << y << ",,,," << dist.mean(y, j) << ",\n";
      out << "var," << j << ',' << y << ",,,," << dist.variance(y, j) << ",\n";
    }
  for (Eigen::Index j = 0; j < d; ++j) {
    const double f = dist.fisher[std::size_t(j)];
    out << "fisher," << j << ",,,,,";
    if (std::isnan(f))
      out << ',' << dist.fisher_note;
    else
      out << f << ',';
    out << '\n';
  }
}

std::string report_to_json(const MetricsReport& report) {
  json j;
  j["loss_curve"] = report.loss_curve;
  j["val_accuracy"] = report.val_accuracy;
  j["best_epoch"] = report.best_epoch;
  j["best_val_accuracy"] = report.best_val_accuracy;
  j["alpha_used"] = report.alpha_used;
  j["test_accuracy"] = report.test_accuracy;
  json eigs = json::array();
  for (const Vector& v : report.eigenvalue_trace) {
    std::vector<double> row(v.data(), v.data() + v.size());
    eigs.push_back(row);
  }
  j["eigenvalue_trace"] = eigs;
  json conf = json::array();
  for (Eigen::Index i = 0; i < report.confusion.matrix.rows(); ++i) {
    std::vector<long> row;
    for (Eigen::Index k = 0; k < report.confusion.matrix.cols(); ++k)
      row.push_back(std::lround(report.confusion.matrix(i, k)));
    conf.push_back(row);
  }
  j["confusion"] = conf;
  if (report.confusion.sensitivity)
    j["sensitivity"] = *report.confusion.sensitivity;
  if (report.confusion.specificity)
    j["specificity"] = *report.confusion.specificity;
  j["config"] = json::parse(report.config_echo);
  j["config_hash"] = report.config_hash;
  if (!report.error.empty()) j["error"] = report.error;
  j["timing"] = {{"timestamp", timestamp_utc()},
                 {"wall_seconds", report.wall_seconds}};
  return j.dump(2) + "\n";
}

DataSplits load_splits(const ExperimentConfig& cfg) {
  if (cfg.data_path.empty() == cfg.synthetic.empty())
    throw std::invalid_argument(
        "config: exactly one of data_path and synthetic must be set");
  SeedSplitter seeds{cfg.seed};
  DataSplits splits;
  if (!cfg.synthetic.empty()) {
    SyntheticSpec spec = parse_synthetic_spec(cfg.synthetic);
    if (spec.seed == 0) spec.seed = seeds.stream("data");
    splits.train = make_synthetic(spec);
    SyntheticSpec vs = spec;
    vs.per_class = std::max(
        1, int(std::lround(cfg.val_fraction * double(spec.per_class))));
    splits.val = make_synthetic(vs, "val");
    splits.test = make_synthetic(spec, "test");
  } else {
    CsvSchema schema;
    try {
      schema.label_column = std::stoi(cfg.label_column);
    } catch (const std::exception&) {
      schema.label_column = cfg.label_column;
    }
    splits.train = load_csv(cfg.data_path, schema);
    if (!cfg.test_path.empty())
      splits.test = load_csv(cfg.test_path, schema);
    else
      splits.test =
          split_off(splits.train, cfg.test_fraction, seeds.stream("split-test"));
    splits.val =
        split_off(splits.train, cfg.val_fraction, seeds.stream("split-val"));
  }
  splits.train.split = "train";
  splits.val.split = "val";
  splits.test.split = "test";
  const FeatureStats stats = feature_stats(splits.train);
  splits.train = normalize(splits.train, stats);
  splits.val = normalize(splits.val, stats);
  splits.test = normalize(splits.test, stats);
  return splits;
}

MetricsReport run_experiment(const ExperimentConfig& cfg) {
  const auto t0 = std::chrono::steady_clock::now();
  if (cfg.data_path.empty() == cfg.synthetic.empty())
    throw std::invalid_argument(
        "config: exactly one of data_path and synthetic must be set");
  if (cfg.alpha < 0.0 || cfg.alpha > 1.0)
    throw std::invalid_argument("config: alpha must lie in [0, 1]");
  if (cfg.objective == Objective::kCce && (cfg.alpha_set || cfg.epsilon_set))
    std::cerr << "warning: alpha/epsilon are ignored by the cross-entropy "
                 "objective\n";

  if (!cfg.out_dir.empty()) std::filesystem::create_directories(cfg.out_dir);

  SeedSplitter seeds{cfg.seed};
  auto stage = [](const std::string& name, auto&& fn) {
    try {
      return fn();
    } catch (const std::exception& e) {
      throw std::runtime_error("stage " + name + ": " + e.what());
    }
  };

  DataSplits splits;
  stage("data", [&] {
    splits = load_splits(cfg);
    return 0;
  });
  Dataset& train = splits.train;
  Dataset& val = splits.val;
  Dataset& test = splits.test;

  LossConfig loss;
  loss.alpha = cfg.alpha;
  loss.lambda = cfg.lambda;
  loss.epsilon = cfg.epsilon;
  loss.objective = cfg.objective;

  LabelMap map{train.class_count, 1};
  Dataset train_for_net = train;
  std::vector<double> ae_curve;
  if (cfg.subclass.enabled) {
    stage("subclass", [&] {
      auto sa = assign_subclasses(train, cfg.subclass, seeds);
      map = sa.map;
      train_for_net.labels = sa.flat_labels;
      train_for_net.class_count = map.flat_count();
      ae_curve = std::move(sa.ae_loss_curve);
      if (!cfg.out_dir.empty())
        export_subclass_csv(train.labels, train_for_net.labels, map,
                            cfg.out_dir + "/subclasses.csv");
      return 0;
    });
  }

  TensorShape input = train.image_mode ? train.image_shape
                                       : TensorShape{int(train.dim()), 1, 1};
  Model model = build_preset(cfg.net_preset, input, train_for_net.class_count,
                             seeds.stream("init"));
  std::function<int(int)> fold;
  if (cfg.subclass.enabled)
    fold = [map](int flat) { return map.to_class(flat); };

  MetricsReport report;
  stage("train", [&] {
    TrainHistory hist =
        train_model(model, train_for_net, val, loss, cfg.train, seeds,
                    cfg.predictor, cfg.hflip, fold);
    report.loss_curve = std::move(hist.loss_curve);
    report.val_accuracy = std::move(hist.val_accuracy);
    report.eigenvalue_trace = std::move(hist.eigenvalue_trace);
    report.best_epoch = hist.best_epoch;
    report.best_val_accuracy = hist.best_val_accuracy;
    return 0;
  });

  stage("evaluate", [&] {
    Evaluator ev = make_evaluator(model, train_for_net, loss);
    for (PredictorKind kind : {PredictorKind::kHyperplane,
                               PredictorKind::kEuclidean, PredictorKind::kLda}) {
      std::vector<int> pred = evaluate(ev, model, test.features, kind);
      if (fold)
        for (int& y : pred) y = fold(y);
      auto conf = confusion_matrix(pred, test.labels, test.class_count);
      report.test_accuracy[predictor_name(kind)] = conf.accuracy;
      if (kind == cfg.predictor) {
        report.confusion = std::move(conf);
        report.test_predictions = std::move(pred);
      }
    }
    return 0;
  });

  report.alpha_used = loss.effective_alpha();
  report.config_echo = config_json(cfg).dump();
  report.config_hash = hex64(fnv1a64(report.config_echo));
  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();

  if (!cfg.out_dir.empty()) {
    stage("output", [&] {
      std::filesystem::create_directories(cfg.out_dir);
      std::ofstream(cfg.out_dir + "/report.json") << report_to_json(report);
      write_confusion_csv(report.confusion, cfg.out_dir + "/confusion.csv");
      const Matrix latents = model.forward(test.features, Mode::kEval);
      LabeledBatch lat{latents, test.labels, test.class_count};
      write_dimhist_csv(dimension_distributions(lat, cfg.histogram_bins),
                        cfg.out_dir + "/dimhist.csv");
      save_checkpoint(model, cfg.out_dir + "/checkpoint.rdlda");
      return 0;
    });
  }
  return report;
}

std::vector<MetricsReport> sweep_alpha(const ExperimentConfig& cfg) {
  if (cfg.alphas.empty())
    throw std::invalid_argument("sweep: at least one alpha required");
  std::vector<double> grid = cfg.alphas;
  std::sort(grid.begin(), grid.end());

  std::vector<MetricsReport> rows;
  for (double a : grid) {
    ExperimentConfig sub = cfg;
    sub.alpha = a;
    sub.alphas.clear();
    if (!cfg.out_dir.empty()) {
      std::ostringstream dir;
      dir << cfg.out_dir << "/alpha_" << a;
      sub.out_dir = dir.str();
      std::filesystem::create_directories(sub.out_dir);
    }
    MetricsReport row;
    try {
      row = run_experiment(sub);
    } catch (const std::exception& e) {
      row.error = e.what();
      row.config_echo = config_json(sub).dump();
      row.config_hash = hex64(fnv1a64(row.config_echo));
    }
    row.alpha_used = a;
    rows.push_back(std::move(row));
  }

  if (!cfg.out_dir.empty()) {
    std::filesystem::create_directories(cfg.out_dir);
    std::ofstream out(cfg.out_dir + "/sweep.csv");
    out << "alpha,acc_hyperplane,acc_euclidean,acc_lda,best_val_accuracy,"
           "best_epoch,error\n";
    out.precision(17);
    for (const auto& row : rows) {
      out << row.alpha_used << ',';
      if (row.error.empty()) {
        out << row.test_accuracy.at("hyperplane") << ','
            << row.test_accuracy.at("euclidean") << ','
            << row.test_accuracy.at("lda") << ',' << row.best_val_accuracy
            << ',' << row.best_epoch << ',';
      } else {
        std::string msg = row.error;
        std::replace(msg.begin(), msg.end(), ',', ';');
        out << ",,,,," << msg;
      }
      out << '\n';
    }
  }
  return rows;
}

}  // namespace rdlda

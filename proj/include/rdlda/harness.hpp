#pragma once

#include "rdlda/subclass.hpp"

#include <map>
#include <optional>

namespace rdlda {

struct ExperimentConfig {
  // Exactly one of data_path / synthetic must be set.
  std::string data_path;       // CSV file
  std::string test_path;       // optional held-out CSV; carved out otherwise
  std::string label_column = "0";  // column name, or index if numeric
  std::string synthetic;       // e.g. "gaussians,c=3,n=200,d=8,sep=6"

  Objective objective = Objective::kRdlda;
  double alpha = 0.5;
  double lambda = 1e-3;
  double epsilon = 1.0;
  bool alpha_set = false;      // for the cce "ignored" warning
  bool epsilon_set = false;
  std::vector<double> alphas;  // sweep grid

  std::string net_preset = "mlp";
  TrainConfig train;
  SubclassConfig subclass;
  PredictorKind predictor = PredictorKind::kHyperplane;
  std::uint64_t seed = 0;
  std::string out_dir;         // empty: no files written
  double val_fraction = 0.2;
  double test_fraction = 0.2;  // CSV without test_path only
  double hflip = 0.0;
  int histogram_bins = 20;
};

struct ConfusionResult {
  Matrix matrix;  // rows true class, columns predicted
  double accuracy = 0.0;
  // Binary tasks only, class 1 treated as positive.
  std::optional<double> sensitivity;
  std::optional<double> specificity;
};

/// M[i][j] = count(true i, predicted j); accuracy = trace / n.
ConfusionResult confusion_matrix(const std::vector<int>& predicted,
                                 const std::vector<int>& truth,
                                 int class_count);

struct DimensionDistributions {
  int bins = 0;
  Matrix edges;        // d x (bins + 1), shared across classes per dimension
  std::vector<Matrix> counts;  // per dimension: c x bins
  Matrix mean;         // c x d
  Matrix variance;     // c x d
  std::vector<double> fisher;  // per dimension; NaN when undefined
  std::string fisher_note;     // reason when fisher is undefined
};

/// Per-dimension class histograms over shared bin edges plus per-dimension
/// Fisher ratios diag(S_B) / diag(S_W).
DimensionDistributions dimension_distributions(const LabeledBatch& latents,
                                               int bins);
void write_dimhist_csv(const DimensionDistributions& dist,
                       const std::string& path);

struct DataSplits {
  Dataset train;
  Dataset val;
  Dataset test;
};

/// Loads the configured dataset (CSV or synthetic), carves out the
/// validation/test splits, and normalizes everything with train statistics.
DataSplits load_splits(const ExperimentConfig& cfg);

struct MetricsReport {
  std::vector<double> loss_curve;
  std::vector<double> val_accuracy;
  std::vector<Vector> eigenvalue_trace;
  int best_epoch = -1;
  double best_val_accuracy = 0.0;
  std::map<std::string, double> test_accuracy;  // per predictor
  ConfusionResult confusion;  // for the configured predictor
  std::vector<int> test_predictions;
  double alpha_used = 0.0;
  std::string config_hash;
  std::string config_echo;  // canonical JSON of the config
  double wall_seconds = 0.0;
  std::string error;  // sweep rows only: failure message
};

/// Serialized report. Volatile data (timestamp, wall clock) lives under the
/// single "timing" key so the rest of the document is reproducible
/// byte-for-byte for a fixed config and seed.
std::string report_to_json(const MetricsReport& report);

/// Runs the full experiment: load/split/normalize data, optional subclass
/// assignment, training, evaluation with all three predictors, and artifact
/// output (report.json, confusion.csv, dimhist.csv, checkpoint.rdlda, and
/// subclasses.csv when enabled) into cfg.out_dir when set.
MetricsReport run_experiment(const ExperimentConfig& cfg);

/// One run per alpha with shared seeds; rows sorted by alpha. Failures are
/// captured per row. Writes <out_dir>/sweep.csv when out_dir is set.
std::vector<MetricsReport> sweep_alpha(const ExperimentConfig& cfg);

}  // namespace rdlda

#pragma once

#include "rdlda/training.hpp"

namespace rdlda {

/// Single-pair autoencoder: Dense(in, emb) + Tanh encoder, mirrored
/// Dense(emb, in) + Sigmoid decoder. Embeddings live in (-1, 1), decoder
/// outputs in (0, 1), so inputs must be scaled to [0, 1] before training.
struct AutoencoderModel {
  Model net;  // encoder layers 0-1, decoder layers 2-3
  int input_dim = 0;
  int embedding_dim = 0;
};

AutoencoderModel make_autoencoder(int input_dim, int embedding_dim,
                                  std::uint64_t seed);

/// One reconstruction step: loss = (1/n) sum ||x - x_hat||^2, backprop, one
/// Nesterov step at constant lr. Inputs outside [0, 1] are rejected (the
/// sigmoid decoder cannot reach them).
double ae_train_step(AutoencoderModel& model, const Matrix& batch, double lr);

Matrix encode(AutoencoderModel& model, const Matrix& batch);

/// Mini-batch reconstruction training; returns the per-epoch mean loss.
std::vector<double> train_autoencoder(AutoencoderModel& model,
                                      const Matrix& data01, int epochs,
                                      int batch_size, double lr,
                                      std::uint64_t batch_seed);

/// Bijective (class, local subclass) <-> flat id mapping:
/// flat = class * k + local, class = flat / k.
struct LabelMap {
  int class_count = 0;
  int subclasses_per_class = 1;

  int flat(int cls, int local) const { return cls * subclasses_per_class + local; }
  int to_class(int flat_id) const;
  int flat_count() const { return class_count * subclasses_per_class; }
};

std::vector<int> subclass_to_class(const std::vector<int>& flat_ids,
                                   const LabelMap& map);

struct ClusterResult {
  std::vector<int> assignments;  // n, values in [0, k)
  Matrix centroids;              // k x dim
  double inertia = 0.0;          // sum of squared distances to centroids
};

/// Lloyd's algorithm with k-means++ seeding, 5 restarts keeping the lowest
/// inertia, iteration cap 300, empty clusters repaired by stealing the point
/// farthest from its centroid. Deterministic given seed and point order.
ClusterResult kmeans(const Matrix& points, int k, std::uint64_t seed);

/// Per-class independent kmeans over the embeddings. Local cluster ids are
/// fixed by sorting centroids lexicographically and each class's points are
/// fed to kmeans in a canonical (lexicographic) order, so the labeling is
/// invariant under sample permutation. Returns flat subclass ids.
std::vector<int> split_subclasses(const Matrix& embeddings,
                                  const std::vector<int>& labels, int k,
                                  std::uint64_t seed);

/// Writes `sample_index,class,subclass_local,subclass_flat` rows.
void export_subclass_csv(const std::vector<int>& class_labels,
                         const std::vector<int>& flat_ids, const LabelMap& map,
                         const std::string& path);

struct SubclassConfig {
  bool enabled = false;
  int k = 2;               // subclasses per class
  int ae_epochs = 30;      // autoencoder training epochs
  int embedding_dim = 32;
  double ae_lr = 0.05;
  int ae_batch_size = 32;
};

struct SubclassAssignment {
  std::vector<int> flat_labels;  // per train sample
  LabelMap map;
  Matrix embeddings;
  std::vector<double> ae_loss_curve;
};

/// Autoencoder + kmeans stage of the subclass pipeline: rescales the train
/// features to [0, 1] per feature (min-max), trains the autoencoder, encodes,
/// and splits every class into k subclasses. Uses only the "ae-init",
/// "ae-batch", and "kmeans" seed streams so the downstream network training
/// draws the same randomness as a run without subclasses.
SubclassAssignment assign_subclasses(const Dataset& train,
                                     const SubclassConfig& cfg,
                                     const SeedSplitter& seeds);

struct PipelineResult {
  std::vector<int> predicted_classes;   // test set
  std::vector<int> train_flat_labels;
  LabelMap map;
  TrainHistory history;
  std::vector<double> ae_loss_curve;
};

/// Full subclass pipeline: assign subclasses on the train split, train a
/// fresh network against the flat subclass labels, predict test subclasses
/// with the configured predictor, and fold them back to classes. With k = 1
/// this degenerates to the plain training pipeline bit-for-bit.
PipelineResult run_subclass_pipeline(const Dataset& train, const Dataset& val,
                                     const Dataset& test,
                                     const SubclassConfig& cfg,
                                     const LossConfig& loss_cfg,
                                     const TrainConfig& tc,
                                     const std::string& net_preset,
                                     PredictorKind predictor,
                                     const SeedSplitter& seeds);

}  // namespace rdlda

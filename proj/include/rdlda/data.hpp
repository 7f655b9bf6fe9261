#pragma once

#include "rdlda/network.hpp"
#include "rdlda/types.hpp"

#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace rdlda {

struct Dataset {
  Matrix features;  // n x d (image mode: d = channels * h * w, values [0,1])
  std::vector<int> labels;
  int class_count = 0;
  bool image_mode = false;
  TensorShape image_shape{0, 1, 1};
  std::string split;  // train | val | test
  std::string provenance;

  Eigen::Index size() const { return features.rows(); }
  Eigen::Index dim() const { return features.cols(); }
};

struct CsvSchema {
  /// Label column by name (requires a header) or zero-based index.
  std::variant<std::string, int> label_column = 0;
};

/// Parses a rectangular numeric CSV with an optional auto-detected header
/// (first line skipped when any cell is non-numeric). Errors cite the
/// 1-based line number.
Dataset load_csv(const std::string& path, const CsvSchema& schema);

/// Binary image tensor container: magic "RDIM1", little-endian u32
/// n, channels, h, w, then n*c*h*w u8 pixels, then CRC32 of the payload.
Dataset load_image_tensor(const std::string& path);
void save_image_tensor(const Dataset& ds, const std::string& path);

struct FeatureStats {
  Vector mean;
  Vector std;  // floored at 1e-8
};

/// Per-feature statistics; compute these on the train split only.
FeatureStats feature_stats(const Dataset& train);
Dataset normalize(const Dataset& ds, const FeatureStats& stats);

/// Per-sample Bernoulli horizontal flip of image-mode data, seeded per
/// (epoch, sample index).
Dataset augment_hflip(const Dataset& ds, double probability,
                      std::uint64_t seed, int epoch = 0);

struct BatchPlan {
  int batch_size = 32;
  bool stratified = true;
  std::uint64_t seed = 0;
  bool drop_last = false;
};

/// Stratified (or plain shuffled) mini-batches for one epoch. Stratified
/// plans guarantee every class in every batch or fail fast.
std::vector<LabeledBatch> make_batches(const Dataset& ds,
                                       const BatchPlan& plan, int epoch);

struct SyntheticSpec {
  std::string kind = "gaussians";  // gaussians | multimodal
  int class_count = 3;
  int per_class = 100;
  int dim = 8;
  double separation = 6.0;
  std::uint64_t seed = 0;
};

/// gaussians: c unit-variance spherical blobs at random directions scaled by
/// separation. multimodal: each class is an even mixture of two distant
/// blobs, the construction Subclass RDLDA benefits from. The class centers
/// depend only on the seed; the split tag salts the noise stream so train
/// and test splits share centers but not samples.
Dataset make_synthetic(const SyntheticSpec& spec,
                       const std::string& split = "train");

/// Parses "gaussians,c=3,n=200,d=8,sep=6" style specs.
SyntheticSpec parse_synthetic_spec(const std::string& text);

}  // namespace rdlda

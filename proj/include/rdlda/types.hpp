#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace rdlda {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// n x d batch of hidden representations or raw features, one sample per row,
/// with integer class labels in [0, class_count).
struct LabeledBatch {
  Matrix features;
  std::vector<int> labels;
  int class_count = 0;

  Eigen::Index sample_count() const { return features.rows(); }
  Eigen::Index dim() const { return features.cols(); }
};

/// Throws std::invalid_argument if the batch violates its invariants:
/// n >= 2, every label in range, at least 2 distinct labels present.
void validate_batch(const LabeledBatch& batch);

/// Deterministic per-purpose stream derivation from a single root seed,
/// so e.g. init / batching / dropout / kmeans randomness can be varied
/// independently.
struct SeedSplitter {
  std::uint64_t root;

  std::uint64_t stream(const std::string& purpose) const;
  std::uint64_t stream(const std::string& purpose, std::uint64_t index) const;
};

std::uint32_t crc32(const void* data, std::size_t len, std::uint32_t seed = 0);

}  // namespace rdlda

#pragma once

#include "rdlda/mathcore.hpp"
#include "rdlda/types.hpp"

namespace rdlda {

/// Per-class means plus the scatter matrices of a batch. sb is the raw
/// between-class scatter, sw_reg the alpha/lambda-regularized within-class
/// scatter actually fed to the eigenproblem.
struct ScatterPair {
  SymMatrix sb;
  SymMatrix sw_reg;
  Matrix class_means;  // c x d
  Vector total_mean;   // d
  std::vector<int> counts;
  double alpha;
  double lambda;
};

struct ClassMeans {
  Matrix class_means;  // c x d, row j = mean of class j
  Vector total_mean;
  std::vector<int> counts;
};

/// Arithmetic mean per class and total mean. Every class in [0, c) must be
/// present in the batch.
ClassMeans class_means(const LabeledBatch& batch);

/// Unnormalized within-class scatter: sum over classes and samples of
/// (x - mu_j)(x - mu_j)^T. Summation runs in (label, original index) order so
/// the result is bit-reproducible under row permutations.
SymMatrix within_scatter(const LabeledBatch& batch, const ClassMeans& means);

/// Unnormalized between-class scatter: sum_j n_j (mu_j - mu)(mu_j - mu)^T.
SymMatrix between_scatter(const Matrix& class_means_mat,
                          const Vector& total_mean,
                          const std::vector<int>& counts);

/// alpha * S_W + (1 - alpha) * diag(S_W) + lambda * I. Off-diagonals scaled
/// by alpha exactly, diagonal unchanged except + lambda; SPD for lambda > 0.
SymMatrix regularize_within(const SymMatrix& sw, double alpha, double lambda);

/// Convenience: full scatter computation for one batch.
ScatterPair compute_scatter(const LabeledBatch& batch, double alpha,
                            double lambda);

}  // namespace rdlda

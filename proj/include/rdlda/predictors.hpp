#pragma once

#include "rdlda/classic_lda.hpp"
#include "rdlda/scatter.hpp"

namespace rdlda {

/// Reference statistics for classifying in a trained latent space: per-class
/// mean latents, the discriminant projection, and the decision-hyperplane
/// normals derived from them. Immutable once built; all predicts are pure.
struct LatentReference {
  Matrix class_means;         // c x d
  Matrix projection;          // d x (c-1), S'_W-orthonormal columns
  Matrix hyperplane_normals;  // c x d == class_means * projection * projection^T
};

/// Builds the reference from the full set of training latents in one pass.
/// The projection comes from the same regularized eigenproblem used in
/// training, with the same (alpha, lambda).
LatentReference build_reference(const LabeledBatch& train_latents, double alpha,
                                double lambda);

struct HyperplanePrediction {
  Vector probabilities;  // sums to 1
  int label = 0;
};

/// Signed distances to each class's decision hyperplane, squashed through a
/// sigmoid and normalized to probabilities. Label is the argmax, ties to the
/// lowest class index.
HyperplanePrediction hyperplane_predict(const Vector& query,
                                        const LatentReference& ref);
std::vector<int> hyperplane_predict(const Matrix& queries,
                                    const LatentReference& ref);

/// Nearest class mean by Euclidean distance, ties to the lowest class index.
int euclidean_predict(const Vector& query, const LatentReference& ref);
std::vector<int> euclidean_predict(const Matrix& queries,
                                   const LatentReference& ref);

}  // namespace rdlda

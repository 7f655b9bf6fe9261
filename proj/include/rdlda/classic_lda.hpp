#pragma once

#include "rdlda/scatter.hpp"

namespace rdlda {

/// Classic LDA fitted on a batch: projection columns are the top
/// min(c-1, d) generalized eigenvectors (S'_W-orthonormal), ordered by
/// descending eigenvalue.
struct LdaModel {
  Matrix projection;             // d x p
  Matrix projected_class_means;  // c x p
  Vector priors;                 // class frequencies
  Vector eigenvalues;            // descending, length p
  double alpha = 1.0;
  double lambda = 1e-3;
};

LdaModel lda_fit(const LabeledBatch& batch, double alpha, double lambda);

/// Nearest projected class mean with log-prior correction:
/// argmin_j ||U^T x - m_j||^2 - 2 ln(prior_j), ties to the lowest index.
std::vector<int> lda_predict(const LdaModel& model, const Matrix& queries);

}  // namespace rdlda

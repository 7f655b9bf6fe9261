#include "rdlda/classic_lda.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace rdlda {

LdaModel lda_fit(const LabeledBatch& batch, double alpha, double lambda) {
  validate_batch(batch);
  const int c = batch.class_count;
  const auto d = batch.dim();
  if (batch.sample_count() <= c)
    throw std::invalid_argument("lda_fit: need more samples than classes");

  ScatterPair scatter = compute_scatter(batch, alpha, lambda);
  EigenSolution sol = generalized_eig(scatter.sb, scatter.sw_reg);

  const Eigen::Index p = std::min<Eigen::Index>(c - 1, d);
  LdaModel model;
  model.alpha = alpha;
  model.lambda = lambda;
  model.projection = Matrix(d, p);
  model.eigenvalues = Vector(p);
  // generalized_eig is ascending; take the top p in descending order.
  for (Eigen::Index j = 0; j < p; ++j) {
    model.projection.col(j) = sol.vectors.col(d - 1 - j);
    model.eigenvalues(j) = sol.values(d - 1 - j);
  }
  model.projected_class_means = scatter.class_means * model.projection;
  model.priors = Vector(c);
  for (int j = 0; j < c; ++j)
    model.priors(j) = static_cast<double>(scatter.counts[j]) /
                      static_cast<double>(batch.sample_count());
  return model;
}

std::vector<int> lda_predict(const LdaModel& model, const Matrix& queries) {
  if (queries.cols() != model.projection.rows())
    throw std::invalid_argument("lda_predict: query width mismatch");
  const Matrix projected = queries * model.projection;
  const auto c = model.projected_class_means.rows();
  std::vector<int> labels(projected.rows());
  for (Eigen::Index i = 0; i < projected.rows(); ++i) {
    int best = 0;
    double best_score = std::numeric_limits<double>::infinity();
    for (Eigen::Index j = 0; j < c; ++j) {
      const double dist2 =
          (projected.row(i) - model.projected_class_means.row(j)).squaredNorm();
      const double score = dist2 - 2.0 * std::log(model.priors(j));
      if (score < best_score) {  // strict: ties keep the lowest index
        best_score = score;
        best = static_cast<int>(j);
      }
    }
    labels[i] = best;
  }
  return labels;
}

}  // namespace rdlda

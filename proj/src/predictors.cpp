#include "rdlda/predictors.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace rdlda {

LatentReference build_reference(const LabeledBatch& train_latents, double alpha,
                                double lambda) {
  validate_batch(train_latents);
  const int c = train_latents.class_count;
  const auto d = train_latents.dim();

  ScatterPair scatter = compute_scatter(train_latents, alpha, lambda);
  EigenSolution sol = generalized_eig(scatter.sb, scatter.sw_reg);

  LatentReference ref;
  ref.class_means = scatter.class_means;
  const Eigen::Index p = std::min<Eigen::Index>(c - 1, d);
  ref.projection = Matrix(d, p);
  // generalized_eig is ascending; keep the top p in descending order.
  for (Eigen::Index j = 0; j < p; ++j)
    ref.projection.col(j) = sol.vectors.col(d - 1 - j);
  ref.hyperplane_normals =
      ref.class_means * ref.projection * ref.projection.transpose();
  return ref;
}

HyperplanePrediction hyperplane_predict(const Vector& query,
                                        const LatentReference& ref) {
  if (query.size() != ref.class_means.cols())
    throw std::invalid_argument("hyperplane_predict: query width mismatch");
  const auto c = ref.class_means.rows();
  // Signed distance per class: h^T T_j - 1/2 * mean_j^T T_j.
  Vector dist = ref.hyperplane_normals * query -
                0.5 * (ref.class_means.cwiseProduct(ref.hyperplane_normals))
                          .rowwise()
                          .sum();
  Vector p(c);
  for (Eigen::Index j = 0; j < c; ++j) p(j) = 1.0 / (1.0 + std::exp(-dist(j)));
  p /= p.sum();

  HyperplanePrediction out;
  out.probabilities = p;
  out.label = 0;
  for (Eigen::Index j = 1; j < c; ++j)
    if (p(j) > p(out.label)) out.label = static_cast<int>(j);
  return out;
}

std::vector<int> hyperplane_predict(const Matrix& queries,
                                    const LatentReference& ref) {
  std::vector<int> labels(queries.rows());
  for (Eigen::Index i = 0; i < queries.rows(); ++i)
    labels[i] = hyperplane_predict(Vector(queries.row(i)), ref).label;
  return labels;
}

int euclidean_predict(const Vector& query, const LatentReference& ref) {
  if (query.size() != ref.class_means.cols())
    throw std::invalid_argument("euclidean_predict: query width mismatch");
  int best = 0;
  double best_dist = std::numeric_limits<double>::infinity();
  for (Eigen::Index j = 0; j < ref.class_means.rows(); ++j) {
    const double d2 = (query.transpose() - ref.class_means.row(j)).squaredNorm();
    if (d2 < best_dist) {  // strict: ties keep the lowest index
      best_dist = d2;
      best = static_cast<int>(j);
    }
  }
  return best;
}

std::vector<int> euclidean_predict(const Matrix& queries,
                                   const LatentReference& ref) {
  std::vector<int> labels(queries.rows());
  for (Eigen::Index i = 0; i < queries.rows(); ++i)
    labels[i] = euclidean_predict(Vector(queries.row(i)), ref);
  return labels;
}

}  // namespace rdlda

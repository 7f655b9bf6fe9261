#include "rdlda/scatter.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

namespace rdlda {

namespace {

// Sample indices sorted by label, then lexicographically by feature values.
// Summing in this order makes the scatter matrices bit-identical under any
// permutation of the batch rows.
std::vector<int> label_sorted_indices(const LabeledBatch& batch) {
  std::vector<int> idx(batch.labels.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) {
    if (batch.labels[a] != batch.labels[b])
      return batch.labels[a] < batch.labels[b];
    const auto ra = batch.features.row(a);
    const auto rb = batch.features.row(b);
    for (Eigen::Index j = 0; j < ra.size(); ++j) {
      if (ra(j) != rb(j)) return ra(j) < rb(j);
    }
    return false;
  });
  return idx;
}

}  // namespace

ClassMeans class_means(const LabeledBatch& batch) {
  validate_batch(batch);
  const int c = batch.class_count;
  const auto d = batch.dim();
  ClassMeans out;
  out.class_means = Matrix::Zero(c, d);
  out.counts.assign(c, 0);

  for (int i : label_sorted_indices(batch)) {
    const int y = batch.labels[i];
    out.class_means.row(y) += batch.features.row(i);
    ++out.counts[y];
  }
  for (int j = 0; j < c; ++j) {
    if (out.counts[j] == 0)
      throw std::invalid_argument("class " + std::to_string(j) +
                                  " absent from batch");
    out.class_means.row(j) /= static_cast<double>(out.counts[j]);
  }
  Vector weighted = Vector::Zero(d);
  for (int j = 0; j < c; ++j)
    weighted += out.counts[j] * out.class_means.row(j).transpose();
  out.total_mean = weighted / static_cast<double>(batch.sample_count());
  return out;
}

SymMatrix within_scatter(const LabeledBatch& batch, const ClassMeans& means) {
  const auto d = batch.dim();
  Matrix sw = Matrix::Zero(d, d);
  for (int i : label_sorted_indices(batch)) {
    const Vector dev =
        batch.features.row(i).transpose() -
        means.class_means.row(batch.labels[i]).transpose();
    sw.noalias() += dev * dev.transpose();
  }
  return SymMatrix(sw);
}

SymMatrix between_scatter(const Matrix& class_means_mat,
                          const Vector& total_mean,
                          const std::vector<int>& counts) {
  const auto c = class_means_mat.rows();
  const auto d = class_means_mat.cols();
  if (static_cast<Eigen::Index>(counts.size()) != c)
    throw std::invalid_argument("between_scatter: counts size mismatch");
  Matrix sb = Matrix::Zero(d, d);
  for (Eigen::Index j = 0; j < c; ++j) {
    if (counts[j] <= 0)
      throw std::invalid_argument("between_scatter: non-positive class count");
    const Vector dev = class_means_mat.row(j).transpose() - total_mean;
    sb.noalias() += counts[j] * (dev * dev.transpose());
  }
  return SymMatrix(sb);
}

SymMatrix regularize_within(const SymMatrix& sw, double alpha, double lambda) {
  if (alpha < 0.0 || alpha > 1.0)
    throw std::invalid_argument("regularize_within: alpha must be in [0, 1]");
  if (lambda <= 0.0)
    throw std::invalid_argument("regularize_within: lambda must be positive");
  const auto d = sw.dim();
  Matrix reg = alpha * sw.mat();
  reg.diagonal() = sw.mat().diagonal();
  reg.diagonal().array() += lambda;
  return SymMatrix(reg);
}

ScatterPair compute_scatter(const LabeledBatch& batch, double alpha,
                            double lambda) {
  ClassMeans means = class_means(batch);
  SymMatrix sw = within_scatter(batch, means);
  SymMatrix sb =
      between_scatter(means.class_means, means.total_mean, means.counts);
  return ScatterPair{std::move(sb), regularize_within(sw, alpha, lambda),
                     std::move(means.class_means), std::move(means.total_mean),
                     std::move(means.counts), alpha, lambda};
}

}  // namespace rdlda

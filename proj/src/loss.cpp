#include "rdlda/loss.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace rdlda {

namespace {

struct EigContext {
  ScatterPair scatter;
  EigenSolution sol;  // ascending over all d directions
};

EigContext solve_batch(const LabeledBatch& batch, const LossConfig& cfg) {
  ScatterPair scatter =
      compute_scatter(batch, cfg.effective_alpha(), cfg.lambda);
  EigenSolution sol = generalized_eig(scatter.sb, scatter.sw_reg);
  return {std::move(scatter), std::move(sol)};
}

// Fills loss, k, valid_eigenvalues, selected_indices from an ascending
// full-spectrum solution.
void select_eigenvalues(const EigenSolution& sol, int class_count,
                        double epsilon, EigLossResult& out) {
  const auto d = sol.values.size();
  const Eigen::Index valid = std::min<Eigen::Index>(class_count - 1, d);
  out.valid_eigenvalues = Vector(valid);
  for (Eigen::Index j = 0; j < valid; ++j)
    out.valid_eigenvalues(j) = sol.values(d - 1 - j);  // descending

  const double vmin = out.valid_eigenvalues(valid - 1);
  double sum = 0.0;
  out.selected_indices.clear();
  for (Eigen::Index j = 0; j < valid; ++j) {
    if (out.valid_eigenvalues(j) < vmin + epsilon) {
      out.selected_indices.push_back(static_cast<int>(j));
      sum += out.valid_eigenvalues(j);
    }
  }
  out.k = static_cast<int>(out.selected_indices.size());
  out.loss = sum / out.k;
}

}  // namespace

EigLossResult eig_loss(const LabeledBatch& batch, const LossConfig& cfg) {
  if (cfg.epsilon <= 0.0)
    throw std::invalid_argument("eig_loss: epsilon must be positive");
  EigContext ctx = solve_batch(batch, cfg);
  EigLossResult out;
  select_eigenvalues(ctx.sol, batch.class_count, cfg.epsilon, out);
  return out;
}

EigLossResult eig_loss_grad(const LabeledBatch& batch, const LossConfig& cfg) {
  if (cfg.epsilon <= 0.0)
    throw std::invalid_argument("eig_loss: epsilon must be positive");
  EigContext ctx = solve_batch(batch, cfg);
  EigLossResult out;
  select_eigenvalues(ctx.sol, batch.class_count, cfg.epsilon, out);

  const auto n = batch.sample_count();
  const auto d = batch.dim();
  const double alpha = cfg.effective_alpha();
  const Matrix& h = batch.features;
  const Matrix& mu = ctx.scatter.class_means;

  // Degeneracy check: a selected eigenvalue nearly equal to an unselected
  // valid one makes the per-eigenvector derivative ill-defined; the mean is
  // still subdifferentiable, so warn and continue.
  const auto valid = out.valid_eigenvalues.size();
  for (int sel : out.selected_indices) {
    for (Eigen::Index j = 0; j < valid; ++j) {
      const bool selected =
          std::find(out.selected_indices.begin(), out.selected_indices.end(),
                    static_cast<int>(j)) != out.selected_indices.end();
      if (!selected &&
          std::abs(out.valid_eigenvalues(sel) - out.valid_eigenvalues(j)) <
              1e-8)
        out.degenerate_warning = true;
    }
  }

  // For eigenvalue v with sw-normalized eigenvector e (e^T S'_W e = 1):
  //   dv/dx_r = 2 a_j e - v [ 2 alpha ((x_r - mu_j)^T e) e
  //                           + 2 (1 - alpha) (e o e) o (x_r - mu_j) ]
  // with j the class of sample r and a_j = (mu_j - mu)^T e; the class-mean
  // and total-mean cross terms cancel because deviations sum to zero.
  out.grad_h = Matrix::Zero(n, d);
  for (int sel : out.selected_indices) {
    // valid index sel (descending) -> ascending full-spectrum column.
    const Eigen::Index col = ctx.sol.values.size() - 1 - sel;
    const double v = out.valid_eigenvalues(sel);
    const Vector e = ctx.sol.vectors.col(col);
    const Vector e_sq = e.cwiseProduct(e);
    Vector a(mu.rows());
    for (Eigen::Index j = 0; j < mu.rows(); ++j)
      a(j) = (mu.row(j).transpose() - ctx.scatter.total_mean).dot(e);

    for (Eigen::Index r = 0; r < n; ++r) {
      const int y = batch.labels[r];
      const Vector dev = h.row(r).transpose() - mu.row(y).transpose();
      const double proj = dev.dot(e);
      out.grad_h.row(r) +=
          (2.0 * a(y) * e - v * (2.0 * alpha * proj * e +
                                 2.0 * (1.0 - alpha) * e_sq.cwiseProduct(dev)))
              .transpose();
    }
  }
  out.grad_h /= static_cast<double>(out.k);
  return out;
}

CceResult cce_loss(const Matrix& logits, const std::vector<int>& labels) {
  const auto n = logits.rows();
  const auto c = logits.cols();
  if (static_cast<Eigen::Index>(labels.size()) != n)
    throw std::invalid_argument("cce_loss: label count mismatch");

  CceResult out;
  out.grad_logits = Matrix(n, c);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (labels[i] < 0 || labels[i] >= c)
      throw std::invalid_argument("cce_loss: label out of range");
    const double m = logits.row(i).maxCoeff();
    Vector shifted = (logits.row(i).array() - m).exp().matrix().transpose();
    const double z = shifted.sum();
    out.loss += -(logits(i, labels[i]) - m - std::log(z));
    out.grad_logits.row(i) = (shifted / z).transpose();
    out.grad_logits(i, labels[i]) -= 1.0;
  }
  out.loss /= static_cast<double>(n);
  out.grad_logits /= static_cast<double>(n);
  return out;
}

}  // namespace rdlda

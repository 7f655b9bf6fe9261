#pragma once

#include "rdlda/scatter.hpp"

namespace rdlda {

enum class Objective { kRdlda, kDlda, kCce };

struct LossConfig {
  double alpha = 0.5;     // within-class scatter off-diagonal scale, [0, 1]
  double lambda = 1e-3;   // diagonal ridge
  double epsilon = 1.0;   // selection margin above the smallest valid value
  Objective objective = Objective::kRdlda;

  double effective_alpha() const {
    return objective == Objective::kDlda ? 1.0 : alpha;
  }
};

/// Eigenvalue loss over the k eigenvalues within epsilon of the smallest
/// valid one. The loss is a value to MAXIMIZE; trainers negate it.
struct EigLossResult {
  double loss = 0.0;
  std::vector<int> selected_indices;  // into valid_eigenvalues
  int k = 0;
  Vector valid_eigenvalues;  // top c-1 generalized eigenvalues, descending
  Matrix grad_h;             // n x d ascent direction; empty unless requested
  bool degenerate_warning = false;
};

/// Loss and selection only (no gradient).
EigLossResult eig_loss(const LabeledBatch& batch, const LossConfig& cfg);

/// Loss plus the analytic gradient of the mean selected eigenvalue with
/// respect to every entry of the batch features. When a selected eigenvalue
/// sits within 1e-8 of an unselected neighbor, degenerate_warning is set and
/// the returned gradient is the subgradient of the mean.
EigLossResult eig_loss_grad(const LabeledBatch& batch, const LossConfig& cfg);

struct CceResult {
  double loss = 0.0;
  Matrix grad_logits;  // descent direction, (softmax - onehot)/n
};

/// Mean categorical cross entropy of logits against integer labels.
CceResult cce_loss(const Matrix& logits, const std::vector<int>& labels);

}  // namespace rdlda

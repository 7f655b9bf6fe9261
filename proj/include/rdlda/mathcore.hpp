#pragma once

#include "rdlda/types.hpp"

namespace rdlda {

/// Dense symmetric matrix. Symmetrized as (M + M^T)/2 on construction so the
/// stored entries satisfy entries(i,j) == entries(j,i) exactly.
class SymMatrix {
 public:
  explicit SymMatrix(const Matrix& m);
  SymMatrix(Eigen::Index dim, double diagonal);  // diagonal * I

  static SymMatrix identity(Eigen::Index dim) { return SymMatrix(dim, 1.0); }

  const Matrix& mat() const { return entries_; }
  Eigen::Index dim() const { return entries_.rows(); }
  double operator()(Eigen::Index i, Eigen::Index j) const {
    return entries_(i, j);
  }

 private:
  Matrix entries_;
};

/// Eigenvalues in ascending order with matched eigenvector columns.
/// Columns are orthonormal (or S'_W-orthonormal for the generalized problem)
/// and carry a deterministic sign: the largest-magnitude component of each
/// column is positive, ties broken by lowest index.
struct EigenSolution {
  Vector values;
  Matrix vectors;
};

/// Full symmetric eigendecomposition, ascending values.
EigenSolution sym_eig(const SymMatrix& a);

/// Lower-triangular L with L L^T == a. Throws std::runtime_error naming the
/// failing pivot index when a is not positive definite (pivot tolerance
/// 1e-12 * trace).
Matrix cholesky(const SymMatrix& a);

/// Solves sb e = v sw e for SPD sw via Cholesky whitening: eigenvalues of
/// L^{-1} sb L^{-T} with eigenvectors mapped back through L^{-T}, so every
/// returned column satisfies e^T sw e == 1. Eigenvalues within -1e-10 of
/// zero are clamped to 0.
EigenSolution generalized_eig(const SymMatrix& sb, const SymMatrix& sw);

/// Flips each column so its largest-magnitude entry is positive
/// (lowest-index tie-break). Used for all eigenvector outputs.
void apply_sign_convention(Matrix& vectors);

}  // namespace rdlda

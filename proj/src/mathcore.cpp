#include "rdlda/mathcore.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <stdexcept>
#include <string>

namespace rdlda {

SymMatrix::SymMatrix(const Matrix& m) {
  if (m.rows() != m.cols())
    throw std::invalid_argument("SymMatrix requires a square matrix");
  if (!m.allFinite())
    throw std::invalid_argument("SymMatrix rejects non-finite entries");
  entries_ = 0.5 * (m + m.transpose());
}

SymMatrix::SymMatrix(Eigen::Index dim, double diagonal) {
  if (dim <= 0) throw std::invalid_argument("SymMatrix dim must be positive");
  if (!std::isfinite(diagonal))
    throw std::invalid_argument("SymMatrix rejects non-finite entries");
  entries_ = diagonal * Matrix::Identity(dim, dim);
}

void apply_sign_convention(Matrix& vectors) {
  for (Eigen::Index j = 0; j < vectors.cols(); ++j) {
    Eigen::Index imax = 0;
    double vmax = std::abs(vectors(0, j));
    for (Eigen::Index i = 1; i < vectors.rows(); ++i) {
      const double v = std::abs(vectors(i, j));
      if (v > vmax) {
        vmax = v;
        imax = i;
      }
    }
    if (vectors(imax, j) < 0.0) vectors.col(j) = -vectors.col(j);
  }
}

EigenSolution sym_eig(const SymMatrix& a) {
  Eigen::SelfAdjointEigenSolver<Matrix> solver(a.mat());
  if (solver.info() != Eigen::Success)
    throw std::runtime_error("symmetric eigendecomposition failed to converge");
  EigenSolution sol;
  sol.values = solver.eigenvalues();  // ascending
  sol.vectors = solver.eigenvectors();
  apply_sign_convention(sol.vectors);
  return sol;
}

Matrix cholesky(const SymMatrix& a) {
  const Eigen::Index n = a.dim();
  const double tol = 1e-12 * std::abs(a.mat().trace());
  Matrix lower = Matrix::Zero(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    double pivot = a(j, j) - lower.row(j).head(j).squaredNorm();
    if (pivot <= tol)
      throw std::runtime_error("not positive definite: pivot " +
                               std::to_string(j) + " <= tolerance");
    lower(j, j) = std::sqrt(pivot);
    for (Eigen::Index i = j + 1; i < n; ++i) {
      double s = a(i, j) - lower.row(i).head(j).dot(lower.row(j).head(j));
      lower(i, j) = s / lower(j, j);
    }
  }
  return lower;
}

EigenSolution generalized_eig(const SymMatrix& sb, const SymMatrix& sw) {
  if (sb.dim() != sw.dim())
    throw std::invalid_argument("generalized_eig: dimension mismatch");
  const Matrix lower = cholesky(sw);
  const auto lt = lower.triangularView<Eigen::Lower>();

  // Whiten: B = L^{-1} sb L^{-T}, symmetric with the same generalized spectrum.
  Matrix whitened = lt.solve(sb.mat());
  whitened = lt.solve(whitened.transpose()).eval();
  EigenSolution inner = sym_eig(SymMatrix(whitened));

  EigenSolution sol;
  sol.values = inner.values;
  for (Eigen::Index i = 0; i < sol.values.size(); ++i) {
    if (sol.values(i) < 0.0 && sol.values(i) >= -1e-10) sol.values(i) = 0.0;
  }
  // Map back: e = L^{-T} y, giving e^T sw e = y^T y = 1.
  sol.vectors = lower.transpose()
                    .triangularView<Eigen::Upper>()
                    .solve(inner.vectors);
  apply_sign_convention(sol.vectors);
  return sol;
}

}  // namespace rdlda

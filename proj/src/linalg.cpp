#include "acsmc/linalg.hpp"

#include <cmath>
#include <string>

#include "acsmc/error.hpp"

namespace acsmc::linalg {

SymmetricEigen symeig(const ConstMatrixRef& m) {
  if (m.rows() != m.cols()) throw InvalidInput("symeig: matrix is not square");
  if (m.size() == 0) return {Vector(0), Matrix(0, 0)};
  Eigen::SelfAdjointEigenSolver<Matrix> solver(m);
  if (solver.info() != Eigen::Success) throw DecompositionError("symeig: eigensolver did not converge");
  return {solver.eigenvalues(), solver.eigenvectors()};
}

Matrix cholesky(const ConstMatrixRef& m) {
  if (m.rows() != m.cols()) throw InvalidInput("cholesky: matrix is not square");
  Eigen::LLT<Matrix> llt(m);
  if (llt.info() != Eigen::Success) throw DecompositionError("cholesky: matrix is not positive definite");
  return llt.matrixL();
}

bool is_positive_definite(const ConstMatrixRef& m) {
  if (m.rows() != m.cols()) return false;
  if (m.size() == 0) return true;
  Eigen::LLT<Matrix> llt(m);
  return llt.info() == Eigen::Success;
}

double logdet_spd(const ConstMatrixRef& m) {
  if (m.size() == 0) return 0.0;
  const Matrix l = cholesky(m);
  return 2.0 * l.diagonal().array().log().sum();
}

Matrix inverse_spd(const ConstMatrixRef& m) {
  if (m.size() == 0) return Matrix(0, 0);
  Eigen::LLT<Matrix> llt(m);
  if (llt.info() != Eigen::Success) throw DecompositionError("inverse_spd: matrix is not positive definite");
  return llt.solve(Matrix::Identity(m.rows(), m.cols()));
}

Matrix sqrt_psd(const ConstMatrixRef& m) {
  const auto eig = symeig(m);
  const Vector root = eig.values.cwiseMax(0.0).cwiseSqrt();
  return eig.vectors * root.asDiagonal() * eig.vectors.transpose();
}

Matrix symmetrize(const ConstMatrixRef& m) {
  return 0.5 * (m + m.transpose());
}

double max_abs(const ConstMatrixRef& m) {
  return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff();
}

void require_finite(const ConstMatrixRef& m, const char* what) {
  if (!m.allFinite()) throw InvalidInput(std::string(what) + ": non-finite entry");
}

}  // namespace acsmc::linalg

#pragma once

#include <Eigen/Dense>

namespace acsmc {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using VectorRef = Eigen::Ref<Vector>;
using ConstVectorRef = Eigen::Ref<const Vector>;
using ConstMatrixRef = Eigen::Ref<const Matrix>;

namespace linalg {

struct SymmetricEigen {
  Vector values;   // ascending
  Matrix vectors;  // columns are eigenvectors
};

/// Eigendecomposition of a symmetric matrix. Only the lower triangle is read.
SymmetricEigen symeig(const ConstMatrixRef& m);

/// Lower Cholesky factor. Throws DecompositionError when `m` is not SPD.
Matrix cholesky(const ConstMatrixRef& m);

/// True when `m` admits a Cholesky factorization.
bool is_positive_definite(const ConstMatrixRef& m);

/// log det of an SPD matrix via its Cholesky factor.
double logdet_spd(const ConstMatrixRef& m);

/// Inverse of an SPD matrix; throws DecompositionError when not SPD.
Matrix inverse_spd(const ConstMatrixRef& m);

/// Principal square root of a symmetric positive semidefinite matrix.
Matrix sqrt_psd(const ConstMatrixRef& m);

/// (M + M^T) / 2
Matrix symmetrize(const ConstMatrixRef& m);

/// Largest absolute entry.
double max_abs(const ConstMatrixRef& m);

/// Requires every entry finite.
void require_finite(const ConstMatrixRef& m, const char* what);

}  // namespace linalg
}  // namespace acsmc

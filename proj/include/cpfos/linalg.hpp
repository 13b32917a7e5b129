#pragma once

#include <Eigen/Dense>

#include "cpfos/tensor.hpp"

namespace cpfos {

/// Moore-Penrose pseudoinverse by SVD; singular values below rel_tol * sigma_max
/// are treated as zero.
template <typename Derived>
MatrixX<typename Derived::Scalar> pinv(const Eigen::MatrixBase<Derived>& a,
                                       typename Derived::RealScalar rel_tol = 1e-12) {
  using Scalar = typename Derived::Scalar;
  if (a.size() == 0) return MatrixX<Scalar>::Zero(a.cols(), a.rows());
  Eigen::BDCSVD<MatrixX<Scalar>> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& sv = svd.singularValues();
  const auto cutoff = rel_tol * sv.maxCoeff();
  VectorX<Scalar> inv(sv.size());
  for (Index i = 0; i < sv.size(); ++i) inv[i] = (sv[i] > cutoff && sv[i] > 0) ? Scalar(1) / sv[i] : Scalar(0);
  return svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();
}

/// Makes a numerically symmetric matrix exactly symmetric.
template <typename Derived>
MatrixX<typename Derived::Scalar> symmetrized(const Eigen::MatrixBase<Derived>& a) {
  return (a + a.transpose()) / 2;
}

}  // namespace cpfos

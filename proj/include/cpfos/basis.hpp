#pragma once

#include <array>

#include "cpfos/cp_als.hpp"
#include "cpfos/tensor.hpp"

namespace cpfos {

using SpatialDims = std::array<Index, 3>;

/// Spatial basis of an order-4 CP model (three spatial modes, subjects last).
/// loading is L = diag(lambda) * khatri_rao({A3, A2, A1})^T, R x Nv, so that the
/// mode-4 unfolding satisfies Y ~= G * L with G the subject factor.
/// projector is P = pinv(L), Nv x R.
struct BasisMaps {
  Matrix loading;
  Matrix projector;
  SpatialDims spatial_dims{};

  Index rank() const { return loading.rows(); }
  Index voxels() const { return loading.cols(); }
};

BasisMaps build_basis(const CpModel& model);

/// Builds the projector for an explicit loading matrix.
BasisMaps basis_from_loading(Matrix loading, SpatialDims spatial_dims);

/// Y * P: N x Nv voxel-space rows to N x R basis coordinates.
Matrix project(const Matrix& y, const BasisMaps& basis);

/// coeff * L: p x R basis coefficients to p x Nv voxel maps.
Matrix backproject(const Matrix& coeff, const BasisMaps& basis);

/// Reshapes an Nv-vector into a p1 x p2 x p3 volume.
Tensor to_volume(const Vector& map, const SpatialDims& dims);

}  // namespace cpfos

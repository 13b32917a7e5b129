#include "cpfos/basis.hpp"

#include <string>

#include "cpfos/linalg.hpp"

namespace cpfos {

BasisMaps build_basis(const CpModel& model) {
  if (model.order() != 4)
    throw InvalidArgument("spatial basis needs an order-4 CP model, got order " + std::to_string(model.order()));
  const auto& f = model.factors;
  Matrix loading = model.lambda.asDiagonal() * khatri_rao<double>({f[2], f[1], f[0]}).transpose();
  return basis_from_loading(std::move(loading), {f[0].rows(), f[1].rows(), f[2].rows()});
}

BasisMaps basis_from_loading(Matrix loading, SpatialDims spatial_dims) {
  if (loading.cols() != spatial_dims[0] * spatial_dims[1] * spatial_dims[2])
    throw InvalidArgument("loading matrix has " + std::to_string(loading.cols()) + " columns but the volume has " +
                          std::to_string(spatial_dims[0] * spatial_dims[1] * spatial_dims[2]) + " voxels");
  BasisMaps b;
  b.projector = pinv(loading);
  b.loading = std::move(loading);
  b.spatial_dims = spatial_dims;
  return b;
}

Matrix project(const Matrix& y, const BasisMaps& basis) {
  if (y.cols() != basis.voxels())
    throw InvalidArgument("cannot project data with " + std::to_string(y.cols()) + " voxels onto a basis of " +
                          std::to_string(basis.voxels()));
  return y * basis.projector;
}

Matrix backproject(const Matrix& coeff, const BasisMaps& basis) {
  if (coeff.cols() != basis.rank())
    throw InvalidArgument("coefficients have " + std::to_string(coeff.cols()) + " columns, basis rank is " +
                          std::to_string(basis.rank()));
  return coeff * basis.loading;
}

Tensor to_volume(const Vector& map, const SpatialDims& dims) {
  return Tensor({dims[0], dims[1], dims[2]}, map);
}

}  // namespace cpfos

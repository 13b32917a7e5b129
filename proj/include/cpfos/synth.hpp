#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cpfos/basis.hpp"
#include "cpfos/tensor.hpp"

namespace cpfos {

enum class CovariateKind { Intercept, Binary, Continuous };

/// Ground-truth generative model: random unit-norm spatial factors, weights
/// log-uniform in [1, 10], G = Z * gamma_star + N(0, sd_G^2) and
/// Y_(4) = G * diag(lambda) * khatri_rao({A3, A2, A1})^T + N(0, sd_V^2).
struct SynthSpec {
  SpatialDims spatial_dims{8, 8, 8};
  Index subjects = 40;
  Index rank = 3;
  // Binary columns alternate 0/1 across subjects; continuous columns are standard normal.
  std::vector<CovariateKind> design{CovariateKind::Intercept, CovariateKind::Binary};
  Matrix gamma_star;  // design.size() x rank
  double noise_subject_sd = 0;
  double noise_voxel_sd = 0;
  std::uint64_t seed = 0;

  void validate() const;
};

struct SynthTruth {
  std::vector<Matrix> spatial_factors;  // A1, A2, A3 with unit-norm columns
  Vector lambda;
  Matrix gamma_star;  // p x R
  Matrix g;           // N x R subject scores including basis-space noise
  Matrix loading;     // R x Nv

  /// Voxel-space coefficient maps gamma_star * L, p x Nv.
  Matrix gamma() const { return gamma_star * loading; }
};

struct SynthData {
  Tensor y;  // p1 x p2 x p3 x N
  Matrix z;  // N x p
  std::vector<std::string> column_names;
  SynthTruth truth;
};

SynthData generate(const SynthSpec& spec);

}  // namespace cpfos

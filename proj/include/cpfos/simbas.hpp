#pragma once

#include <array>
#include <functional>
#include <string>
#include <vector>

#include "cpfos/basis.hpp"
#include "cpfos/bayes_glm.hpp"
#include "cpfos/tensor.hpp"

namespace cpfos {

using RowVector = Eigen::RowVectorXd;
using VoxelMask = Eigen::Array<bool, Eigen::Dynamic, 1>;
using Voxel = std::array<Index, 3>;

/// Group-level contrast C = c' gamma.
class ContrastSpec {
 public:
  ContrastSpec(Vector weights, std::string name);

  /// Unit weight on covariate j.
  static ContrastSpec select(Index p, Index j, std::string name);

  const Vector& weights() const { return weights_; }
  const std::string& name() const { return name_; }

 private:
  Vector weights_;
  std::string name_;
};

/// Fills `out` (1 x Nv) with contrast sample m.
using SampleSource = std::function<void(Index m, RowVector& out)>;

/// Streams C^(m) = c' gamma*_m L for every retained draw.
SampleSource contrast_source(const McmcChain& chain, const BasisMaps& basis, const ContrastSpec& c);

/// Dense M' x Nv matrix of contrast samples; intended for small problems.
Matrix contrast_samples(const McmcChain& chain, const BasisMaps& basis, const ContrastSpec& c);

struct ContrastMoments {
  Vector mean;
  Vector sd;  // M' - 1 denominator
};

/// One streaming pass with Welford updates.
ContrastMoments contrast_moments(Index draws, Index voxels, const SampleSource& source);

struct SimBasResult {
  Vector mean_map;
  Vector std_map;
  double std_floor = 0;  // s(v) = max(std_map(v), std_floor)
  Vector z_quantiles;    // z^(m), ascending
  Vector psimbas_map;
  VoxelMask flags;
  VoxelMask mask;
  double alpha = 0.01;

  Index draws() const { return z_quantiles.size(); }
  /// |C_hat(v)| / s(v).
  double statistic(Index v) const;
  /// Order statistic q with C_hat(v) +- q s(v) the joint band at level alpha:
  /// z_(k) for the smallest k with (M' - k) / M' < alpha.
  double band_quantile(double level) const;
  /// Voxels whose joint band at the given level excludes zero (in-mask only).
  VoxelMask band_excludes_zero(double level) const;
  /// In-mask voxels with P_SimBas below the given level.
  VoxelMask flags_at(double level) const;
};

/// P_SimBas(v) = #{m : |C_hat(v)| / s(v) <= z^(m)} / M' with
/// z^(m) = max over in-mask v of |C^(m)(v) - C_hat(v)| / s(v).
/// Out-of-mask voxels get P = 1 and no flag. An empty mask means all voxels.
SimBasResult simbas(const Vector& mean_map, const Vector& std_map, Index draws, const SampleSource& source,
                    double alpha, const VoxelMask& mask = {}, int threads = 1);

SimBasResult simbas(const Vector& mean_map, const Vector& std_map, const Matrix& samples, double alpha,
                    const VoxelMask& mask = {});

/// Moments and SimBaS for a contrast of the chain, streaming over draws.
SimBasResult simbas(const McmcChain& chain, const BasisMaps& basis, const ContrastSpec& c, double alpha,
                    const VoxelMask& mask = {}, int threads = 1);

/// Recomputes z^(m), P_SimBas and flags of `result` restricted to `mask`.
SimBasResult apply_mask(const SimBasResult& result, const VoxelMask& mask, const SampleSource& source,
                        int threads = 1);

struct Cluster {
  std::vector<Voxel> voxels;  // ascending linear index
  Index size = 0;
  Voxel peak{};  // voxel with the largest |mean|
  double peak_value = 0;
};

enum class Connectivity { Face = 6, Full = 26 };

/// Connected components of flagged voxels with at least min_size members,
/// largest first (ties by smallest linear index). Peaks come from mean_map.
std::vector<Cluster> extract_clusters(const VoxelMask& flags, const SpatialDims& dims, Index min_size,
                                      Connectivity connectivity, const Vector& mean_map);

}  // namespace cpfos

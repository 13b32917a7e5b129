#include "cpfos/simbas.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <string>

#include "cpfos/parallel.hpp"

namespace cpfos {

namespace {

constexpr double kStdFloorRatio = 1e-12;

VoxelMask resolve_mask(const VoxelMask& mask, Index voxels) {
  if (mask.size() == 0) return VoxelMask::Constant(voxels, true);
  if (mask.size() != voxels)
    throw InvalidArgument("mask has " + std::to_string(mask.size()) + " voxels, maps have " +
                          std::to_string(voxels));
  if (!mask.any()) throw DegeneratePosterior("mask contains no voxels");
  return mask;
}

// Fills z^(m), P_SimBas and flags given moments and floor.
void evaluate(SimBasResult& r, Index draws, const SampleSource& source, int threads) {
  const Index nv = r.mean_map.size();
  Vector scale(nv);
  for (Index v = 0; v < nv; ++v) scale[v] = std::max(r.std_map[v], r.std_floor);

  r.z_quantiles.resize(draws);
  constexpr int kChunk = 64;
  const int chunks = static_cast<int>((draws + kChunk - 1) / kChunk);
  parallel_for(chunks, threads, [&](int chunk) {
    RowVector sample(nv);
    const Index hi = std::min<Index>(draws, Index{chunk + 1} * kChunk);
    for (Index m = Index{chunk} * kChunk; m < hi; ++m) {
      source(m, sample);
      double z = 0;
      for (Index v = 0; v < nv; ++v)
        if (r.mask[v]) z = std::max(z, std::abs(sample[v] - r.mean_map[v]) / scale[v]);
      r.z_quantiles[m] = z;
    }
  });
  std::sort(r.z_quantiles.begin(), r.z_quantiles.end());

  const auto z_begin = r.z_quantiles.begin(), z_end = r.z_quantiles.end();
  r.psimbas_map.resize(nv);
  for (Index v = 0; v < nv; ++v) {
    if (!r.mask[v]) {
      r.psimbas_map[v] = 1;
      continue;
    }
    const auto at_least = z_end - std::lower_bound(z_begin, z_end, r.statistic(v));
    r.psimbas_map[v] = static_cast<double>(at_least) / static_cast<double>(draws);
  }
  r.flags = r.flags_at(r.alpha);
}

void check_alpha(double alpha) {
  if (!(alpha > 0 && alpha < 1)) throw InvalidArgument("alpha must lie in (0, 1)");
}

}  // namespace

ContrastSpec::ContrastSpec(Vector weights, std::string name) : weights_(std::move(weights)), name_(std::move(name)) {
  if (weights_.size() == 0 || weights_.isZero(0)) throw InvalidArgument("contrast weights are all zero");
  if (!weights_.allFinite()) throw InvalidArgument("contrast weights must be finite");
}

ContrastSpec ContrastSpec::select(Index p, Index j, std::string name) {
  if (j < 0 || j >= p) throw InvalidArgument("contrast covariate index out of range");
  return ContrastSpec(Vector::Unit(p, j), std::move(name));
}

SampleSource contrast_source(const McmcChain& chain, const BasisMaps& basis, const ContrastSpec& c) {
  if (chain.size() == 0) throw InvalidArgument("chain holds no draws");
  if (chain.rank() != basis.rank())
    throw InvalidArgument("chain rank " + std::to_string(chain.rank()) + " does not match basis rank " +
                          std::to_string(basis.rank()));
  if (chain.covariates() != c.weights().size())
    throw InvalidArgument("contrast has " + std::to_string(c.weights().size()) + " weights for " +
                          std::to_string(chain.covariates()) + " covariates");
  return [&chain, &basis, w = c.weights()](Index m, RowVector& out) {
    const RowVector coeff = w.transpose() * chain.gamma_star[static_cast<std::size_t>(m)];
    out.noalias() = coeff * basis.loading;
  };
}

Matrix contrast_samples(const McmcChain& chain, const BasisMaps& basis, const ContrastSpec& c) {
  const SampleSource source = contrast_source(chain, basis, c);
  Matrix out(chain.size(), basis.voxels());
  RowVector row(basis.voxels());
  for (Index m = 0; m < chain.size(); ++m) {
    source(m, row);
    out.row(m) = row;
  }
  return out;
}

ContrastMoments contrast_moments(Index draws, Index voxels, const SampleSource& source) {
  if (draws < 2) throw InvalidArgument("posterior moments need at least two draws");
  Vector mean = Vector::Zero(voxels), m2 = Vector::Zero(voxels);
  RowVector sample(voxels);
  for (Index m = 0; m < draws; ++m) {
    source(m, sample);
    const Vector delta = sample.transpose() - mean;
    mean += delta / static_cast<double>(m + 1);
    m2.array() += delta.array() * (sample.transpose() - mean).array();
  }
  return {mean, (m2 / static_cast<double>(draws - 1)).cwiseMax(0.0).cwiseSqrt()};
}

double SimBasResult::statistic(Index v) const {
  return std::abs(mean_map[v]) / std::max(std_map[v], std_floor);
}

double SimBasResult::band_quantile(double level) const {
  check_alpha(level);
  const Index m = draws();
  Index k = 1;
  while (static_cast<double>(m - k) / static_cast<double>(m) >= level) ++k;
  return z_quantiles[k - 1];
}

VoxelMask SimBasResult::band_excludes_zero(double level) const {
  const double q = band_quantile(level);
  VoxelMask out(mean_map.size());
  for (Index v = 0; v < mean_map.size(); ++v) out[v] = mask[v] && statistic(v) > q;
  return out;
}

VoxelMask SimBasResult::flags_at(double level) const {
  check_alpha(level);
  return mask && (psimbas_map.array() < level);
}

SimBasResult simbas(const Vector& mean_map, const Vector& std_map, Index draws, const SampleSource& source,
                    double alpha, const VoxelMask& mask, int threads) {
  check_alpha(alpha);
  if (draws < 2) throw InvalidArgument("SimBaS needs at least two draws");
  if (mean_map.size() != std_map.size() || mean_map.size() == 0)
    throw InvalidArgument("mean and std maps must be nonempty and of equal length");
  if ((std_map.array() < 0).any() || !std_map.allFinite() || !mean_map.allFinite())
    throw InvalidData("posterior maps must be finite with nonnegative std");

  SimBasResult r;
  r.mean_map = mean_map;
  r.std_map = std_map;
  r.alpha = alpha;
  r.mask = resolve_mask(mask, mean_map.size());
  double peak = 0;
  for (Index v = 0; v < std_map.size(); ++v)
    if (r.mask[v]) peak = std::max(peak, std_map[v]);
  if (!(peak > 0)) throw DegeneratePosterior("posterior std is zero at every voxel");
  r.std_floor = kStdFloorRatio * peak;
  evaluate(r, draws, source, threads);
  return r;
}

SimBasResult simbas(const Vector& mean_map, const Vector& std_map, const Matrix& samples, double alpha,
                    const VoxelMask& mask) {
  if (samples.cols() != mean_map.size())
    throw InvalidArgument("samples have " + std::to_string(samples.cols()) + " voxels, maps have " +
                          std::to_string(mean_map.size()));
  return simbas(mean_map, std_map, samples.rows(), [&](Index m, RowVector& out) { out = samples.row(m); },
                alpha, mask);
}

SimBasResult simbas(const McmcChain& chain, const BasisMaps& basis, const ContrastSpec& c, double alpha,
                    const VoxelMask& mask, int threads) {
  const SampleSource source = contrast_source(chain, basis, c);
  const ContrastMoments mom = contrast_moments(chain.size(), basis.voxels(), source);
  return simbas(mom.mean, mom.sd, chain.size(), source, alpha, mask, threads);
}

SimBasResult apply_mask(const SimBasResult& result, const VoxelMask& mask, const SampleSource& source, int threads) {
  VoxelMask resolved = resolve_mask(mask, result.mean_map.size());
  if (mask.size() == 0) resolved = result.mask;
  return simbas(result.mean_map, result.std_map, result.draws(), source, result.alpha, resolved && result.mask,
                threads);
}

std::vector<Cluster> extract_clusters(const VoxelMask& flags, const SpatialDims& dims, Index min_size,
                                      Connectivity connectivity, const Vector& mean_map) {
  const Index nx = dims[0], ny = dims[1], nz = dims[2], nv = nx * ny * nz;
  if (flags.size() != nv)
    throw InvalidArgument("flag map has " + std::to_string(flags.size()) + " voxels, volume " +
                          dims_string(Dims{nx, ny, nz}) + " has " + std::to_string(nv));
  if (mean_map.size() != nv) throw InvalidArgument("mean map does not match the volume");
  if (min_size < 1) throw InvalidArgument("minimum cluster size must be at least 1");

  std::vector<Voxel> offsets;
  for (Index dz = -1; dz <= 1; ++dz)
    for (Index dy = -1; dy <= 1; ++dy)
      for (Index dx = -1; dx <= 1; ++dx) {
        const Index manhattan = std::abs(dx) + std::abs(dy) + std::abs(dz);
        if (manhattan == 0 || (connectivity == Connectivity::Face && manhattan > 1)) continue;
        offsets.push_back({dx, dy, dz});
      }

  std::vector<Cluster> clusters;
  std::vector<bool> visited(static_cast<std::size_t>(nv), false);
  std::vector<Index> members;
  std::deque<Index> queue;
  for (Index start = 0; start < nv; ++start) {
    if (!flags[start] || visited[static_cast<std::size_t>(start)]) continue;
    members.clear();
    visited[static_cast<std::size_t>(start)] = true;
    queue.push_back(start);
    while (!queue.empty()) {
      const Index v = queue.front();
      queue.pop_front();
      members.push_back(v);
      const Index x = v % nx, y = (v / nx) % ny, z = v / (nx * ny);
      for (const auto& [dx, dy, dz] : offsets) {
        const Index a = x + dx, b = y + dy, c = z + dz;
        if (a < 0 || a >= nx || b < 0 || b >= ny || c < 0 || c >= nz) continue;
        const Index w = a + nx * (b + ny * c);
        if (flags[w] && !visited[static_cast<std::size_t>(w)]) {
          visited[static_cast<std::size_t>(w)] = true;
          queue.push_back(w);
        }
      }
    }
    if (static_cast<Index>(members.size()) < min_size) continue;

    std::sort(members.begin(), members.end());
    Cluster cl;
    cl.size = static_cast<Index>(members.size());
    Index peak = members.front();
    for (Index v : members) {
      cl.voxels.push_back({v % nx, (v / nx) % ny, v / (nx * ny)});
      if (std::abs(mean_map[v]) > std::abs(mean_map[peak])) peak = v;
    }
    cl.peak = {peak % nx, (peak / nx) % ny, peak / (nx * ny)};
    cl.peak_value = mean_map[peak];
    clusters.push_back(std::move(cl));
  }
  // Discovery order is by smallest linear index, so a stable sort settles ties.
  std::stable_sort(clusters.begin(), clusters.end(),
                   [](const Cluster& a, const Cluster& b) { return a.size > b.size; });
  return clusters;
}

}  // namespace cpfos

#include "cpfos/synth.hpp"

#include <cmath>
#include <string>

#include "cpfos/random.hpp"

namespace cpfos {

void SynthSpec::validate() const {
  for (Index d : spatial_dims)
    if (d < 1) throw InvalidArgument("spatial dims must be positive");
  if (subjects < 1) throw InvalidArgument("need at least one subject");
  if (rank < 1) throw InvalidArgument("rank must be at least 1");
  if (design.empty()) throw InvalidArgument("design needs at least one column");
  if (gamma_star.rows() != static_cast<Index>(design.size()) || gamma_star.cols() != rank)
    throw InvalidArgument("gamma_star must be " + std::to_string(design.size()) + " x " + std::to_string(rank));
  if (!(noise_subject_sd >= 0) || !(noise_voxel_sd >= 0)) throw InvalidArgument("noise sds must be nonnegative");
}

SynthData generate(const SynthSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);
  const Index n = spec.subjects, rank = spec.rank;

  SynthData out;
  SynthTruth& truth = out.truth;
  for (Index d : spec.spatial_dims) {
    Matrix a(d, rank);
    for (Index r = 0; r < rank; ++r)
      for (Index i = 0; i < d; ++i) a(i, r) = rng.normal();
    a.colwise().normalize();
    truth.spatial_factors.push_back(std::move(a));
  }
  truth.lambda.resize(rank);
  for (Index r = 0; r < rank; ++r) truth.lambda[r] = std::pow(10.0, rng.uniform());

  const Index p = static_cast<Index>(spec.design.size());
  out.z.resize(n, p);
  int binary = 0, continuous = 0;
  for (Index j = 0; j < p; ++j) {
    switch (spec.design[static_cast<std::size_t>(j)]) {
      case CovariateKind::Intercept:
        out.z.col(j).setOnes();
        out.column_names.push_back("intercept");
        break;
      case CovariateKind::Binary:
        for (Index i = 0; i < n; ++i) out.z(i, j) = static_cast<double>(i % 2);
        out.column_names.push_back("binary" + std::to_string(++binary));
        break;
      case CovariateKind::Continuous:
        for (Index i = 0; i < n; ++i) out.z(i, j) = rng.normal();
        out.column_names.push_back("continuous" + std::to_string(++continuous));
        break;
    }
  }

  truth.gamma_star = spec.gamma_star;
  truth.g = out.z * spec.gamma_star;
  if (spec.noise_subject_sd > 0)
    for (Index r = 0; r < rank; ++r)
      for (Index i = 0; i < n; ++i) truth.g(i, r) += spec.noise_subject_sd * rng.normal();

  const auto& f = truth.spatial_factors;
  truth.loading = truth.lambda.asDiagonal() * khatri_rao<double>({f[2], f[1], f[0]}).transpose();
  out.y = fold(truth.g * truth.loading, 3,
               {spec.spatial_dims[0], spec.spatial_dims[1], spec.spatial_dims[2], n});
  if (spec.noise_voxel_sd > 0)
    for (auto& v : out.y.values()) v += spec.noise_voxel_sd * rng.normal();
  return out;
}

}  // namespace cpfos

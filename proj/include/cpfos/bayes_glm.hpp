#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "cpfos/random.hpp"
#include "cpfos/tensor.hpp"

namespace cpfos {

/// Conjugate prior for G = Z * gamma + E with rows of E ~ N(0, Sigma):
///   gamma | Sigma ~ MN(g0, L0^{-1}, Sigma),  Sigma ~ IW(V0, nu0).
struct PriorSpec {
  Matrix g0;  // p x R
  Matrix L0;  // p x p row precision, symmetric PSD
  Matrix V0;  // R x R scale, SPD
  double nu0 = 0;

  /// g0 = 0, L0 = 1e-6 I, V0 = I, nu0 = R + 2.
  static PriorSpec weak(Index p, Index rank);

  void validate(Index p, Index rank) const;
};

/// Scalar hyperparameters that expand to a PriorSpec for any (p, R):
/// g0 = 0, L0 = precision * I_p, V0 = scale * I_R, nu0 = R + dof_offset.
struct PriorSettings {
  double precision = 1e-6;
  double scale = 1.0;
  double dof_offset = 2.0;

  PriorSpec make(Index p, Index rank) const;
};

struct PosteriorParams {
  Matrix gn;  // p x R
  Matrix Ln;  // p x p
  Matrix Vn;  // R x R
  double nun = 0;
};

struct ChainSettings {
  int n_total = 2000;
  int burn_in = 500;
  int thin = 1;
  std::uint64_t seed = 0;

  void validate() const;
  int retained() const { return (n_total - burn_in) / thin; }
};

struct McmcChain {
  std::vector<Matrix> gamma_star;  // M' draws, p x R each
  std::vector<Matrix> sigma;       // M' draws, R x R each
  int n_total = 0;
  int burn_in = 0;
  int thin = 1;
  std::uint64_t seed = 0;

  Index size() const { return static_cast<Index>(gamma_star.size()); }
  Index covariates() const { return gamma_star.empty() ? 0 : gamma_star.front().rows(); }
  Index rank() const { return gamma_star.empty() ? 0 : gamma_star.front().cols(); }

  Matrix posterior_mean() const;
  Matrix posterior_sd() const;
};

/// Closed-form posterior:
///   Ln = Z'Z + L0,  gn = Ln^{-1} (Z'G + L0 g0),  nun = nu0 + N,
///   Vn = V0 + (G - Z gn)'(G - Z gn) + (gn - g0)' L0 (gn - g0).
/// Throws SingularDesign when Ln has condition number above 1e12; the message
/// names the near-null combination of design columns (column_names when given).
PosteriorParams compute_posterior_params(const Matrix& g, const Matrix& z, const PriorSpec& prior,
                                         std::span<const std::string> column_names = {});

/// Inverse-Wishart(V, nu) draw via the Bartlett decomposition of Wishart(V^{-1}, nu).
/// Mean is V / (nu - R - 1).
Matrix sample_inverse_wishart(const Matrix& v, double nu, Rng& rng);

/// M + chol(row_cov) * Xi * chol(col_cov)' with Xi standard normal.
Matrix sample_matrix_normal(const Matrix& mean, const Matrix& row_cov, const Matrix& col_cov, Rng& rng);

/// Exact joint posterior draws: Sigma ~ IW(Vn, nun), then gamma ~ MN(gn, Ln^{-1}, Sigma).
/// Every iteration is drawn; iterations after burn_in are kept every thin-th one.
McmcChain run_sampler(const Matrix& g, const Matrix& z, const PriorSpec& prior, const ChainSettings& settings,
                      std::span<const std::string> column_names = {});

}  // namespace cpfos

#pragma once

#include <cstdint>
#include <vector>

#include "cpfos/tensor.hpp"

namespace cpfos {

struct AlsConfig {
  enum class Init { RandomUniform, Hosvd };

  int max_iters = 500;
  // Stop once the relative residual changes by less than tol times its previous
  // value, or reaches 1e-14.
  double tol = 1e-8;
  Init init = Init::Hosvd;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Weighted CP model [[lambda; A_0, ..., A_{K-1}]] with unit-norm factor columns.
/// Components are ordered by decreasing lambda.
struct CpModel {
  Vector lambda;
  std::vector<Matrix> factors;
  // Relative reconstruction error ||X - X_hat||_F / ||X||_F of the final model.
  double fit = 1.0;
  int iterations = 0;
  bool converged = false;
  // Relative reconstruction error after each sweep.
  std::vector<double> fit_trace;

  Index rank() const { return lambda.size(); }
  int order() const { return static_cast<int>(factors.size()); }
  Dims dims() const;
  Tensor reconstruct() const { return reconstruct_cp(lambda, factors); }
};

/// Rank-R CP decomposition by alternating least squares.
CpModel cp_als(const Tensor& t, Index rank, const AlsConfig& cfg = {});

/// ||t - reconstruct(model)||_F / ||t||_F; zero for a zero residual.
double cp_fit(const CpModel& model, const Tensor& t);

/// Squared Frobenius norm of t - [[lambda; factors]] without materializing the model.
double cp_residual_squared(const Tensor& t, const Vector& lambda, const std::vector<Matrix>& factors);

/// Matricized tensor times Khatri-Rao product: X_(n) * khatri_rao(reverse(factors without n)).
Matrix mttkrp(const Tensor& t, const std::vector<Matrix>& factors, int mode);

/// Sorts components by decreasing lambda and fixes signs so the largest-magnitude
/// entry of every column in modes 0..K-2 is positive; flips are compensated in
/// the last mode, so the reconstruction is unchanged.
void canonicalize(CpModel& model);

}  // namespace cpfos

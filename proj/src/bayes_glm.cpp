#include "cpfos/bayes_glm.hpp"

#include <cmath>
#include <iomanip>
#include <sstream>
#include <string>

#include "cpfos/linalg.hpp"

namespace cpfos {

namespace {

constexpr double kMaxCondition = 1e12;

bool nearly_symmetric(const Matrix& a) {
  const double scale = std::max(1.0, a.cwiseAbs().maxCoeff());
  return (a - a.transpose()).cwiseAbs().maxCoeff() <= 1e-12 * scale;
}

Matrix lower_cholesky(const Matrix& a, const char* what) {
  Eigen::LLT<Matrix> llt(a);
  if (llt.info() != Eigen::Success) throw InvalidArgument(std::string(what) + " is not positive definite");
  return llt.matrixL();
}

Matrix standard_normal(Index rows, Index cols, Rng& rng) {
  Matrix xi(rows, cols);
  for (Index j = 0; j < cols; ++j)
    for (Index i = 0; i < rows; ++i) xi(i, j) = rng.normal();
  return xi;
}

// Inverse-Wishart draw given the lower Cholesky factor of the scale matrix.
Matrix inverse_wishart_from_chol(const Matrix& scale_chol, double nu, Rng& rng) {
  const Index r = scale_chol.rows();
  Matrix bartlett = Matrix::Zero(r, r);
  for (Index i = 0; i < r; ++i) {
    bartlett(i, i) = std::sqrt(rng.chi_squared(nu - static_cast<double>(i)));
    for (Index j = 0; j < i; ++j) bartlett(i, j) = rng.normal();
  }
  // With V = U U', W = U^{-T} A A' U^{-1} ~ Wishart(V^{-1}, nu) and
  // W^{-1} = T' T where T = A^{-1} U'.
  const Matrix t = bartlett.triangularView<Eigen::Lower>().solve(Matrix(scale_chol.transpose()));
  return symmetrized(t.transpose() * t);
}

Matrix matrix_normal_from_chol(const Matrix& mean, const Matrix& row_chol, const Matrix& col_chol, Rng& rng) {
  const Matrix xi = standard_normal(mean.rows(), mean.cols(), rng);
  return mean + row_chol.triangularView<Eigen::Lower>() * xi * col_chol.transpose().triangularView<Eigen::Upper>();
}

std::string describe_combination(const Vector& direction, std::span<const std::string> names) {
  std::ostringstream os;
  os << std::setprecision(3);
  bool first = true;
  const double peak = direction.cwiseAbs().maxCoeff();
  for (Index j = 0; j < direction.size(); ++j) {
    if (std::abs(direction[j]) < 1e-3 * peak) continue;
    os << (first ? "" : " + ") << direction[j] << "*";
    if (static_cast<std::size_t>(j) < names.size())
      os << names[static_cast<std::size_t>(j)];
    else
      os << "column " << j;
    first = false;
  }
  return os.str();
}

}  // namespace

PriorSpec PriorSpec::weak(Index p, Index rank) { return PriorSettings{}.make(p, rank); }

PriorSpec PriorSettings::make(Index p, Index rank) const {
  return {Matrix::Zero(p, rank), precision * Matrix::Identity(p, p), scale * Matrix::Identity(rank, rank),
          static_cast<double>(rank) + dof_offset};
}

void PriorSpec::validate(Index p, Index rank) const {
  if (g0.rows() != p || g0.cols() != rank)
    throw InvalidArgument("prior mean g0 must be " + std::to_string(p) + "x" + std::to_string(rank));
  if (L0.rows() != p || L0.cols() != p) throw InvalidArgument("prior precision L0 must be p x p");
  if (V0.rows() != rank || V0.cols() != rank) throw InvalidArgument("prior scale V0 must be R x R");
  if (!nearly_symmetric(L0)) throw InvalidArgument("prior precision L0 is not symmetric");
  if (!nearly_symmetric(V0)) throw InvalidArgument("prior scale V0 is not symmetric");
  if (!(nu0 > static_cast<double>(rank) - 1)) throw InvalidArgument("prior degrees of freedom must exceed R - 1");
  lower_cholesky(V0, "prior scale V0");
}

void ChainSettings::validate() const {
  if (burn_in < 0) throw InvalidArgument("burn-in must be nonnegative");
  if (thin < 1) throw InvalidArgument("thinning interval must be at least 1");
  if (n_total <= burn_in) throw InvalidArgument("total iterations must exceed burn-in");
  if (retained() < 1) throw InvalidArgument("chain settings retain no samples");
}

Matrix McmcChain::posterior_mean() const {
  if (gamma_star.empty()) throw InvalidArgument("empty chain");
  Matrix mean = Matrix::Zero(covariates(), rank());
  for (const auto& g : gamma_star) mean += g;
  return mean / static_cast<double>(size());
}

Matrix McmcChain::posterior_sd() const {
  if (size() < 2) throw InvalidArgument("posterior sd needs at least two draws");
  const Matrix mean = posterior_mean();
  Matrix ss = Matrix::Zero(covariates(), rank());
  for (const auto& g : gamma_star) ss.array() += (g - mean).array().square();
  return (ss / static_cast<double>(size() - 1)).cwiseSqrt();
}

PosteriorParams compute_posterior_params(const Matrix& g, const Matrix& z, const PriorSpec& prior,
                                         std::span<const std::string> column_names) {
  if (g.rows() != z.rows() || g.rows() < 1)
    throw InvalidArgument("response has " + std::to_string(g.rows()) + " rows but design has " +
                          std::to_string(z.rows()));
  if (!g.allFinite() || !z.allFinite()) throw InvalidData("regression inputs contain non-finite values");
  prior.validate(z.cols(), g.cols());

  PosteriorParams post;
  post.Ln = symmetrized(z.transpose() * z + prior.L0);

  Eigen::SelfAdjointEigenSolver<Matrix> eig(post.Ln);
  const double lo = eig.eigenvalues().minCoeff(), hi = eig.eigenvalues().maxCoeff();
  if (!(lo > 0) || hi / lo > kMaxCondition)
    throw SingularDesign("posterior precision is numerically singular (condition " +
                         (lo > 0 ? std::to_string(hi / lo) : std::string("inf")) +
                         "); near-null design combination: " +
                         describe_combination(eig.eigenvectors().col(0), column_names));

  Eigen::LLT<Matrix> llt(post.Ln);
  post.gn = llt.solve(z.transpose() * g + prior.L0 * prior.g0);
  post.nun = prior.nu0 + static_cast<double>(g.rows());
  const Matrix resid = g - z * post.gn;
  const Matrix shift = post.gn - prior.g0;
  post.Vn = symmetrized(prior.V0 + resid.transpose() * resid + shift.transpose() * prior.L0 * shift);
  return post;
}

Matrix sample_inverse_wishart(const Matrix& v, double nu, Rng& rng) {
  if (v.rows() != v.cols()) throw InvalidArgument("inverse-Wishart scale must be square");
  if (!(nu > static_cast<double>(v.rows()) - 1)) throw InvalidArgument("inverse-Wishart dof must exceed R - 1");
  return inverse_wishart_from_chol(lower_cholesky(v, "inverse-Wishart scale"), nu, rng);
}

Matrix sample_matrix_normal(const Matrix& mean, const Matrix& row_cov, const Matrix& col_cov, Rng& rng) {
  if (row_cov.rows() != mean.rows() || row_cov.cols() != mean.rows() || col_cov.rows() != mean.cols() ||
      col_cov.cols() != mean.cols())
    throw InvalidArgument("matrix-normal covariance shapes do not match the mean");
  return matrix_normal_from_chol(mean, lower_cholesky(row_cov, "row covariance"),
                                 lower_cholesky(col_cov, "column covariance"), rng);
}

McmcChain run_sampler(const Matrix& g, const Matrix& z, const PriorSpec& prior, const ChainSettings& settings,
                      std::span<const std::string> column_names) {
  settings.validate();
  const PosteriorParams post = compute_posterior_params(g, z, prior, column_names);
  const Index p = z.cols();

  const Matrix vn_chol = lower_cholesky(post.Vn, "posterior scale Vn");
  const Matrix row_cov = symmetrized(Eigen::LLT<Matrix>(post.Ln).solve(Matrix::Identity(p, p)));
  const Matrix row_chol = lower_cholesky(row_cov, "posterior row covariance");

  McmcChain chain;
  chain.n_total = settings.n_total;
  chain.burn_in = settings.burn_in;
  chain.thin = settings.thin;
  chain.seed = settings.seed;
  chain.gamma_star.reserve(static_cast<std::size_t>(settings.retained()));
  chain.sigma.reserve(static_cast<std::size_t>(settings.retained()));

  Rng rng(settings.seed);
  for (int it = 0; it < settings.n_total; ++it) {
    Matrix sigma = inverse_wishart_from_chol(vn_chol, post.nun, rng);
    Eigen::LLT<Matrix> sigma_llt(sigma);
    if (sigma_llt.info() != Eigen::Success) throw NumericalError("inverse-Wishart draw is not positive definite");
    Matrix gamma = matrix_normal_from_chol(post.gn, row_chol, sigma_llt.matrixL(), rng);
    const int kept = it - settings.burn_in + 1;
    if (kept > 0 && kept % settings.thin == 0) {
      chain.gamma_star.push_back(std::move(gamma));
      chain.sigma.push_back(std::move(sigma));
    }
  }
  return chain;
}

}  // namespace cpfos

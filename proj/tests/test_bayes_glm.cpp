#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <random>

#include "cpfos/bayes_glm.hpp"
#include "cpfos/linalg.hpp"
#include "test_util.hpp"

using namespace cpfos;
using testutil::max_abs_diff;
using testutil::random_matrix;

namespace {

double rel_diff(const Matrix& a, const Matrix& b) { return (a - b).norm() / std::max(b.norm(), 1e-300); }

Matrix spd(Index n, std::mt19937_64& gen) {
  Matrix a = random_matrix(n, n, gen);
  return symmetrized(a * a.transpose() + static_cast<double>(n) * Matrix::Identity(n, n));
}

}  // namespace

TEST_CASE("posterior parameters on a hand-sized instance") {
  Matrix z(3, 1), g(3, 2), g0(1, 2), l0(1, 1), v0(2, 2);
  z << 1, 2, 3;
  g << 1, 2, 0, 1, 2, -1;
  g0 << 0.5, -1;
  l0 << 2;
  v0 << 2, 1, 1, 3;
  PosteriorParams post = compute_posterior_params(g, z, {g0, l0, v0, 4});

  // Frozen from an exact rational evaluation of the four update formulas.
  Matrix gn(1, 2), ln(1, 1), vn(2, 2);
  gn << 0.5, -1.0 / 16;
  ln << 16;
  vn << 3.5, 0.5, 0.5, 175.0 / 16;
  CHECK(rel_diff(post.gn, gn) < 1e-10);
  CHECK(rel_diff(post.Ln, ln) < 1e-10);
  CHECK(rel_diff(post.Vn, vn) < 1e-10);
  CHECK(post.nun == 7);
}

TEST_CASE("all-zero design leaves the prior mean") {
  std::mt19937_64 gen(1);
  Matrix g = random_matrix(6, 3, gen);
  PriorSpec prior = PriorSpec::weak(2, 3);
  prior.g0 = random_matrix(2, 3, gen);
  PosteriorParams post = compute_posterior_params(g, Matrix::Zero(6, 2), prior);
  CHECK(max_abs_diff(post.gn, prior.g0) < 1e-12);
  CHECK(post.Ln == prior.L0);
  CHECK(post.nun == prior.nu0 + 6);
  CHECK(max_abs_diff(post.Vn, prior.V0 + g.transpose() * g) < 1e-12);
}

TEST_CASE("near-flat prior reduces to least squares") {
  std::mt19937_64 gen(2);
  Matrix z = random_matrix(40, 3, gen), g = random_matrix(40, 4, gen);
  PriorSpec prior = PriorSpec::weak(3, 4);
  prior.L0 = 1e-12 * Matrix::Identity(3, 3);
  PosteriorParams post = compute_posterior_params(g, z, prior);
  Matrix ols = z.householderQr().solve(g);
  CHECK(rel_diff(post.gn, ols) < 1e-6);
}

TEST_CASE("batch and sequential conjugate updates agree") {
  std::mt19937_64 gen(3);
  Matrix z = random_matrix(30, 2, gen), g = random_matrix(30, 3, gen);
  PriorSpec prior{random_matrix(2, 3, gen), spd(2, gen), spd(3, gen), 6};
  PosteriorParams batch = compute_posterior_params(g, z, prior);
  PosteriorParams first = compute_posterior_params(g.topRows(12), z.topRows(12), prior);
  PosteriorParams second =
      compute_posterior_params(g.bottomRows(18), z.bottomRows(18), {first.gn, first.Ln, first.Vn, first.nun});
  CHECK(rel_diff(second.gn, batch.gn) < 1e-10);
  CHECK(rel_diff(second.Ln, batch.Ln) < 1e-10);
  CHECK(rel_diff(second.Vn, batch.Vn) < 1e-10);
  CHECK(second.nun == batch.nun);
}

TEST_CASE("singular design is reported with the offending combination") {
  Matrix z(4, 2);
  z << 1, 2, 1, 2, 1, 2, 1, 2;
  PriorSpec prior = PriorSpec::weak(2, 1);
  prior.L0.setZero();
  std::vector<std::string> names{"intercept", "dose"};
  try {
    compute_posterior_params(Matrix::Ones(4, 1), z, prior, names);
    FAIL("expected SingularDesign");
  } catch (const SingularDesign& e) {
    const std::string msg = e.what();
    CHECK(msg.find("intercept") != std::string::npos);
    CHECK(msg.find("dose") != std::string::npos);
  }
  CHECK_THROWS_AS(compute_posterior_params(Matrix::Ones(3, 1), z, prior), InvalidArgument);
}

TEST_CASE("prior validation") {
  PriorSpec p = PriorSpec::weak(2, 3);
  CHECK_NOTHROW(p.validate(2, 3));
  CHECK(p.nu0 == 5);
  PriorSpec low = p;
  low.nu0 = 2;
  CHECK_THROWS_AS(low.validate(2, 3), InvalidArgument);
  PriorSpec asym = p;
  asym.V0(0, 1) = 0.5;
  CHECK_THROWS_AS(asym.validate(2, 3), InvalidArgument);
  CHECK_THROWS_AS(p.validate(3, 3), InvalidArgument);
}

TEST_CASE("inverse-Wishart moments") {
  Rng rng(11);
  const int draws = 20000;
  const Index r = 3;
  std::vector<Matrix> samples;
  Matrix mean = Matrix::Zero(r, r);
  for (int i = 0; i < draws; ++i) {
    samples.push_back(sample_inverse_wishart(Matrix::Identity(r, r), 10, rng));
    mean += samples.back();
  }
  mean /= draws;
  Matrix var = Matrix::Zero(r, r);
  for (const auto& s : samples) var.array() += (s - mean).array().square();
  var /= draws - 1;
  const Matrix expect = Matrix::Identity(r, r) / 6.0;
  for (Index i = 0; i < r; ++i)
    for (Index j = 0; j < r; ++j) CHECK(std::abs(mean(i, j) - expect(i, j)) < 3 * std::sqrt(var(i, j) / draws));
}

TEST_CASE("inverse-Wishart draws are SPD, symmetric and reproducible") {
  std::mt19937_64 gen(12);
  Matrix v = spd(5, gen);
  Rng rng(5);
  for (int i = 0; i < 1000; ++i) {
    Matrix s = sample_inverse_wishart(v, 7.5, rng);
    CHECK(s == s.transpose());
    CHECK(Eigen::LLT<Matrix>(s).info() == Eigen::Success);
  }
  Rng a(99), b(99);
  for (int i = 0; i < 10; ++i) CHECK(sample_inverse_wishart(v, 8, a) == sample_inverse_wishart(v, 8, b));

  Matrix bad = Matrix::Identity(2, 2);
  bad(1, 1) = -1;
  CHECK_THROWS_AS(sample_inverse_wishart(bad, 5, rng), InvalidArgument);
  CHECK_THROWS_AS(sample_inverse_wishart(Matrix::Identity(3, 3), 1.5, rng), InvalidArgument);
}

TEST_CASE("matrix-normal moments") {
  Matrix m(2, 2), row(2, 2), col(2, 2);
  m << 1, -2, 0.5, 3;
  row << 2, 0.6, 0.6, 1;
  col << 1, -0.4, -0.4, 0.5;
  Rng rng(21);
  const int draws = 20000;
  std::vector<Vector> vecs;
  Vector mean = Vector::Zero(4);
  for (int i = 0; i < draws; ++i) {
    Matrix x = sample_matrix_normal(m, row, col, rng);
    vecs.push_back(Eigen::Map<const Vector>(x.data(), 4));
    mean += vecs.back();
  }
  mean /= draws;
  Matrix cov = Matrix::Zero(4, 4);
  for (const auto& v : vecs) cov += (v - mean) * (v - mean).transpose();
  cov /= draws - 1;
  const Vector vm = Eigen::Map<const Vector>(m.data(), 4);
  for (Index i = 0; i < 4; ++i) CHECK(std::abs(mean[i] - vm[i]) < 3 * std::sqrt(cov(i, i) / draws));
  Matrix kron(4, 4);
  for (Index a = 0; a < 2; ++a)
    for (Index b = 0; b < 2; ++b) kron.block(2 * a, 2 * b, 2, 2) = col(a, b) * row;
  CHECK(rel_diff(cov, kron) < 0.05);
}

TEST_CASE("standard matrix-normal entries pass a Kolmogorov-Smirnov test") {
  Rng rng(31);
  std::vector<double> xs;
  while (xs.size() < 10000) {
    Matrix x = sample_matrix_normal(Matrix::Zero(2, 5), Matrix::Identity(2, 2), Matrix::Identity(5, 5), rng);
    xs.insert(xs.end(), x.data(), x.data() + x.size());
  }
  std::sort(xs.begin(), xs.end());
  double d = 0;
  const double n = static_cast<double>(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double cdf = 0.5 * std::erfc(-xs[i] / std::sqrt(2.0));
    d = std::max({d, cdf - static_cast<double>(i) / n, static_cast<double>(i + 1) / n - cdf});
  }
  CHECK(d < 1.628 / std::sqrt(n));
}

TEST_CASE("matrix-normal concentrates at a vanishing row covariance") {
  Rng rng(41);
  Matrix m(2, 3);
  m << 1, 2, 3, 4, 5, 6;
  Matrix x = sample_matrix_normal(m, 1e-20 * Matrix::Identity(2, 2), Matrix::Identity(3, 3), rng);
  CHECK(max_abs_diff(x, m) < 1e-9);
  CHECK_THROWS_AS(sample_matrix_normal(m, -Matrix::Identity(2, 2), Matrix::Identity(3, 3), rng), InvalidArgument);
}

TEST_CASE("sampler recovers known coefficients") {
  std::mt19937_64 gen(51);
  const Index n = 200, p = 2, r = 4;
  Matrix z(n, p);
  for (Index i = 0; i < n; ++i) {
    z(i, 0) = 1;
    z(i, 1) = static_cast<double>(i % 2);
  }
  Matrix truth = random_matrix(p, r, gen);
  Matrix sigma_true = 0.25 * spd(r, gen);
  Matrix chol = Eigen::LLT<Matrix>(sigma_true).matrixL();
  Matrix g = z * truth + random_matrix(n, r, gen) * chol.transpose();

  ChainSettings settings;
  settings.seed = 7;
  McmcChain chain = run_sampler(g, z, PriorSpec::weak(p, r), settings);
  CHECK(chain.size() == 1500);
  Matrix mean = chain.posterior_mean(), sd = chain.posterior_sd();
  for (Index i = 0; i < p; ++i)
    for (Index j = 0; j < r; ++j) CHECK(std::abs(mean(i, j) - truth(i, j)) < 3 * sd(i, j));
  for (const auto& s : chain.sigma) {
    CHECK(max_abs_diff(s, s.transpose()) <= 1e-12);
    CHECK(Eigen::LLT<Matrix>(s).info() == Eigen::Success);
  }

  McmcChain again = run_sampler(g, z, PriorSpec::weak(p, r), settings);
  for (Index m = 0; m < chain.size(); ++m) CHECK(chain.gamma_star[m] == again.gamma_star[m]);
}

TEST_CASE("retained sample bookkeeping") {
  std::mt19937_64 gen(61);
  Matrix z = random_matrix(10, 1, gen), g = random_matrix(10, 2, gen);
  PriorSpec prior = PriorSpec::weak(1, 2);
  for (auto [total, burn, thin] : {std::tuple{13, 10, 3}, std::tuple{20, 5, 4}, std::tuple{7, 0, 1}, std::tuple{9, 2, 2}}) {
    ChainSettings s{total, burn, thin, 1};
    McmcChain c = run_sampler(g, z, prior, s);
    CHECK(c.size() == (total - burn) / thin);
    CHECK(c.sigma.size() == c.gamma_star.size());
  }
  CHECK_THROWS_AS(run_sampler(g, z, prior, {10, 10, 1, 1}), InvalidArgument);
  CHECK_THROWS_AS(run_sampler(g, z, prior, {10, 2, 0, 1}), InvalidArgument);
  CHECK_THROWS_AS(run_sampler(g, z, prior, {10, 8, 3, 1}), InvalidArgument);
}

TEST_CASE("child seeds follow the golden-ratio derivation") {
  CHECK(Rng::derive_seed(0, 0) == 0);
  CHECK(Rng::derive_seed(5, 1) == (5ULL ^ 0x9E3779B97F4A7C15ULL));
  CHECK(Rng(42).child(3).seed() == (42ULL ^ (0x9E3779B97F4A7C15ULL * 3)));
}

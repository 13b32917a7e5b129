#include "cpfos/cp_als.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <string>

#include "cpfos/linalg.hpp"

namespace cpfos {

namespace {

using ConstMap = Eigen::Map<const Matrix>;

// Relative residual at which a fit is exact to working precision.
constexpr double kExactFit = 1e-14;

// Gram matrix X_(n) X_(n)^T accumulated over contiguous left x I_n slabs.
Matrix mode_gram(const Tensor& t, int mode) {
  const auto [left, extent, right] = detail::split_at(t.dims(), mode);
  const double* data = t.values().data();
  if (left == 1) {
    ConstMap x(data, extent, right);
    return x * x.transpose();
  }
  Matrix gram = Matrix::Zero(extent, extent);
  for (Index b = 0; b < right; ++b) {
    ConstMap slab(data + b * left * extent, left, extent);
    gram.noalias() += slab.transpose() * slab;
  }
  return gram;
}

void normalize_columns(Matrix& a, Vector& norms) {
  norms.resize(a.cols());
  for (Index r = 0; r < a.cols(); ++r) {
    const double n = a.col(r).norm();
    norms[r] = n;
    if (n > 0) a.col(r) /= n;
  }
}

Matrix random_factor(Index rows, Index rank, std::mt19937_64& gen) {
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  Matrix a(rows, rank);
  for (Index r = 0; r < rank; ++r)
    for (Index i = 0; i < rows; ++i) a(i, r) = u01(gen);
  return a;
}

std::vector<Matrix> initial_factors(const Tensor& t, Index rank, const AlsConfig& cfg) {
  std::mt19937_64 gen(cfg.seed);
  std::vector<Matrix> factors;
  for (int n = 0; n < t.order(); ++n) {
    const Index extent = t.dim(n);
    Matrix a;
    if (cfg.init == AlsConfig::Init::Hosvd && rank <= extent) {
      Eigen::SelfAdjointEigenSolver<Matrix> eig(mode_gram(t, n));
      // Eigenvalues come out ascending; take the leading R in descending order.
      a = eig.eigenvectors().rightCols(rank).rowwise().reverse();
    } else {
      a = random_factor(extent, rank, gen);
    }
    Vector norms;
    normalize_columns(a, norms);
    factors.push_back(std::move(a));
  }
  return factors;
}

}  // namespace

void AlsConfig::validate() const {
  if (max_iters < 1) throw InvalidArgument("ALS max_iters must be at least 1");
  if (!(tol > 0)) throw InvalidArgument("ALS tolerance must be positive");
}

Dims CpModel::dims() const {
  Dims d;
  for (const auto& a : factors) d.push_back(a.rows());
  return d;
}

Matrix mttkrp(const Tensor& t, const std::vector<Matrix>& factors, int mode) {
  if (static_cast<int>(factors.size()) != t.order())
    throw InvalidArgument("mttkrp needs one factor per tensor mode");
  const auto [left, extent, right] = detail::split_at(t.dims(), mode);
  const Index rank = factors.front().cols();
  for (int k = 0; k < t.order(); ++k)
    if (factors[k].cols() != rank || (k != mode && factors[k].rows() != t.dim(k)))
      throw InvalidArgument("mttkrp factor " + std::to_string(k) + " has the wrong shape");

  auto kr_range = [&](int from, int to) -> Matrix {  // modes [from, to), earliest fastest
    if (from >= to) return Matrix::Ones(1, rank);
    std::vector<Matrix> mats;
    for (int k = to - 1; k >= from; --k) mats.push_back(factors[k]);
    return khatri_rao(mats);
  };
  const Matrix kr_left = kr_range(0, mode);
  const Matrix kr_right = kr_range(mode + 1, t.order());

  const double* data = t.values().data();
  if (left == 1) return ConstMap(data, extent, right) * kr_right;
  if (right == 1) return ConstMap(data, left, extent).transpose() * kr_left;

  Matrix out = Matrix::Zero(extent, rank);
  Matrix partial(extent, rank);
  for (Index b = 0; b < right; ++b) {
    ConstMap slab(data + b * left * extent, left, extent);
    partial.noalias() = slab.transpose() * kr_left;
    out.noalias() += partial * kr_right.row(b).asDiagonal();
  }
  return out;
}

double cp_residual_squared(const Tensor& t, const Vector& lambda, const std::vector<Matrix>& factors) {
  double acc = 0;
  detail::for_each_cp_block(lambda, factors, [&](Index offset, const Vector& block) {
    acc += (t.values().segment(offset, block.size()) - block).squaredNorm();
  });
  return acc;
}

double cp_fit(const CpModel& model, const Tensor& t) {
  if (model.dims() != t.dims())
    throw InvalidArgument("CP model dims " + dims_string(model.dims()) + " do not match tensor dims " +
                          dims_string(t.dims()));
  const double residual = std::sqrt(cp_residual_squared(t, model.lambda, model.factors));
  if (residual == 0) return 0;
  const double norm = frobenius_norm(t);
  return norm > 0 ? residual / norm : std::numeric_limits<double>::infinity();
}

void canonicalize(CpModel& model) {
  const Index rank = model.rank();
  std::vector<Index> order(static_cast<std::size_t>(rank));
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](Index a, Index b) { return model.lambda[a] > model.lambda[b]; });

  Vector lambda(rank);
  for (Index r = 0; r < rank; ++r) lambda[r] = model.lambda[order[r]];
  for (auto& a : model.factors) {
    Matrix sorted(a.rows(), rank);
    for (Index r = 0; r < rank; ++r) sorted.col(r) = a.col(order[r]);
    a = std::move(sorted);
  }
  model.lambda = std::move(lambda);

  const int last = model.order() - 1;
  for (int n = 0; n < last; ++n) {
    auto& a = model.factors[n];
    for (Index r = 0; r < rank; ++r) {
      Index peak = 0;
      a.col(r).cwiseAbs().maxCoeff(&peak);
      if (a(peak, r) < 0) {
        a.col(r) = -a.col(r);
        model.factors[last].col(r) = -model.factors[last].col(r);
      }
    }
  }
}

CpModel cp_als(const Tensor& t, Index rank, const AlsConfig& cfg) {
  if (rank < 1) throw InvalidArgument("CP rank must be at least 1, got " + std::to_string(rank));
  cfg.validate();
  if (t.size() == 0) throw InvalidArgument("cannot decompose an empty tensor");
  if (!t.values().allFinite()) throw InvalidData("tensor contains non-finite values");

  const int order = t.order();
  CpModel model;
  model.factors = initial_factors(t, rank, cfg);
  model.lambda = Vector::Ones(rank);

  const double norm = frobenius_norm(t);
  if (norm == 0) {
    model.lambda.setZero();
    model.fit = 0;
    model.converged = true;
    return model;
  }

  std::vector<Matrix> grams;
  for (const auto& a : model.factors) grams.push_back(a.transpose() * a);

  double previous = std::numeric_limits<double>::infinity();
  Vector norms;
  for (int iter = 1; iter <= cfg.max_iters; ++iter) {
    for (int n = 0; n < order; ++n) {
      Matrix v = Matrix::Ones(rank, rank);
      for (int k = 0; k < order; ++k)
        if (k != n) v.array() *= grams[k].array();
      Matrix updated = mttkrp(t, model.factors, n) * pinv(v);
      normalize_columns(updated, norms);
      // A column that collapsed to zero keeps its previous direction with zero weight.
      for (Index r = 0; r < rank; ++r)
        if (norms[r] == 0) updated.col(r) = model.factors[n].col(r);
      model.factors[n] = std::move(updated);
      model.lambda = norms;
      grams[n] = model.factors[n].transpose() * model.factors[n];
    }
    const double fit = std::sqrt(cp_residual_squared(t, model.lambda, model.factors)) / norm;
    model.fit_trace.push_back(fit);
    model.iterations = iter;
    if (fit <= kExactFit || std::abs(previous - fit) < cfg.tol * previous) {
      model.converged = true;
      break;
    }
    previous = fit;
  }

  canonicalize(model);
  model.fit = cp_fit(model, t);
  return model;
}

}  // namespace cpfos

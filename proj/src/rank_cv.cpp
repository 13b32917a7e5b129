#include "cpfos/rank_cv.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include "cpfos/parallel.hpp"

namespace cpfos {

namespace {

Matrix select_rows(const Matrix& m, const std::vector<Index>& rows) {
  Matrix out(static_cast<Index>(rows.size()), m.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Index>(i)) = m.row(rows[i]);
  return out;
}

// Rethrows the active exception with a prefix, keeping its error category.
[[noreturn]] void rethrow_with_context(const std::string& context) {
  try {
    throw;
  } catch (const SingularDesign& e) {
    throw SingularDesign(context + e.what());
  } catch (const DegeneratePosterior& e) {
    throw DegeneratePosterior(context + e.what());
  } catch (const NumericalError& e) {
    throw NumericalError(context + e.what());
  } catch (const InvalidArgument& e) {
    throw InvalidArgument(context + e.what());
  } catch (const InvalidData& e) {
    throw InvalidData(context + e.what());
  } catch (const std::exception& e) {
    throw NumericalError(context + e.what());
  }
}

double fold_error(const Tensor& y4, const Matrix& z, const Fold& fold, Index rank, const CvConfig& cfg,
                  std::uint64_t task_seed) {
  const Tensor train = select_last_mode(y4, fold.train);
  const Tensor test = select_last_mode(y4, fold.test);

  AlsConfig als = cfg.als;
  als.seed = Rng::derive_seed(task_seed, 1);
  const CpModel model = cp_als(train, rank, als);

  const Matrix z_train = select_rows(z, fold.train);
  ChainSettings chain = cfg.chain;
  chain.seed = Rng::derive_seed(task_seed, 2);
  const McmcChain draws = run_sampler(model.factors[3], z_train, cfg.prior.make(z.cols(), rank), chain);

  std::vector<Matrix> factors = model.factors;
  factors[3] = select_rows(z, fold.test) * draws.posterior_mean();
  const double residual = std::sqrt(cp_residual_squared(test, model.lambda, factors));
  if (residual == 0) return 0;
  const double norm = frobenius_norm(test);
  if (!(norm > 0)) throw NumericalError("held-out maps are identically zero");
  return residual / norm;
}

}  // namespace

void CvConfig::validate(Index subjects) const {
  if (folds < 2) throw InvalidArgument("cross-validation needs at least 2 folds");
  if (folds > subjects)
    throw InvalidArgument(std::to_string(folds) + " folds requested for " + std::to_string(subjects) +
                          " subjects");
  if (ranks.empty()) throw InvalidArgument("rank grid is empty");
  for (std::size_t i = 0; i < ranks.size(); ++i) {
    if (ranks[i] < 1) throw InvalidArgument("candidate ranks must be at least 1");
    if (i > 0 && ranks[i] <= ranks[i - 1]) throw InvalidArgument("candidate ranks must be strictly ascending");
  }
  als.validate();
  chain.validate();
}

double CvResult::error_for(Index rank) const {
  for (std::size_t i = 0; i < ranks.size(); ++i)
    if (ranks[i] == rank) return per_rank_error[static_cast<Index>(i)];
  throw InvalidArgument("rank " + std::to_string(rank) + " was not evaluated");
}

std::vector<Fold> kfold_split(Index n, int folds, std::uint64_t seed) {
  if (folds < 2) throw InvalidArgument("cross-validation needs at least 2 folds");
  if (folds > n)
    throw InvalidArgument(std::to_string(folds) + " folds requested for " + std::to_string(n) + " subjects");

  std::vector<Index> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), Index{0});
  std::mt19937_64 gen(seed);
  // Fisher-Yates with an explicit draw so the permutation does not depend on the
  // standard library's shuffle implementation.
  for (Index i = n - 1; i > 0; --i) {
    const Index j = static_cast<Index>(gen() % static_cast<std::uint64_t>(i + 1));
    std::swap(perm[static_cast<std::size_t>(i)], perm[static_cast<std::size_t>(j)]);
  }

  std::vector<Fold> out(static_cast<std::size_t>(folds));
  for (int f = 0; f < folds; ++f) {
    const Index lo = n * f / folds, hi = n * (f + 1) / folds;
    auto& fold = out[static_cast<std::size_t>(f)];
    fold.test.assign(perm.begin() + lo, perm.begin() + hi);
    std::sort(fold.test.begin(), fold.test.end());
    for (Index i = 0; i < n; ++i)
      if (!std::binary_search(fold.test.begin(), fold.test.end(), i)) fold.train.push_back(i);
  }
  return out;
}

CvResult cv_rank_search(const Tensor& y4, const Matrix& z, const CvConfig& cfg) {
  if (y4.order() != 4) throw InvalidArgument("rank search needs an order-4 tensor, got order " +
                                             std::to_string(y4.order()));
  const Index n = y4.dim(3);
  if (z.rows() != n)
    throw InvalidArgument("design has " + std::to_string(z.rows()) + " rows but the tensor has " +
                          std::to_string(n) + " subjects");
  cfg.validate(n);

  const auto folds = kfold_split(n, cfg.folds, cfg.seed);
  const int nranks = static_cast<int>(cfg.ranks.size());
  CvResult result;
  result.ranks = cfg.ranks;
  result.fold_errors = Matrix::Zero(cfg.folds, nranks);

  parallel_for(cfg.folds * nranks, cfg.threads, [&](int task) {
    const int f = task / nranks, r = task % nranks;
    const Index rank = cfg.ranks[static_cast<std::size_t>(r)];
    try {
      result.fold_errors(f, r) = fold_error(y4, z, folds[static_cast<std::size_t>(f)], rank, cfg,
                                            Rng::derive_seed(cfg.seed, static_cast<std::uint64_t>(task) + 1));
    } catch (...) {
      rethrow_with_context("fold " + std::to_string(f + 1) + ", rank " + std::to_string(rank) + ": ");
    }
  });

  result.per_rank_error = result.fold_errors.colwise().mean().transpose();
  Index best = 0;
  for (Index r = 1; r < nranks; ++r)
    if (result.per_rank_error[r] < result.per_rank_error[best]) best = r;
  result.selected_rank = cfg.ranks[static_cast<std::size_t>(best)];
  return result;
}

}  // namespace cpfos

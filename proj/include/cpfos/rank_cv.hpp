#pragma once

#include <cstdint>
#include <vector>

#include "cpfos/bayes_glm.hpp"
#include "cpfos/cp_als.hpp"
#include "cpfos/tensor.hpp"

namespace cpfos {

struct CvConfig {
  int folds = 10;
  std::vector<Index> ranks;  // ascending, all >= 1
  std::uint64_t seed = 0;
  AlsConfig als;
  PriorSettings prior;
  ChainSettings chain;
  int threads = 0;  // 0 = hardware concurrency

  void validate(Index subjects) const;
};

struct CvResult {
  std::vector<Index> ranks;
  Vector per_rank_error;  // one entry per rank, mean over folds
  Matrix fold_errors;     // folds x ranks
  Index selected_rank = 0;

  double error_for(Index rank) const;
};

struct Fold {
  std::vector<Index> train;  // ascending
  std::vector<Index> test;   // ascending
};

/// Seeded shuffle of 0..n-1 cut into `folds` test sets whose sizes differ by at most one.
std::vector<Fold> kfold_split(Index n, int folds, std::uint64_t seed);

/// Relative Frobenius error of each (fold, rank) pair: CP on the training subjects,
/// posterior-mean regression of the training subject factor, prediction of the
/// held-out subject factor from their covariates, and reconstruction of their maps.
CvResult cv_rank_search(const Tensor& y4, const Matrix& z, const CvConfig& cfg);

}  // namespace cpfos

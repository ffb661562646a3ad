#pragma once

#include <random>

#include "sfmc/factor_model.hpp"
#include "sfmc/types.hpp"

namespace sfmc::testing {

inline Mat random_matrix(Index rows, Index cols, std::mt19937_64& rng, double sd = 1.0) {
  std::normal_distribution<double> gauss(0.0, sd);
  Mat a(rows, cols);
  for (Index j = 0; j < cols; ++j)
    for (Index i = 0; i < rows; ++i) a(i, j) = gauss(rng);
  return a;
}

// Raw (non-canonical) factor model with Gaussian blocks.
inline FactorModel random_raw_model(Index n1, Index n2, FactorRanks ranks, std::mt19937_64& rng,
                                    double loading_sd = 1.0) {
  FactorModel fm;
  fm.ranks = ranks;
  fm.lambda_m1 = random_matrix(n1, ranks.d_s, rng, loading_sd);
  fm.lambda_m2 = random_matrix(n1, ranks.d_m, rng, loading_sd);
  fm.lambda_th1 = random_matrix(n1, ranks.d_s, rng, loading_sd);
  fm.lambda_th2 = random_matrix(n1, ranks.d_theta, rng, loading_sd);
  fm.f_s = random_matrix(n2, ranks.d_s, rng);
  fm.f_m = random_matrix(n2, ranks.d_m, rng);
  fm.f_th = random_matrix(n2, ranks.d_theta, rng);
  return fm;
}

// Random model on the identification constraints.
inline FactorModel random_canonical_model(Index n1, Index n2, FactorRanks ranks,
                                          std::mt19937_64& rng) {
  FactorModel raw = random_raw_model(n1, n2, ranks, rng);
  return canonicalize(assemble(raw), ranks);
}

inline double rel_error(const Mat& got, const Mat& want) {
  const double scale = want.norm();
  return scale > 0 ? (got - want).norm() / scale : (got - want).norm();
}

}  // namespace sfmc::testing

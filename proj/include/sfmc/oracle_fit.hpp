#pragma once

#include "sfmc/factor_model.hpp"
#include "sfmc/loss.hpp"
#include "sfmc/types.hpp"

namespace sfmc {

struct OracleFit {
  FactorModel model;
  FitReport report;
};

// Dense warm start: inverse-rate filled data truncated at rank_m, smoothed
// mask logits truncated at rank_theta.
ParamPair spectral_init_pair(const MaskedData& data, Index rank_m, Index rank_theta);

// Known-rank constrained estimator: block gradient descent alternating over
// {loadings given factors} and {factors given loadings} with Armijo
// backtracking, re-canonicalizing every cfg.recanonicalize_every sweeps and at
// termination. Non-convergence is reported via the FitReport warning flag,
// not an exception.
OracleFit fit_known_rank(const MaskedData& data, FactorRanks ranks, const LossSpec& loss,
                         const FitConfig& cfg, const FactorModel* init = nullptr);

// Entrywise clamp of m to [-alpha_m, alpha_m] and theta to [-alpha_theta, alpha_theta].
ParamPair project_infinity_caps(const ParamPair& p, const FitConfig& cfg);

}  // namespace sfmc

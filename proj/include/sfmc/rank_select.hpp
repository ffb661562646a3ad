#pragma once

#include "sfmc/factor_model.hpp"
#include "sfmc/mcp.hpp"
#include "sfmc/types.hpp"

namespace sfmc {

struct RankEstimate {
  FactorRanks ranks;
  Index d_hat = 0;         // numerical rank of H
  Index d_sm_hat = 0;      // #{sigma_i(M) > T}
  Index d_stheta_hat = 0;  // #{sigma_i(Theta) > T}
  double threshold = 0.0;
  Vec sv_h, sv_m, sv_theta;
};

// Rank estimation by singular-value thresholding at T:
//   d_hat        = rank(H)          (singular values > 1e-10 sigma_max)
//   d_s + d_m    = #{sigma_i(M) > T}
//   d_s + d_th   = #{sigma_i(Theta) > T}
// then d_theta = d - (ds+dm), d_m = d - (ds+dth), d_s = (ds+dm)+(ds+dth)-d.
// Throws RankConsistencyError when any estimated rank is negative.
RankEstimate estimate_ranks(const ParamPair& h_hat, double threshold);

// Fast path for an SVST fit: reuses the factored H to avoid dense SVDs.
RankEstimate estimate_ranks(const McpFit& fit, double threshold);

}  // namespace sfmc

#pragma once

#include "sfmc/loss.hpp"
#include "sfmc/types.hpp"

namespace sfmc {

struct McpConfig {
  double mu = 1.0;
  double gamma = 1.5;
  Index k = 0;  // rank cap; 0 -> floor(sqrt(min(n1, n2)))
  double eta = 1.0;
  double tol = 1e-7;
  int max_iter = 500;
  double alpha_m = 20.0;
  double alpha_theta = 20.0;

  double threshold() const { return mu * gamma; }
  Index effective_k(Index n1, Index n2) const;
};

// Scalar MCP: mu x - x^2/(2 gamma) for x <= gamma mu, else mu^2 gamma / 2.
double mcp_scalar(double x, double mu, double gamma);

// Sum of the scalar MCP over all singular values of h.
double mcp_penalty(const Mat& h, double mu, double gamma);
double mcp_penalty_from_singulars(const Vec& s, double mu, double gamma);

// Proximal operator of the MCP on a singular value (firm thresholding):
// argmin over y >= 0 of (sigma - y)^2 / (2 step) + mcp_scalar(y). Requires
// gamma > step.
double firm_threshold_shrink(double sigma, double step, double mu, double gamma);

struct McpFit {
  ParamPair params;
  Vec singular_values;  // of the stacked H, descending, length <= k
  Mat u;                // 2n1 x r
  Mat v;                // n2 x r
  FitReport report;
  double penalized_objective = std::numeric_limits<double>::quiet_NaN();
};

// Proximal gradient on the stacked H = [m; theta] with singular-value firm
// thresholding and hard rank cap k (SVST). Monotone in the penalized
// objective; non-convergence reported via the FitReport warning flag.
McpFit fit_mcp(const MaskedData& data, const LossSpec& loss, const McpConfig& cfg,
               const ParamPair* init = nullptr);

}  // namespace sfmc

#pragma once

#include <optional>

#include "sfmc/inference.hpp"
#include "sfmc/tuning.hpp"
#include "sfmc/types.hpp"

namespace sfmc {

// Full two-step estimation: mu selection by IC -> MCP fit -> rank estimation
// -> known-rank refit (SH, eta = eta_init) -> eta selection -> refit (OSH).
struct PipelineConfig {
  LossSpec loss = LossSpec::quadratic();
  double gamma = 1.5;
  double eta_init = 1.0;
  Index cap_k = 0;  // 0 -> sqrt rule
  std::vector<double> mu_grid;       // empty -> default grid
  std::optional<double> fixed_mu;    // single-point grid
  double ic_coef = 0.125;
  bool eta_auto = true;              // false -> keep eta_fixed
  double eta_fixed = 1.0;
  FitConfig fit_cfg;
  double mcp_tol = 1e-7;
  int mcp_max_iter = 500;
};

struct PipelineResult {
  MuSelection mu_selection;
  RankEstimate ranks;
  OracleFit sh_fit;      // refit at eta_init
  EtaSelection eta;
  OracleFit osh_fit;     // refit at eta_hat (== sh_fit when eta is fixed)
  ParamPair params;      // assembled OSH estimate
  std::string warning;
};

PipelineResult run_pipeline(const MaskedData& data, const PipelineConfig& cfg);

}  // namespace sfmc

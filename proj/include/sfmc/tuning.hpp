#pragma once

#include <optional>
#include <vector>

#include "sfmc/mcp.hpp"
#include "sfmc/oracle_fit.hpp"
#include "sfmc/rank_select.hpp"
#include "sfmc/types.hpp"

namespace sfmc {

// k_f = ds (2 n1 + n2 - ds) + (dm + dth)(n1 + n2 - dm - dth)
long long degrees_of_freedom(FactorRanks ranks, Index n1, Index n2);

// Observed mean squared residual.
double sigma2_naive(const MaskedData& data, const Mat& m_hat);

// Bias-corrected residual variance for the regression loss, built from the
// fitted loading Gram blocks and the overall observation rate.
double sigma2_corrected(const MaskedData& data, const FactorModel& fm, double eta);

// phi_hat = sum w (x - b'(m))^2 / b''(m) / sum w for an exponential family.
double dispersion_hat(const MaskedData& data, const Mat& m_hat, const LossSpec& loss);

struct IcRecord {
  double mu = 0.0;
  double q_value = 0.0;
  long long k_f = 0;
  double ic_value = 0.0;
  RankEstimate ranks;
  bool failed = false;
  std::string note;
};

// Model-fit term Q: the negative observed log-likelihood with the scale
// (sigma or phi) plugged in. For the quadratic loss scale = sigma^2; for an
// exponential family scale = phi.
double ic_q_value(const MaskedData& data, const ParamPair& fitted, const LossSpec& loss,
                  double scale);

// Q plus the complexity penalty ic_coef * log(n1 n2) * k_f. Computes the
// scale internally; throws on a nonpositive variance/dispersion.
IcRecord ic_value(const MaskedData& data, const ParamPair& fitted, const LossSpec& loss,
                  const RankEstimate& ranks, double mu, double ic_coef = 0.125);

struct MuSelectOptions {
  double gamma = 1.5;
  double eta = 1.0;
  Index k = 0;  // rank cap; 0 -> sqrt rule
  double ic_coef = 0.125;
  FitConfig fit_cfg;
  double mcp_tol = 1e-7;
  int mcp_max_iter = 500;
  bool warm_start_path = true;
};

struct MuSelection {
  double mu = 0.0;
  Index chosen_index = -1;
  std::vector<IcRecord> records;
  RankEstimate ranks;    // at the chosen mu
  McpFit mcp;            // at the chosen mu
  OracleFit refit;       // known-rank refit at the chosen ranks
};

// 15 logarithmically spaced points on [0.05, 1.0] * sigma_1(H_init) / sqrt(n1+n2).
std::vector<double> default_mu_grid(const MaskedData& data, Index k = 0, int count = 15);

// Runs fit_mcp + rank estimation + known-rank refit per grid point and picks
// the IC argmin; ties break toward larger mu. Grid points whose rank counts
// are inconsistent are recorded and skipped; if all fail an Error lists them.
MuSelection select_mu(const MaskedData& data, const LossSpec& loss, std::vector<double> grid,
                      const MuSelectOptions& opts);

enum class EtaMethod { automatic, inverse_variance, inverse_dispersion, numeric_amse_min };

struct EtaSelection {
  double eta_hat = 1.0;
  EtaMethod method = EtaMethod::automatic;
  double sigma2_naive_value = std::numeric_limits<double>::quiet_NaN();
  double sigma2_corrected_value = std::numeric_limits<double>::quiet_NaN();
  double phi_hat = std::numeric_limits<double>::quiet_NaN();
};

// Weight selection minimizing the AMSE: quadratic -> 1/sigma2_corrected,
// exponential family -> 1/phi_hat, numeric_amse_min -> sampled-AMSE search on
// a log grid with golden-section refinement.
EtaSelection select_eta(const MaskedData& data, const FactorModel& fm, const LossSpec& loss,
                        EtaMethod method = EtaMethod::automatic);

}  // namespace sfmc

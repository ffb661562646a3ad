#pragma once

#include <vector>

#include "sfmc/factor_model.hpp"
#include "sfmc/loss.hpp"
#include "sfmc/types.hpp"

namespace sfmc {

// Plug-in estimates of the per-row and per-column weight matrices behind the
// central limit theory. The column matrices factor into an eta-free logistic
// part and loss parts scaled by eta / eta^2:
//   Psi_j(eta)      = theta_part[j] + eta   * m_part[j]
//   PsiTilde_j(eta) = theta_part[j] + eta^2 * m_tilde_part[j]
// Block layout is (shared, theta-specific, m-specific); the (theta-specific,
// m-specific) off-diagonal block is structurally zero.
struct InferenceWeights {
  FactorRanks ranks;
  Index n1 = 0, n2 = 0;
  double eta = 1.0;

  std::vector<Mat> phi_theta;    // per row i, (ds+dth)^2
  std::vector<Mat> phi_m;        // per row i, (ds+dm)^2
  std::vector<Mat> phi_m_tilde;  // per row i, (ds+dm)^2

  std::vector<Mat> psi_theta_part;    // per column j, d x d
  std::vector<Mat> psi_m_part;        // per column j, d x d
  std::vector<Mat> psi_m_tilde_part;  // per column j, d x d

  Mat psi(Index j) const { return psi(j, eta); }
  Mat psi_tilde(Index j) const { return psi_tilde(j, eta); }
  Mat psi(Index j, double eta_value) const;
  Mat psi_tilde(Index j, double eta_value) const;
};

// Builds all weight matrices from the fitted canonical model. Expectations of
// l-derivatives use the single-sample plug-in at observed cells and the loss
// family's model-implied value at unobserved cells (quadratic: -E l'' = 1,
// E|l'|^2 = sigma^2; exponential family: b''(m), phi b''(m)). Huber has no
// model-implied moments and is rejected.
InferenceWeights build_weights(const MaskedData& data, const FactorModel& fm, const LossSpec& loss,
                               double eta);

struct EntryVariance {
  double v_theta = 0.0;
  double v_m = 0.0;
};

// Asymptotic variances of theta_hat_ij and m_hat_ij; the 95% interval for a
// matrix entry is estimate +- 1.96 sqrt(V / (n1 + n2)).
EntryVariance entry_variance(const InferenceWeights& w, const FactorModel& fm, Index i, Index j,
                             double eta);

// Sampled AMSE of m_hat as a function of eta (the first term does not depend
// on eta). SPD of each Psi_j(eta) is verified.
double amse_sample(const InferenceWeights& w, const FactorModel& fm, double eta);

}  // namespace sfmc

#pragma once

#include <functional>

#include "sfmc/types.hpp"

namespace sfmc {

// Entrywise pseudo-log-likelihood family l(x, m) with derivatives in m.
//   quadratic:  l = -(x-m)^2/2,        l' = x - m,        l'' = -1
//   exp_family: l = x*m - b(m),        l' = x - b'(m),    l'' = -b''(m)
//   huber:      quadratic inside |x-m| <= delta, linear tails; |l'| <= delta.
struct LossSpec {
  enum class Kind { quadratic, exp_family, huber };

  Kind kind = Kind::quadratic;
  double delta = 1.0;  // huber only
  std::function<double(double)> b, b_prime, b_second;

  static LossSpec quadratic() { return LossSpec{}; }
  static LossSpec huber(double delta);
  static LossSpec exp_family(std::function<double(double)> b, std::function<double(double)> b1,
                             std::function<double(double)> b2);
  // b(m) = m^2/2: Gaussian with unit dispersion (reduces to quadratic loss).
  static LossSpec gaussian_glm();
  // b(m) = exp(m): Poisson with log link.
  static LossSpec poisson_glm();

  double value(double x, double m) const;
  double deriv(double x, double m) const;   // dl/dm
  double second(double x, double m) const;  // d2l/dm2

  // Upper bound on |l''| over |m| <= alpha_m (Lipschitz constant of l').
  double curvature_bound(double alpha_m) const;

  const char* name() const;
};

struct FitConfig {
  double eta = 1.0;
  double alpha_m = 20.0;
  double alpha_theta = 20.0;
  int max_iter = 2000;  // sweeps
  double tol = 1e-8;
  double armijo_c = 1e-4;
  double backtrack = 0.5;
  int recanonicalize_every = 10;
};

// Negative pseudo-log-likelihood
//   -sum_{ij} { w_ij (log pi_ij + eta l_ij) + (1 - w_ij) log(1 - pi_ij) },
// with pi = expit(theta). Throws NumericalError with the (i, j) location on a
// non-finite entry.
double objective(const MaskedData& data, const ParamPair& p, const LossSpec& loss, double eta);

// grad_m[i,j] = -eta w_ij l'(x_ij, m_ij);  grad_theta[i,j] = expit(theta) - w.
void gradient(const MaskedData& data, const ParamPair& p, const LossSpec& loss, double eta,
              Mat& grad_m, Mat& grad_theta);

// h_m[i,j] = -eta w_ij l''(x_ij, m_ij);  h_theta = pi (1 - pi).
void second_derivative_diag(const MaskedData& data, const ParamPair& p, const LossSpec& loss,
                            double eta, Mat& h_m, Mat& h_theta);

}  // namespace sfmc

#pragma once

#include "sfmc/types.hpp"

namespace sfmc {

struct FactorRanks {
  Index d_s = 0;
  Index d_m = 0;
  Index d_theta = 0;

  Index total() const { return d_s + d_m + d_theta; }
  Index rank_m() const { return d_s + d_m; }
  Index rank_theta() const { return d_s + d_theta; }
  bool operator==(const FactorRanks&) const = default;
};

// Shared factor model:
//   m     = lambda_m1  * f_s' + lambda_m2 * f_m'
//   theta = lambda_th1 * f_s' + lambda_th2 * f_th'
// Canonical form: (1/n2) F.'F. = I per block, F_s'F_m = F_s'F_th = 0,
// loading Gram matrices diagonal with decreasing entries, column signs fixed
// so each factor column's largest-magnitude entry is positive.
struct FactorModel {
  Mat lambda_m1;   // n1 x d_s
  Mat lambda_m2;   // n1 x d_m
  Mat lambda_th1;  // n1 x d_s
  Mat lambda_th2;  // n1 x d_theta
  Mat f_s;         // n2 x d_s
  Mat f_m;         // n2 x d_m
  Mat f_th;        // n2 x d_theta
  FactorRanks ranks;

  Index n1() const { return lambda_m1.rows() > 0 ? lambda_m1.rows() : lambda_m2.rows(); }
  Index n2() const { return f_s.rows() > 0 ? f_s.rows() : (f_m.rows() > 0 ? f_m.rows() : f_th.rows()); }

  static FactorModel zeros(Index n1, Index n2, FactorRanks ranks);
};

// Assemble the dense (m, theta) pair. Throws InputError naming the offending
// block on dimension mismatch.
ParamPair assemble(const FactorModel& fm);

// Factor a dense pair onto the identification constraints at the given ranks.
// The shared subspace is the top-d_s canonical-direction pair of the two row
// spaces. Throws NumericalError when an input is numerically rank-deficient.
FactorModel canonicalize(const Mat& m, const Mat& theta, FactorRanks ranks);
FactorModel canonicalize(const ParamPair& p, FactorRanks ranks);

// Spectral norm of (1/n2) F_m' F_th; zero when either block is empty.
double shared_coupling_xi(const FactorModel& fm);

struct SigmaBoundDiagnostic {
  double lhs = 0.0;  // sigma_d(H)
  double rhs = 0.0;  // sqrt(1 - xi) * min(sigma_{ds+dm}(M), sigma_{ds+dth}(Theta))
  double xi = 0.0;
  bool holds = false;  // lhs >= rhs - 1e-8
};

SigmaBoundDiagnostic check_sigma_lower_bound(const FactorModel& fm);

// Diagnostic: do all canonical-form invariants hold (within the module's
// stated tolerances)?
bool is_canonical(const FactorModel& fm, std::string* why = nullptr);

}  // namespace sfmc

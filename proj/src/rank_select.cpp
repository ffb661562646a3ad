#include "sfmc/rank_select.hpp"

#include <Eigen/SVD>
#include <algorithm>

#include "sfmc/svd_utils.hpp"

namespace sfmc {

namespace {

Index count_above(const Vec& s, double cut) {
  Index c = 0;
  for (Index i = 0; i < s.size(); ++i)
    if (s(i) > cut) ++c;
  return c;
}

RankEstimate combine(Vec sv_h, Vec sv_m, Vec sv_th, double threshold) {
  if (!(threshold > 0.0)) throw InputError("estimate_ranks: threshold must be positive");
  RankEstimate out;
  out.threshold = threshold;
  out.sv_h = std::move(sv_h);
  out.sv_m = std::move(sv_m);
  out.sv_theta = std::move(sv_th);

  const double smax = out.sv_h.size() > 0 ? out.sv_h(0) : 0.0;
  out.d_hat = count_above(out.sv_h, 1e-10 * smax);
  out.d_sm_hat = count_above(out.sv_m, threshold);
  out.d_stheta_hat = count_above(out.sv_theta, threshold);

  const Index d_theta = out.d_hat - out.d_sm_hat;
  const Index d_m = out.d_hat - out.d_stheta_hat;
  const Index d_s = out.d_sm_hat + out.d_stheta_hat - out.d_hat;
  if (d_theta < 0 || d_m < 0 || d_s < 0)
    throw RankConsistencyError(
        "inconsistent rank counts: d=" + std::to_string(out.d_hat) + " ds+dm=" +
            std::to_string(out.d_sm_hat) + " ds+dth=" + std::to_string(out.d_stheta_hat) +
            " -> (" + std::to_string(d_s) + "," + std::to_string(d_m) + "," +
            std::to_string(d_theta) + ")",
        out.d_hat, out.d_sm_hat, out.d_stheta_hat);
  out.ranks = FactorRanks{d_s, d_m, d_theta};
  return out;
}

Vec singular_values_dense(const Mat& a) {
  if (a.size() == 0) return Vec(0);
  Eigen::BDCSVD<Mat> svd(a);
  return svd.singularValues();
}

}  // namespace

RankEstimate estimate_ranks(const ParamPair& h_hat, double threshold) {
  return combine(singular_values_dense(h_hat.stacked()), singular_values_dense(h_hat.m),
                 singular_values_dense(h_hat.theta), threshold);
}

RankEstimate estimate_ranks(const McpFit& fit, double threshold) {
  // H = U diag(s) V'; singular values of the halves come from the row-split
  // of U: M = (U_top diag(s)) V' and V has orthonormal columns, so
  // sigma(M) = sigma(U_top diag(s)).
  const Index r = fit.singular_values.size();
  if (r == 0) return combine(Vec(0), Vec(0), Vec(0), threshold);
  const Index n1 = fit.u.rows() / 2;
  Mat ut = fit.u.topRows(n1) * fit.singular_values.asDiagonal();
  Mat ub = fit.u.bottomRows(n1) * fit.singular_values.asDiagonal();
  Vec sv_m = thin_svd(ut).s;
  Vec sv_th = thin_svd(ub).s;
  return combine(fit.singular_values, std::move(sv_m), std::move(sv_th), threshold);
}

}  // namespace sfmc

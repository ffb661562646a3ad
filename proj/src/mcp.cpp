#include "sfmc/mcp.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "sfmc/oracle_fit.hpp"
#include "sfmc/svd_utils.hpp"

namespace sfmc {

Index McpConfig::effective_k(Index n1, Index n2) const {
  Index kk = k > 0 ? k : static_cast<Index>(std::floor(std::sqrt(static_cast<double>(std::min(n1, n2)))));
  return std::clamp<Index>(kk, 1, std::min(2 * n1, n2));
}

double mcp_scalar(double x, double mu, double gamma) {
  if (x < 0.0) throw InputError("mcp_scalar: negative argument " + std::to_string(x));
  if (x <= gamma * mu) return mu * x - x * x / (2.0 * gamma);
  return mu * mu * gamma / 2.0;
}

double mcp_penalty_from_singulars(const Vec& s, double mu, double gamma) {
  double total = 0.0;
  for (Index i = 0; i < s.size(); ++i) total += mcp_scalar(std::max(s(i), 0.0), mu, gamma);
  return total;
}

double mcp_penalty(const Mat& h, double mu, double gamma) {
  if (h.size() == 0) return 0.0;
  Eigen::BDCSVD<Mat> svd(h);
  return mcp_penalty_from_singulars(svd.singularValues(), mu, gamma);
}

double firm_threshold_shrink(double sigma, double step, double mu, double gamma) {
  if (!(gamma > step))
    throw NumericalError("firm threshold: prox undefined for gamma <= step (gamma=" +
                         std::to_string(gamma) + ", step=" + std::to_string(step) + ")");
  if (sigma < 0.0) throw InputError("firm threshold: negative singular value");
  if (sigma <= step * mu) return 0.0;
  if (sigma <= gamma * mu) return (sigma - step * mu) / (1.0 - step / gamma);
  return sigma;
}

namespace {

struct Iterate {
  ParamPair params;
  Mat u;  // 2n1 x r
  Vec s;
  Mat v;  // n2 x r
  double loss_value = 0.0;
  double penalty = 0.0;
  double objective() const { return loss_value + penalty; }
};

Iterate make_iterate(const Mat& u, const Vec& s, const Mat& v, const MaskedData& data,
                     const LossSpec& loss, const McpConfig& cfg) {
  Iterate it;
  it.u = u;
  it.s = s;
  it.v = v;
  Mat h = u * s.asDiagonal() * v.transpose();
  it.params = ParamPair::from_stacked(h);
  it.loss_value = objective(data, it.params, loss, cfg.eta);
  it.penalty = mcp_penalty_from_singulars(s, cfg.mu, cfg.gamma);
  return it;
}

}  // namespace

McpFit fit_mcp(const MaskedData& data, const LossSpec& loss, const McpConfig& cfg,
               const ParamPair* init) {
  data.validate();
  const Index n1 = data.n1(), n2 = data.n2();
  if (n1 == 0 || n2 == 0) throw InputError("fit_mcp: empty data");
  const Index k = cfg.effective_k(n1, n2);

  std::mt19937_64 rng(0x51ab1e5eedULL);

  // Initial iterate: spectral warm start truncated to the rank cap.
  Mat h0;
  if (init != nullptr) {
    h0 = init->stacked();
  } else {
    ParamPair p0 = spectral_init_pair(data, k, k);
    h0 = p0.stacked();
  }
  Svd s0 = top_svd(h0, k, rng);
  Iterate cur = make_iterate(s0.u, s0.s, s0.v, data, loss, cfg);

  const double lcurv = loss.curvature_bound(cfg.alpha_m);
  const double step0 = std::min(4.0 / (1.0 + cfg.eta * lcurv), 0.9 * cfg.gamma);
  double step = step0;

  FitReport rep;
  rep.objective_trace.reserve(cfg.max_iter + 1);
  rep.objective_trace.push_back(cur.objective());

  Mat gm, gth;
  bool converged = false;
  int iter = 0;
  for (iter = 1; iter <= cfg.max_iter; ++iter) {
    gradient(data, cur.params, loss, cfg.eta, gm, gth);
    Mat g(2 * n1, n2);
    g.topRows(n1) = gm;
    g.bottomRows(n1) = gth;

    bool accepted = false;
    Iterate next;
    double try_step = std::min(step * 1.5, step0);
    for (int bt = 0; bt < 40 && !accepted; ++bt) {
      Mat y = -try_step * g;
      y.noalias() += cur.u * cur.s.asDiagonal() * cur.v.transpose();
      bool exact = bt >= 6;  // late backtracks fall back to the exact SVD
      Svd sv = exact ? [&] {
        Svd full = thin_svd(y);
        const Index r = std::min<Index>(k, full.s.size());
        return Svd{full.u.leftCols(r), full.s.head(r), full.v.leftCols(r)};
      }()
                     : top_svd(y, k, rng, &cur.u);
      Vec shrunk(sv.s.size());
      Index r = 0;
      for (Index i = 0; i < sv.s.size(); ++i) {
        shrunk(i) = firm_threshold_shrink(std::max(sv.s(i), 0.0), try_step, cfg.mu, cfg.gamma);
        if (shrunk(i) > 0.0) r = i + 1;
      }
      Iterate cand = make_iterate(sv.u.leftCols(r), shrunk.head(r), sv.v.leftCols(r), data, loss, cfg);
      if (cand.objective() <= cur.objective() + 1e-12 * (1.0 + std::abs(cur.objective()))) {
        next = std::move(cand);
        accepted = true;
        step = try_step;
      } else {
        try_step *= 0.5;
      }
    }
    if (!accepted) {
      rep.warning = "prox step stalled; returning best iterate";
      break;
    }

    const double move = (next.params.m - cur.params.m).norm() + (next.params.theta - cur.params.theta).norm();
    const double scale = 1.0 + cur.params.m.norm() + cur.params.theta.norm();
    cur = std::move(next);
    rep.objective_trace.push_back(cur.objective());
    if (move <= cfg.tol * scale) {
      converged = true;
      break;
    }
  }

  if (!converged && rep.warning.empty()) rep.warning = "max_iter reached without fixed point";
  rep.iterations = std::min(iter, cfg.max_iter);
  rep.converged = converged;
  rep.final_objective = cur.objective();

  McpFit out;
  out.params = std::move(cur.params);
  out.singular_values = std::move(cur.s);
  out.u = std::move(cur.u);
  out.v = std::move(cur.v);
  out.penalized_objective = rep.final_objective;
  out.report = std::move(rep);
  return out;
}

}  // namespace sfmc

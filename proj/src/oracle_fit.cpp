#include "sfmc/oracle_fit.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "sfmc/numeric.hpp"
#include "sfmc/svd_utils.hpp"

namespace sfmc {

ParamPair spectral_init_pair(const MaskedData& data, Index rank_m, Index rank_theta) {
  const Index n1 = data.n1(), n2 = data.n2();
  const Index nobs = data.observed_count();
  if (nobs == 0) throw InputError("spectral init: no observed entries");
  const double rate = std::max(static_cast<double>(nobs) / (n1 * n2), 1.0 / (n1 * n2));

  double mean = 0.0;
  for (Index j = 0; j < n2; ++j)
    for (Index i = 0; i < n1; ++i)
      if (data.w(i, j) != 0.0) mean += data.x(i, j);
  mean /= nobs;

  // mean fill plus inverse-rate scaling of the observed deviations
  Mat x0 = Mat::Constant(n1, n2, mean);
  for (Index j = 0; j < n2; ++j)
    for (Index i = 0; i < n1; ++i)
      if (data.w(i, j) != 0.0) x0(i, j) += (data.x(i, j) - mean) / rate;

  ParamPair init;
  init.m = truncate_rank(x0, rank_m);

  if (rank_theta > 0) {
    Mat wsm = truncate_rank(data.w, rank_theta);
    init.theta.resize(n1, n2);
    for (Index j = 0; j < n2; ++j)
      for (Index i = 0; i < n1; ++i) {
        const double pi = std::clamp(wsm(i, j), 0.01, 0.99);
        init.theta(i, j) = std::log(pi / (1.0 - pi));
      }
  } else {
    init.theta = Mat::Zero(n1, n2);
  }
  return init;
}

ParamPair project_infinity_caps(const ParamPair& p, const FitConfig& cfg) {
  ParamPair out;
  out.m = p.m.cwiseMax(-cfg.alpha_m).cwiseMin(cfg.alpha_m);
  out.theta = p.theta.cwiseMax(-cfg.alpha_theta).cwiseMin(cfg.alpha_theta);
  return out;
}

namespace {

// Small random canonical model; fallback start when the data admit no
// spectral factorization at the requested ranks.
FactorModel random_canonical_model(Index n1, Index n2, FactorRanks ranks, double scale,
                                   std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  auto draw = [&](Index r, Index c) {
    Mat a(r, c);
    for (Index j = 0; j < c; ++j)
      for (Index i = 0; i < r; ++i) a(i, j) = gauss(rng);
    return a;
  };
  FactorModel fm;
  fm.ranks = ranks;
  fm.lambda_m1 = scale * draw(n1, ranks.d_s);
  fm.lambda_m2 = scale * draw(n1, ranks.d_m);
  fm.lambda_th1 = scale * draw(n1, ranks.d_s);
  fm.lambda_th2 = scale * draw(n1, ranks.d_theta);
  fm.f_s = draw(n2, ranks.d_s);
  fm.f_m = draw(n2, ranks.d_m);
  fm.f_th = draw(n2, ranks.d_theta);
  return canonicalize(assemble(fm), ranks);
}

struct Blocks {
  Mat m1, m2, th1, th2;  // loading-shaped or factor-shaped
  double squared_norm() const {
    return m1.squaredNorm() + m2.squaredNorm() + th1.squaredNorm() + th2.squaredNorm();
  }
};

}  // namespace

OracleFit fit_known_rank(const MaskedData& data, FactorRanks ranks, const LossSpec& loss,
                         const FitConfig& cfg, const FactorModel* init) {
  data.validate();
  const Index n1 = data.n1(), n2 = data.n2();
  if (ranks.rank_m() > std::min(n1, n2) || ranks.rank_theta() > std::min(n1, n2))
    throw InputError("fit_known_rank: infeasible ranks for a " + std::to_string(n1) + "x" +
                     std::to_string(n2) + " matrix");
  if (n1 == 0 || n2 == 0) throw InputError("fit_known_rank: empty data");

  OracleFit out;
  if (ranks.total() == 0) {
    out.model = FactorModel::zeros(n1, n2, ranks);
    ParamPair p = assemble(out.model);
    out.report.converged = true;
    out.report.final_objective = objective(data, p, loss, cfg.eta);
    out.report.objective_trace = {out.report.final_objective};
    out.report.grad_norm = 0.0;
    return out;
  }

  // --- initialization -------------------------------------------------------
  FactorModel fm;
  std::string warning;
  if (init != nullptr) {
    if (!(init->ranks == ranks)) throw InputError("fit_known_rank: init ranks mismatch");
    try {
      fm = canonicalize(assemble(*init), ranks);
    } catch (const NumericalError&) {
      fm = *init;  // degenerate init; proceed uncanonicalized
    }
  } else {
    ParamPair p0 = spectral_init_pair(data, ranks.rank_m(), ranks.rank_theta());
    try {
      fm = canonicalize(p0, ranks);
    } catch (const NumericalError&) {
      fm = random_canonical_model(n1, n2, ranks, 1e-2, 0x5f3759dfULL);
      warning = "spectral init rank-deficient; random start";
    }
  }

  ParamPair p = assemble(fm);
  p = project_infinity_caps(p, cfg);
  double obj = objective(data, p, loss, cfg.eta);

  FitReport rep;
  rep.objective_trace.reserve(cfg.max_iter + 1);
  rep.objective_trace.push_back(obj);

  const double lcurv = loss.curvature_bound(cfg.alpha_m);
  const double hmax = std::max(0.25, cfg.eta * lcurv);
  double step_load = 1.0 / (hmax * std::max<Index>(n2, 1));
  double step_fact = 1.0 / (hmax * std::max<Index>(n1, 1));

  Mat gm, gth;
  bool converged = false;
  double grad_norm = std::numeric_limits<double>::quiet_NaN();
  int sweep = 0;

  // One Armijo-backtracked block step; returns true when a step was accepted.
  auto line_step = [&](double g2, const Blocks& delta_m_parts, double& step) -> bool {
    // delta_m_parts: (dM, dTheta) images of the unit step in parameter space,
    // packed as m1 = dM, th1 = dTheta (m2/th2 unused).
    if (g2 <= 0.0) return false;
    double s = step * 2.0;
    for (int bt = 0; bt < 60; ++bt) {
      ParamPair cand;
      cand.m = p.m - s * delta_m_parts.m1;
      cand.theta = p.theta - s * delta_m_parts.th1;
      double cand_obj;
      try {
        cand_obj = objective(data, cand, loss, cfg.eta);
      } catch (const NumericalError&) {
        s *= cfg.backtrack;
        continue;
      }
      if (cand_obj <= obj - cfg.armijo_c * s * g2) {
        p = std::move(cand);
        obj = cand_obj;
        step = s;
        return true;
      }
      s *= cfg.backtrack;
    }
    return false;
  };

  auto apply_loading_step = [&](double s, const Blocks& g) {
    if (ranks.d_s > 0) {
      fm.lambda_m1 -= s * g.m1;
      fm.lambda_th1 -= s * g.th1;
    }
    if (ranks.d_m > 0) fm.lambda_m2 -= s * g.m2;
    if (ranks.d_theta > 0) fm.lambda_th2 -= s * g.th2;
  };
  auto apply_factor_step = [&](double s, const Blocks& g) {
    if (ranks.d_s > 0) fm.f_s -= s * g.m1;
    if (ranks.d_m > 0) fm.f_m -= s * g.m2;
    if (ranks.d_theta > 0) fm.f_th -= s * g.th2;
  };

  double prev_obj = obj;
  for (sweep = 1; sweep <= cfg.max_iter; ++sweep) {
    // ---- loadings given factors ----
    gradient(data, p, loss, cfg.eta, gm, gth);
    Blocks gl;
    gl.m1 = ranks.d_s > 0 ? Mat(gm * fm.f_s) : Mat(n1, 0);
    gl.m2 = ranks.d_m > 0 ? Mat(gm * fm.f_m) : Mat(n1, 0);
    gl.th1 = ranks.d_s > 0 ? Mat(gth * fm.f_s) : Mat(n1, 0);
    gl.th2 = ranks.d_theta > 0 ? Mat(gth * fm.f_th) : Mat(n1, 0);
    const double g2_load = gl.squared_norm();
    if (g2_load > 0.0) {
      Blocks img;
      img.m1 = Mat::Zero(n1, n2);
      img.th1 = Mat::Zero(n1, n2);
      if (ranks.d_s > 0) {
        img.m1.noalias() += gl.m1 * fm.f_s.transpose();
        img.th1.noalias() += gl.th1 * fm.f_s.transpose();
      }
      if (ranks.d_m > 0) img.m1.noalias() += gl.m2 * fm.f_m.transpose();
      if (ranks.d_theta > 0) img.th1.noalias() += gl.th2 * fm.f_th.transpose();
      if (line_step(g2_load, img, step_load)) apply_loading_step(step_load, gl);
    }

    // ---- factors given loadings ----
    gradient(data, p, loss, cfg.eta, gm, gth);
    Blocks gf;
    gf.m1 = ranks.d_s > 0 ? Mat(gm.transpose() * fm.lambda_m1 + gth.transpose() * fm.lambda_th1)
                          : Mat(n2, 0);
    gf.m2 = ranks.d_m > 0 ? Mat(gm.transpose() * fm.lambda_m2) : Mat(n2, 0);
    gf.th1 = Mat(n2, 0);
    gf.th2 = ranks.d_theta > 0 ? Mat(gth.transpose() * fm.lambda_th2) : Mat(n2, 0);
    const double g2_fact = gf.squared_norm();
    if (g2_fact > 0.0) {
      Blocks img;
      img.m1 = Mat::Zero(n1, n2);
      img.th1 = Mat::Zero(n1, n2);
      if (ranks.d_s > 0) {
        img.m1.noalias() += fm.lambda_m1 * gf.m1.transpose();
        img.th1.noalias() += fm.lambda_th1 * gf.m1.transpose();
      }
      if (ranks.d_m > 0) img.m1.noalias() += fm.lambda_m2 * gf.m2.transpose();
      if (ranks.d_theta > 0) img.th1.noalias() += fm.lambda_th2 * gf.th2.transpose();
      if (line_step(g2_fact, img, step_fact)) apply_factor_step(step_fact, gf);
    }

    // ---- caps, re-canonicalization ----
    if (p.m.cwiseAbs().maxCoeff() > cfg.alpha_m || p.theta.cwiseAbs().maxCoeff() > cfg.alpha_theta) {
      ParamPair clamped = project_infinity_caps(p, cfg);
      try {
        fm = canonicalize(clamped, ranks);
        p = assemble(fm);
        obj = objective(data, p, loss, cfg.eta);
      } catch (const NumericalError&) {
        if (warning.empty()) warning = "cap projection skipped: rank-deficient clamp";
      }
    } else if (sweep % cfg.recanonicalize_every == 0) {
      try {
        FactorModel cand = canonicalize(p, ranks);
        ParamPair rp = assemble(cand);
        const double drift = (rp.m - p.m).norm() + (rp.theta - p.theta).norm();
        const double scale = p.m.norm() + p.theta.norm() + 1e-300;
        if (drift <= 1e-9 * scale) {
          fm = std::move(cand);
          p = std::move(rp);
          obj = objective(data, p, loss, cfg.eta);
        } else if (warning.empty()) {
          warning = "re-canonicalization moved the product; skipped";
        }
      } catch (const NumericalError&) {
        if (warning.empty()) warning = "re-canonicalization skipped: rank-deficient iterate";
      }
    }

    rep.objective_trace.push_back(obj);

    // ---- stopping ----
    if (std::abs(prev_obj - obj) <= cfg.tol * (1.0 + std::abs(obj))) {
      grad_norm = std::sqrt(g2_load + g2_fact);
      converged = true;
      break;
    }
    const double gtol = cfg.tol * (1.0 + std::abs(obj));
    if (std::sqrt(g2_load + g2_fact) <= gtol) {
      grad_norm = std::sqrt(g2_load + g2_fact);
      converged = true;
      break;
    }
    prev_obj = obj;
  }

  // terminal canonicalization
  try {
    FactorModel cand = canonicalize(p, ranks);
    ParamPair rp = assemble(cand);
    const double drift = (rp.m - p.m).norm() + (rp.theta - p.theta).norm();
    const double scale = p.m.norm() + p.theta.norm() + 1e-300;
    if (drift <= 1e-9 * scale) {
      fm = std::move(cand);
      p = std::move(rp);
    }
  } catch (const NumericalError&) {
    if (warning.empty()) warning = "terminal canonicalization skipped: rank-deficient iterate";
  }

  if (!converged && warning.empty()) warning = "max_iter reached without convergence";
  if (!std::isfinite(grad_norm)) {
    gradient(data, p, loss, cfg.eta, gm, gth);
    double g2 = 0.0;
    if (ranks.d_s > 0)
      g2 += (gm * fm.f_s).squaredNorm() + (gth * fm.f_s).squaredNorm() +
            (gm.transpose() * fm.lambda_m1 + gth.transpose() * fm.lambda_th1).squaredNorm();
    if (ranks.d_m > 0)
      g2 += (gm * fm.f_m).squaredNorm() + (gm.transpose() * fm.lambda_m2).squaredNorm();
    if (ranks.d_theta > 0)
      g2 += (gth * fm.f_th).squaredNorm() + (gth.transpose() * fm.lambda_th2).squaredNorm();
    grad_norm = std::sqrt(g2);
  }

  rep.iterations = std::min(sweep, cfg.max_iter);
  rep.converged = converged;
  rep.warning = warning;
  rep.final_objective = objective(data, p, loss, cfg.eta);
  rep.grad_norm = grad_norm;
  out.model = std::move(fm);
  out.report = std::move(rep);
  return out;
}

}  // namespace sfmc

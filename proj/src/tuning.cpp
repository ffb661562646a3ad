#include "sfmc/tuning.hpp"

#include <Eigen/LU>
#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <random>
#include <tuple>

#include "sfmc/inference.hpp"
#include "sfmc/numeric.hpp"
#include "sfmc/svd_utils.hpp"

namespace sfmc {

long long degrees_of_freedom(FactorRanks ranks, Index n1, Index n2) {
  const long long ds = ranks.d_s, dm = ranks.d_m, dth = ranks.d_theta;
  return ds * (2 * n1 + n2 - ds) + (dm + dth) * (n1 + n2 - dm - dth);
}

double sigma2_naive(const MaskedData& data, const Mat& m_hat) {
  if (data.x.rows() != m_hat.rows() || data.x.cols() != m_hat.cols())
    throw InputError("sigma2_naive: dimension mismatch");
  double num = 0.0;
  long long count = 0;
  for (Index j = 0; j < data.n2(); ++j)
    for (Index i = 0; i < data.n1(); ++i)
      if (data.w(i, j) != 0.0) {
        const double r = data.x(i, j) - m_hat(i, j);
        num += r * r;
        ++count;
      }
  if (count == 0) throw InputError("sigma2_naive: no observed entries");
  return num / count;
}

double sigma2_corrected(const MaskedData& data, const FactorModel& fm, double eta) {
  const Index n1 = data.n1(), n2 = data.n2();
  const FactorRanks& r = fm.ranks;
  const Index d = r.total();
  const long long nobs = data.observed_count();
  if (nobs == 0) throw InputError("sigma2_corrected: no observed entries");
  const double pibar = static_cast<double>(nobs) / (n1 * n2);

  double tr_u = 0.0, tr_u2 = 0.0;
  if (d > 0) {
    Mat upsilon_theta = Mat::Zero(d, d);
    Mat upsilon_m = Mat::Zero(d, d);
    const double ct = pibar * (1.0 - pibar);
    if (r.d_s > 0) {
      upsilon_theta.topLeftCorner(r.d_s, r.d_s) = ct * fm.lambda_th1.transpose() * fm.lambda_th1;
      upsilon_m.topLeftCorner(r.d_s, r.d_s) = eta * pibar * fm.lambda_m1.transpose() * fm.lambda_m1;
    }
    if (r.d_s > 0 && r.d_theta > 0) {
      Mat c = ct * fm.lambda_th1.transpose() * fm.lambda_th2;
      upsilon_theta.block(0, r.d_s, r.d_s, r.d_theta) = c;
      upsilon_theta.block(r.d_s, 0, r.d_theta, r.d_s) = c.transpose();
    }
    if (r.d_theta > 0)
      upsilon_theta.block(r.d_s, r.d_s, r.d_theta, r.d_theta) =
          ct * fm.lambda_th2.transpose() * fm.lambda_th2;
    if (r.d_s > 0 && r.d_m > 0) {
      Mat c = eta * pibar * fm.lambda_m1.transpose() * fm.lambda_m2;
      upsilon_m.topRightCorner(r.d_s, r.d_m) = c;
      upsilon_m.bottomLeftCorner(r.d_m, r.d_s) = c.transpose();
    }
    if (r.d_m > 0)
      upsilon_m.bottomRightCorner(r.d_m, r.d_m) = eta * pibar * fm.lambda_m2.transpose() * fm.lambda_m2;

    Eigen::FullPivLU<Mat> lu(upsilon_theta + upsilon_m);
    if (!lu.isInvertible())
      throw NumericalError("sigma2_corrected: singular Upsilon_theta + Upsilon_m");
    Mat upsilon = lu.solve(upsilon_m);
    tr_u = upsilon.trace();
    tr_u2 = (upsilon * upsilon).trace();
  }

  ParamPair p = assemble(fm);
  double rss = 0.0;
  for (Index j = 0; j < n2; ++j)
    for (Index i = 0; i < n1; ++i)
      if (data.w(i, j) != 0.0) {
        const double res = data.x(i, j) - p.m(i, j);
        rss += res * res;
      }

  const double num = rss + n2 * (tr_u2 - tr_u) / eta;
  const double den = static_cast<double>(nobs) - n1 * r.rank_m() - 2.0 * n2 * tr_u + n2 * tr_u2;
  if (!(den > 0.0)) throw NumericalError("sigma2_corrected: correction infeasible (denominator " +
                                         std::to_string(den) + ")");
  const double value = num / den;
  if (!(value > 0.0))
    throw NumericalError("sigma2_corrected: nonpositive corrected variance " + std::to_string(value));
  return value;
}

double dispersion_hat(const MaskedData& data, const Mat& m_hat, const LossSpec& loss) {
  if (loss.kind != LossSpec::Kind::exp_family)
    throw InputError("dispersion_hat: exponential-family loss required");
  double num = 0.0;
  long long count = 0;
  for (Index j = 0; j < data.n2(); ++j)
    for (Index i = 0; i < data.n1(); ++i)
      if (data.w(i, j) != 0.0) {
        const double m = m_hat(i, j);
        const double b2 = loss.b_second(m);
        if (!(b2 > 0.0))
          throw NumericalError("dispersion_hat: b'' <= 0 at observed (" + std::to_string(i) + "," +
                               std::to_string(j) + ")");
        const double r = data.x(i, j) - loss.b_prime(m);
        num += r * r / b2;
        ++count;
      }
  if (count == 0) throw InputError("dispersion_hat: no observed entries");
  return num / count;
}

double ic_q_value(const MaskedData& data, const ParamPair& fitted, const LossSpec& loss,
                  double scale) {
  const Index n1 = data.n1(), n2 = data.n2();
  double q = 0.0;
  const double gauss_const = 0.5 * (std::log(2.0 * M_PI) + 1.0);
  const double log_sigma =
      loss.kind == LossSpec::Kind::exp_family ? 0.0 : 0.5 * std::log(scale);
  for (Index j = 0; j < n2; ++j) {
    for (Index i = 0; i < n1; ++i) {
      const double th = fitted.theta(i, j);
      q += softplus(th);
      if (data.w(i, j) != 0.0) {
        if (loss.kind == LossSpec::Kind::exp_family) {
          // negative observed log-likelihood with phi plugged in; the
          // c(x, phi) term is constant in (M, Theta) and omitted
          q += -th - loss.value(data.x(i, j), fitted.m(i, j)) / scale;
        } else {
          q += -th + log_sigma + gauss_const;
        }
      }
    }
  }
  return q;
}

IcRecord ic_value(const MaskedData& data, const ParamPair& fitted, const LossSpec& loss,
                  const RankEstimate& ranks, double mu, double ic_coef) {
  double scale;
  if (loss.kind == LossSpec::Kind::exp_family) {
    scale = dispersion_hat(data, fitted.m, loss);
  } else {
    scale = sigma2_naive(data, fitted.m);
  }
  if (!(scale > 0.0))
    throw NumericalError("ic_value: nonpositive scale estimate " + std::to_string(scale));
  IcRecord rec;
  rec.mu = mu;
  rec.ranks = ranks;
  rec.k_f = degrees_of_freedom(ranks.ranks, data.n1(), data.n2());
  rec.q_value = ic_q_value(data, fitted, loss, scale);
  rec.ic_value =
      rec.q_value + ic_coef * std::log(static_cast<double>(data.n1()) * data.n2()) * rec.k_f;
  return rec;
}

std::vector<double> default_mu_grid(const MaskedData& data, Index k, int count) {
  const Index n1 = data.n1(), n2 = data.n2();
  const Index kk = k > 0 ? k : McpConfig{}.effective_k(n1, n2);
  ParamPair p0 = spectral_init_pair(data, kk, kk);
  std::mt19937_64 rng(0x5eed5eedULL);
  Svd top = top_svd(p0.stacked(), 1, rng);
  const double s1 = top.s.size() > 0 ? top.s(0) : 1.0;
  const double hi = s1 / std::sqrt(static_cast<double>(n1 + n2));
  const double lo = 0.05 * hi;
  std::vector<double> grid(count);
  for (int i = 0; i < count; ++i) {
    const double t = count == 1 ? 0.0 : static_cast<double>(i) / (count - 1);
    grid[i] = lo * std::pow(hi / lo, t);
  }
  return grid;
}

MuSelection select_mu(const MaskedData& data, const LossSpec& loss, std::vector<double> grid,
                      const MuSelectOptions& opts) {
  if (grid.empty()) throw InputError("select_mu: empty grid");
  std::sort(grid.begin(), grid.end());

  MuSelection sel;
  sel.records.reserve(grid.size());

  struct RefitEntry {
    OracleFit fit;
    McpFit mcp;
    RankEstimate ranks;
    double q = 0.0;
    long long k_f = 0;
  };
  std::map<std::tuple<Index, Index, Index>, RefitEntry> memo;

  ParamPair warm;
  bool have_warm = false;
  double best_ic = std::numeric_limits<double>::infinity();

  for (std::size_t idx = 0; idx < grid.size(); ++idx) {
    const double mu = grid[idx];
    McpConfig mc;
    mc.mu = mu;
    mc.gamma = opts.gamma;
    mc.eta = opts.eta;
    mc.k = opts.k;
    mc.tol = opts.mcp_tol;
    mc.max_iter = opts.mcp_max_iter;
    mc.alpha_m = opts.fit_cfg.alpha_m;
    mc.alpha_theta = opts.fit_cfg.alpha_theta;

    IcRecord rec;
    rec.mu = mu;
    try {
      McpFit fit = fit_mcp(data, loss, mc, (opts.warm_start_path && have_warm) ? &warm : nullptr);
      if (opts.warm_start_path && fit.singular_values.size() > 0) {
        warm = fit.params;
        have_warm = true;
      }
      RankEstimate re = estimate_ranks(fit, mc.threshold());
      auto key = std::make_tuple(re.ranks.d_s, re.ranks.d_m, re.ranks.d_theta);
      auto it = memo.find(key);
      if (it == memo.end()) {
        FitConfig fc = opts.fit_cfg;
        fc.eta = opts.eta;
        const FactorModel* init_ptr = nullptr;
        FactorModel init;
        if (re.ranks.total() > 0) {
          try {
            init = canonicalize(fit.params, re.ranks);
            init_ptr = &init;
          } catch (const NumericalError&) {
            init_ptr = nullptr;
          }
        }
        RefitEntry entry;
        entry.fit = fit_known_rank(data, re.ranks, loss, fc, init_ptr);
        entry.mcp = fit;
        entry.ranks = re;
        ParamPair fitted = assemble(entry.fit.model);
        double scale;
        if (loss.kind == LossSpec::Kind::exp_family)
          scale = std::max(dispersion_hat(data, fitted.m, loss), 1e-12);
        else
          scale = std::max(sigma2_naive(data, fitted.m), 1e-12);
        entry.q = ic_q_value(data, fitted, loss, scale);
        entry.k_f = degrees_of_freedom(re.ranks, data.n1(), data.n2());
        it = memo.emplace(key, std::move(entry)).first;
      }
      rec.ranks = it->second.ranks;
      rec.ranks.threshold = mc.threshold();
      rec.q_value = it->second.q;
      rec.k_f = it->second.k_f;
      rec.ic_value = rec.q_value +
                     opts.ic_coef * std::log(static_cast<double>(data.n1()) * data.n2()) * rec.k_f;
      // ties break toward larger mu: scanning ascending, <= keeps the later point
      const double tie = 1e-9 * (1.0 + std::abs(best_ic));
      if (rec.ic_value <= best_ic + tie) {
        best_ic = std::min(best_ic, rec.ic_value);
        sel.mu = mu;
        sel.chosen_index = static_cast<Index>(idx);
        sel.ranks = it->second.ranks;
        sel.mcp = it->second.mcp;
        sel.refit = it->second.fit;
      }
    } catch (const RankConsistencyError& e) {
      rec.failed = true;
      rec.note = e.what();
    } catch (const Error& e) {
      rec.failed = true;
      rec.note = e.what();
    }
    sel.records.push_back(std::move(rec));
  }

  if (sel.chosen_index < 0) {
    std::string msg = "select_mu: every grid point failed:";
    for (const auto& r : sel.records) msg += "\n  mu=" + std::to_string(r.mu) + ": " + r.note;
    throw NumericalError(msg);
  }
  return sel;
}

namespace {

double golden_min(const std::function<double(double)>& f, double lo, double hi, double rel_tol) {
  const double phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = lo, b = hi;
  double c = b - phi * (b - a), d = a + phi * (b - a);
  double fc = f(c), fd = f(d);
  while ((b - a) > rel_tol * (std::abs(a) + std::abs(b)) * 0.5) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - phi * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + phi * (b - a);
      fd = f(d);
    }
  }
  return 0.5 * (a + b);
}

}  // namespace

EtaSelection select_eta(const MaskedData& data, const FactorModel& fm, const LossSpec& loss,
                        EtaMethod method) {
  if (method == EtaMethod::automatic) {
    switch (loss.kind) {
      case LossSpec::Kind::quadratic:
        method = EtaMethod::inverse_variance;
        break;
      case LossSpec::Kind::exp_family:
        method = EtaMethod::inverse_dispersion;
        break;
      case LossSpec::Kind::huber:
        throw InputError(
            "select_eta: no automatic rule for Huber loss (inference plug-ins unavailable)");
    }
  }

  EtaSelection out;
  out.method = method;
  ParamPair p = assemble(fm);

  switch (method) {
    case EtaMethod::inverse_variance: {
      out.sigma2_naive_value = sigma2_naive(data, p.m);
      out.sigma2_corrected_value = sigma2_corrected(data, fm, 1.0);
      if (!(out.sigma2_corrected_value > 0.0))
        throw NumericalError("select_eta: nonpositive variance estimate");
      out.eta_hat = 1.0 / out.sigma2_corrected_value;
      break;
    }
    case EtaMethod::inverse_dispersion: {
      out.phi_hat = dispersion_hat(data, p.m, loss);
      if (!(out.phi_hat > 0.0)) throw NumericalError("select_eta: nonpositive dispersion estimate");
      out.eta_hat = 1.0 / out.phi_hat;
      break;
    }
    case EtaMethod::numeric_amse_min: {
      InferenceWeights w = build_weights(data, fm, loss, 1.0);
      auto f = [&](double log_eta) { return amse_sample(w, fm, std::exp(log_eta)); };
      const int pts = 25;
      const double llo = std::log(1e-3), lhi = std::log(1e3);
      double best_l = llo, best_v = std::numeric_limits<double>::infinity();
      for (int i = 0; i < pts; ++i) {
        const double l = llo + (lhi - llo) * i / (pts - 1);
        const double v = f(l);
        if (v < best_v) {
          best_v = v;
          best_l = l;
        }
      }
      const double span = (lhi - llo) / (pts - 1);
      const double l_star =
          golden_min(f, std::max(llo, best_l - span), std::min(lhi, best_l + span), 1e-3);
      out.eta_hat = std::exp(l_star);
      if (loss.kind == LossSpec::Kind::quadratic) out.sigma2_naive_value = sigma2_naive(data, p.m);
      break;
    }
    case EtaMethod::automatic:
      break;  // unreachable
  }
  if (!(out.eta_hat > 0.0) || !std::isfinite(out.eta_hat))
    throw NumericalError("select_eta: invalid eta " + std::to_string(out.eta_hat));
  return out;
}

}  // namespace sfmc

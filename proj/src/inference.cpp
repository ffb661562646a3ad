#include "sfmc/inference.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>

#include "sfmc/numeric.hpp"
#include "sfmc/tuning.hpp"

namespace sfmc {

Mat InferenceWeights::psi(Index j, double eta_value) const {
  return psi_theta_part.at(j) + eta_value * psi_m_part.at(j);
}

Mat InferenceWeights::psi_tilde(Index j, double eta_value) const {
  return psi_theta_part.at(j) + eta_value * eta_value * psi_m_tilde_part.at(j);
}

namespace {

// Symmetric inverse with a condition-number guard.
Mat guarded_inverse(const Mat& a, const char* what, double cond_limit = 1e12) {
  if (a.rows() == 0) return a;
  Eigen::SelfAdjointEigenSolver<Mat> eig(0.5 * (a + a.transpose()));
  const Vec& ev = eig.eigenvalues();
  const double lo = ev(0), hi = ev(ev.size() - 1);
  if (!(lo > 0.0) || hi / lo > cond_limit)
    throw NumericalError(std::string("degenerate information matrix (") + what +
                         "): condition number " +
                         std::to_string(lo > 0.0 ? hi / lo : std::numeric_limits<double>::infinity()));
  return eig.eigenvectors() * ev.cwiseInverse().asDiagonal() * eig.eigenvectors().transpose();
}

[[noreturn]] void throw_plugin(Index i, Index j, double v) {
  throw NumericalError("non-finite inference plug-in at (" + std::to_string(i) + "," +
                       std::to_string(j) + "): " + std::to_string(v));
}

}  // namespace

InferenceWeights build_weights(const MaskedData& data, const FactorModel& fm, const LossSpec& loss,
                               double eta) {
  data.validate();
  if (loss.kind == LossSpec::Kind::huber)
    throw InputError("build_weights: Huber loss has no model-implied second moments");
  const Index n1 = data.n1(), n2 = data.n2();
  const FactorRanks& r = fm.ranks;
  const Index d = r.total();

  ParamPair p = assemble(fm);

  // Model-implied moment scales for unobserved cells.
  double sigma2 = 1.0, phi = 1.0;
  if (loss.kind == LossSpec::Kind::quadratic) {
    sigma2 = sigma2_naive(data, p.m);
  } else {
    phi = dispersion_hat(data, p.m, loss);
  }

  // Entrywise plug-in fields.
  Mat g(n1, n2);       // pi (1 - pi)
  Mat pi_a(n1, n2);    // pi * (-E l'')
  Mat pi_b(n1, n2);    // pi * E |l'|^2
  for (Index j = 0; j < n2; ++j) {
    for (Index i = 0; i < n1; ++i) {
      const double th = p.theta(i, j);
      const double pi = expit(th);
      g(i, j) = logistic_weight(th);
      double a, b;
      if (data.w(i, j) != 0.0) {
        const double x = data.x(i, j);
        const double m = p.m(i, j);
        a = -loss.second(x, m);
        b = loss.deriv(x, m);
        b *= b;
      } else if (loss.kind == LossSpec::Kind::quadratic) {
        a = 1.0;
        b = sigma2;
      } else {
        const double bpp = loss.b_second(p.m(i, j));
        a = bpp;
        b = phi * bpp;
      }
      if (!std::isfinite(a)) throw_plugin(i, j, a);
      if (!std::isfinite(b)) throw_plugin(i, j, b);
      pi_a(i, j) = pi * a;
      pi_b(i, j) = pi * b;
    }
  }

  // Stacked factor and loading frames; block order (shared, theta, m).
  Mat f_th_frame(n2, r.rank_theta());
  if (r.d_s > 0) f_th_frame.leftCols(r.d_s) = fm.f_s;
  if (r.d_theta > 0) f_th_frame.rightCols(r.d_theta) = fm.f_th;
  Mat f_m_frame(n2, r.rank_m());
  if (r.d_s > 0) f_m_frame.leftCols(r.d_s) = fm.f_s;
  if (r.d_m > 0) f_m_frame.rightCols(r.d_m) = fm.f_m;

  Mat e_theta = Mat::Zero(n1, d);
  Mat e_m = Mat::Zero(n1, d);
  if (r.d_s > 0) {
    e_theta.leftCols(r.d_s) = fm.lambda_th1;
    e_m.leftCols(r.d_s) = fm.lambda_m1;
  }
  if (r.d_theta > 0) e_theta.middleCols(r.d_s, r.d_theta) = fm.lambda_th2;
  if (r.d_m > 0) e_m.rightCols(r.d_m) = fm.lambda_m2;

  InferenceWeights w;
  w.ranks = r;
  w.n1 = n1;
  w.n2 = n2;
  w.eta = eta;
  w.phi_theta.resize(n1);
  w.phi_m.resize(n1);
  w.phi_m_tilde.resize(n1);
  w.psi_theta_part.resize(n2);
  w.psi_m_part.resize(n2);
  w.psi_m_tilde_part.resize(n2);

  for (Index i = 0; i < n1; ++i) {
    Mat fw = f_th_frame.array().colwise() * g.row(i).transpose().array();
    w.phi_theta[i] = (fw.transpose() * f_th_frame) / n2;
    Mat fa = f_m_frame.array().colwise() * pi_a.row(i).transpose().array();
    w.phi_m[i] = (fa.transpose() * f_m_frame) / n2;
    Mat fb = f_m_frame.array().colwise() * pi_b.row(i).transpose().array();
    w.phi_m_tilde[i] = (fb.transpose() * f_m_frame) / n2;
  }

  for (Index j = 0; j < n2; ++j) {
    Mat et = e_theta.array().colwise() * g.col(j).array();
    w.psi_theta_part[j] = (et.transpose() * e_theta) / n1;
    Mat ea = e_m.array().colwise() * pi_a.col(j).array();
    w.psi_m_part[j] = (ea.transpose() * e_m) / n1;
    Mat eb = e_m.array().colwise() * pi_b.col(j).array();
    w.psi_m_tilde_part[j] = (eb.transpose() * e_m) / n1;
  }
  return w;
}

EntryVariance entry_variance(const InferenceWeights& w, const FactorModel& fm, Index i, Index j,
                             double eta) {
  const FactorRanks& r = fm.ranks;
  if (i < 0 || i >= w.n1 || j < 0 || j >= w.n2)
    throw InputError("entry_variance: index out of range");
  const Index d = r.total();
  if (d == 0) throw NumericalError("degenerate information matrix (empty model)");

  const double n1 = static_cast<double>(w.n1), n2 = static_cast<double>(w.n2);
  const double scale_row = (n1 + n2) / n2;
  const double scale_col = (n1 + n2) / n1;

  Mat psi = w.psi(j, eta);
  Mat psi_tilde = w.psi_tilde(j, eta);
  Mat psi_inv = guarded_inverse(psi, "Psi_j");
  Mat psi_sandwich = psi_inv * psi_tilde * psi_inv;

  EntryVariance out;

  // theta entry: loading-row uncertainty + factor-row uncertainty
  {
    Vec u(r.rank_theta());
    if (r.d_s > 0) u.head(r.d_s) = fm.f_s.row(j).transpose();
    if (r.d_theta > 0) u.tail(r.d_theta) = fm.f_th.row(j).transpose();
    double term1 = 0.0;
    if (u.size() > 0) {
      Mat phi_inv = guarded_inverse(w.phi_theta[i], "Phi_theta_i");
      term1 = scale_row * u.dot(phi_inv * u);
    }
    Vec v = Vec::Zero(d);
    if (r.d_s > 0) v.head(r.d_s) = fm.lambda_th1.row(i).transpose();
    if (r.d_theta > 0) v.segment(r.d_s, r.d_theta) = fm.lambda_th2.row(i).transpose();
    out.v_theta = term1 + scale_col * v.dot(psi_sandwich * v);
  }

  // m entry
  {
    Vec u(r.rank_m());
    if (r.d_s > 0) u.head(r.d_s) = fm.f_s.row(j).transpose();
    if (r.d_m > 0) u.tail(r.d_m) = fm.f_m.row(j).transpose();
    double term1 = 0.0;
    if (u.size() > 0) {
      Mat phi_inv = guarded_inverse(w.phi_m[i], "Phi_m_i");
      term1 = scale_row * u.dot(phi_inv * w.phi_m_tilde[i] * phi_inv * u);
    }
    Vec v = Vec::Zero(d);
    if (r.d_s > 0) v.head(r.d_s) = fm.lambda_m1.row(i).transpose();
    if (r.d_m > 0) v.tail(r.d_m) = fm.lambda_m2.row(i).transpose();
    out.v_m = term1 + scale_col * v.dot(psi_sandwich * v);
  }

  if (!(out.v_theta > 0.0) || !(out.v_m > 0.0) || !std::isfinite(out.v_theta) ||
      !std::isfinite(out.v_m))
    throw NumericalError("entry_variance: nonpositive or non-finite variance at (" +
                         std::to_string(i) + "," + std::to_string(j) + ")");
  return out;
}

double amse_sample(const InferenceWeights& w, const FactorModel& fm, double eta) {
  const FactorRanks& r = fm.ranks;
  const Index d = r.total();

  double first = 0.0;
  for (Index i = 0; i < w.n1; ++i) {
    if (w.phi_m[i].rows() == 0) continue;
    Mat phi_inv = guarded_inverse(w.phi_m[i], "Phi_m_i");
    first += (phi_inv * w.phi_m_tilde[i] * phi_inv).trace();
  }

  Mat e_m = Mat::Zero(w.n1, d);
  if (r.d_s > 0) e_m.leftCols(r.d_s) = fm.lambda_m1;
  if (r.d_m > 0) e_m.rightCols(r.d_m) = fm.lambda_m2;
  Mat gram = e_m.transpose() * e_m;

  double second = 0.0;
  for (Index j = 0; j < w.n2; ++j) {
    Mat psi_inv = guarded_inverse(w.psi(j, eta), "Psi_j");
    second += (psi_inv * w.psi_tilde(j, eta) * psi_inv * gram).trace();
  }
  second /= static_cast<double>(w.n1);
  return first + second;
}

}  // namespace sfmc

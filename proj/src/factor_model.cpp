#include "sfmc/factor_model.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>
#include <algorithm>
#include <cmath>

#include "sfmc/svd_utils.hpp"

namespace sfmc {

FactorModel FactorModel::zeros(Index n1, Index n2, FactorRanks ranks) {
  FactorModel fm;
  fm.lambda_m1 = Mat::Zero(n1, ranks.d_s);
  fm.lambda_m2 = Mat::Zero(n1, ranks.d_m);
  fm.lambda_th1 = Mat::Zero(n1, ranks.d_s);
  fm.lambda_th2 = Mat::Zero(n1, ranks.d_theta);
  fm.f_s = Mat::Zero(n2, ranks.d_s);
  fm.f_m = Mat::Zero(n2, ranks.d_m);
  fm.f_th = Mat::Zero(n2, ranks.d_theta);
  fm.ranks = ranks;
  return fm;
}

namespace {

void require_dims(const Mat& a, Index rows, Index cols, const char* name) {
  if (a.rows() != rows || a.cols() != cols)
    throw InputError(std::string("assemble: block ") + name + " is " + std::to_string(a.rows()) +
                     "x" + std::to_string(a.cols()) + ", expected " + std::to_string(rows) + "x" +
                     std::to_string(cols));
}

}  // namespace

ParamPair assemble(const FactorModel& fm) {
  const Index n1 = fm.n1();
  const Index n2 = fm.n2();
  const FactorRanks& r = fm.ranks;
  require_dims(fm.lambda_m1, n1, r.d_s, "lambda_m1");
  require_dims(fm.lambda_th1, n1, r.d_s, "lambda_th1");
  require_dims(fm.lambda_m2, n1, r.d_m, "lambda_m2");
  require_dims(fm.lambda_th2, n1, r.d_theta, "lambda_th2");
  require_dims(fm.f_s, n2, r.d_s, "f_s");
  require_dims(fm.f_m, n2, r.d_m, "f_m");
  require_dims(fm.f_th, n2, r.d_theta, "f_th");

  ParamPair p;
  p.m = Mat::Zero(n1, n2);
  p.theta = Mat::Zero(n1, n2);
  if (r.d_s > 0) {
    p.m.noalias() += fm.lambda_m1 * fm.f_s.transpose();
    p.theta.noalias() += fm.lambda_th1 * fm.f_s.transpose();
  }
  if (r.d_m > 0) p.m.noalias() += fm.lambda_m2 * fm.f_m.transpose();
  if (r.d_theta > 0) p.theta.noalias() += fm.lambda_th2 * fm.f_th.transpose();
  return p;
}

namespace {

// Right-singular basis of a with the leading r columns; errors when the r-th
// singular value is numerically zero.
Mat row_space_basis(const Mat& a, Index r, const char* which) {
  if (r == 0) return Mat(a.cols(), 0);
  Svd svd = thin_svd(a);
  if (svd.s.size() < r)
    throw NumericalError(std::string("canonicalize: ") + which + " has fewer than " +
                         std::to_string(r) + " singular values");
  const double smax = svd.s(0);
  const double cutoff = 1e-10 * smax;
  if (!(svd.s(r - 1) > cutoff))
    throw NumericalError(std::string("canonicalize: ") + which +
                         " numerically rank-deficient: sigma_" + std::to_string(r) + " = " +
                         std::to_string(svd.s(r - 1)) + " vs cutoff " + std::to_string(cutoff) +
                         " (gap " + std::to_string(cutoff - svd.s(r - 1)) + ")");
  return svd.v.leftCols(r);
}

// Rotate a factor block and its loading columns so the loading Gram matrix is
// diagonal with decreasing entries.
void diagonalize_block(Mat& f, std::vector<Mat*> loadings) {
  const Index d = f.cols();
  if (d == 0) return;
  Mat gram = Mat::Zero(d, d);
  for (Mat* l : loadings) gram += l->transpose() * (*l);
  Eigen::SelfAdjointEigenSolver<Mat> eig(gram);
  // ascending eigenvalues -> reverse for decreasing diagonal
  Mat rot(d, d);
  for (Index k = 0; k < d; ++k) rot.col(k) = eig.eigenvectors().col(d - 1 - k);
  f = f * rot;
  for (Mat* l : loadings) *l = (*l) * rot;
}

// Fix the sign of each factor column: largest-magnitude entry positive.
void fix_signs(Mat& f, std::vector<Mat*> loadings) {
  for (Index k = 0; k < f.cols(); ++k) {
    Index idx = 0;
    f.col(k).cwiseAbs().maxCoeff(&idx);
    if (f(idx, k) < 0.0) {
      f.col(k) = -f.col(k);
      for (Mat* l : loadings) l->col(k) = -l->col(k);
    }
  }
}

}  // namespace

FactorModel canonicalize(const Mat& m, const Mat& theta, FactorRanks ranks) {
  if (m.rows() != theta.rows() || m.cols() != theta.cols())
    throw InputError("canonicalize: m and theta dimensions differ");
  const Index n1 = m.rows();
  const Index n2 = m.cols();
  const Index rm = ranks.rank_m();
  const Index rth = ranks.rank_theta();
  if (rm > std::min(n1, n2) || rth > std::min(n1, n2))
    throw InputError("canonicalize: requested ranks exceed matrix dimensions");

  const Mat vm = row_space_basis(m, rm, "m");
  const Mat vth = row_space_basis(theta, rth, "theta");

  const double sqrt_n2 = std::sqrt(static_cast<double>(n2));

  // Shared directions: top-d_s canonical pairs of the two row spaces,
  // symmetrized by averaging both mapped canonical vectors.
  Mat us(n2, ranks.d_s);
  if (ranks.d_s > 0) {
    Mat c = vm.transpose() * vth;
    Eigen::JacobiSVD<Mat> csvd(c, Eigen::ComputeFullU | Eigen::ComputeFullV);
    if (csvd.singularValues().size() < ranks.d_s)
      throw NumericalError("canonicalize: shared rank exceeds canonical pair count");
    Mat raw(n2, ranks.d_s);
    for (Index k = 0; k < ranks.d_s; ++k) {
      Vec p = vm * csvd.matrixU().col(k);
      Vec q = vth * csvd.matrixV().col(k);
      raw.col(k) = p + q;
    }
    us = orthonormalize(raw);
  }

  // Specific directions: orthonormal completions of the projections onto the
  // orthocomplement of the shared block.
  auto specific_basis = [&](const Mat& v, Index d) -> Mat {
    if (d == 0) return Mat(n2, 0);
    Mat g = v;
    if (us.cols() > 0) g -= us * (us.transpose() * v);
    Svd svd = thin_svd(g);
    return svd.u.leftCols(d);
  };
  Mat um = specific_basis(vm, ranks.d_m);
  Mat uth = specific_basis(vth, ranks.d_theta);

  FactorModel fm;
  fm.ranks = ranks;
  fm.f_s = sqrt_n2 * us;
  fm.f_m = sqrt_n2 * um;
  fm.f_th = sqrt_n2 * uth;

  // Least squares loadings; [F_s F_m] has orthogonal columns of norm sqrt(n2),
  // so projection is a single product.
  fm.lambda_m1 = m * us / sqrt_n2;
  fm.lambda_m2 = m * um / sqrt_n2;
  fm.lambda_th1 = theta * us / sqrt_n2;
  fm.lambda_th2 = theta * uth / sqrt_n2;

  diagonalize_block(fm.f_s, {&fm.lambda_m1, &fm.lambda_th1});
  diagonalize_block(fm.f_m, {&fm.lambda_m2});
  diagonalize_block(fm.f_th, {&fm.lambda_th2});

  fix_signs(fm.f_s, {&fm.lambda_m1, &fm.lambda_th1});
  fix_signs(fm.f_m, {&fm.lambda_m2});
  fix_signs(fm.f_th, {&fm.lambda_th2});
  return fm;
}

FactorModel canonicalize(const ParamPair& p, FactorRanks ranks) {
  return canonicalize(p.m, p.theta, ranks);
}

double shared_coupling_xi(const FactorModel& fm) {
  if (fm.ranks.d_m == 0 || fm.ranks.d_theta == 0) return 0.0;
  Mat cross = fm.f_m.transpose() * fm.f_th / static_cast<double>(fm.n2());
  Eigen::JacobiSVD<Mat> svd(cross);
  return svd.singularValues().size() > 0 ? svd.singularValues()(0) : 0.0;
}

SigmaBoundDiagnostic check_sigma_lower_bound(const FactorModel& fm) {
  SigmaBoundDiagnostic diag;
  diag.xi = shared_coupling_xi(fm);
  ParamPair p = assemble(fm);
  const Index d = fm.ranks.total();
  SigmaBoundDiagnostic out = diag;
  Svd sh = thin_svd(p.stacked());
  Svd sm = thin_svd(p.m);
  Svd sth = thin_svd(p.theta);
  auto sigma_at = [](const Svd& s, Index k) -> double {
    if (k <= 0) return std::numeric_limits<double>::infinity();
    return k <= s.s.size() ? s.s(k - 1) : 0.0;
  };
  out.lhs = sigma_at(sh, d);
  const double sig_m = sigma_at(sm, fm.ranks.rank_m());
  const double sig_th = sigma_at(sth, fm.ranks.rank_theta());
  out.rhs = std::sqrt(std::max(0.0, 1.0 - out.xi)) * std::min(sig_m, sig_th);
  if (!std::isfinite(out.rhs)) out.rhs = 0.0;
  out.holds = out.lhs >= out.rhs - 1e-8;
  return out;
}

bool is_canonical(const FactorModel& fm, std::string* why) {
  const double n2 = static_cast<double>(fm.n2());
  auto fail = [&](const std::string& msg) {
    if (why) *why = msg;
    return false;
  };

  auto check_orth = [&](const Mat& f, const char* name) {
    if (f.cols() == 0) return true;
    Mat g = f.transpose() * f / n2;
    if ((g - Mat::Identity(f.cols(), f.cols())).cwiseAbs().maxCoeff() > 1e-8)
      return fail(std::string(name) + " not orthonormal after scaling");
    return true;
  };
  if (!check_orth(fm.f_s, "f_s") || !check_orth(fm.f_m, "f_m") || !check_orth(fm.f_th, "f_th"))
    return false;

  if (fm.ranks.d_s > 0 && fm.ranks.d_m > 0 &&
      (fm.f_s.transpose() * fm.f_m).cwiseAbs().maxCoeff() > 1e-8 * n2)
    return fail("f_s'f_m nonzero");
  if (fm.ranks.d_s > 0 && fm.ranks.d_theta > 0 &&
      (fm.f_s.transpose() * fm.f_th).cwiseAbs().maxCoeff() > 1e-8 * n2)
    return fail("f_s'f_th nonzero");
  if (shared_coupling_xi(fm) >= 1.0) return fail("xi >= 1");

  auto check_diag = [&](const Mat& gram, const char* name) {
    if (gram.rows() == 0) return true;
    double max_diag = gram.diagonal().cwiseAbs().maxCoeff();
    Mat off = gram;
    off.diagonal().setZero();
    if (off.cwiseAbs().maxCoeff() > 1e-6 * std::max(max_diag, 1e-300))
      return fail(std::string(name) + " Gram not diagonal");
    return true;
  };
  if (!check_diag(fm.lambda_m1.transpose() * fm.lambda_m1 + fm.lambda_th1.transpose() * fm.lambda_th1,
                  "shared loading"))
    return false;
  if (!check_diag(fm.lambda_m2.transpose() * fm.lambda_m2, "lambda_m2")) return false;
  if (!check_diag(fm.lambda_th2.transpose() * fm.lambda_th2, "lambda_th2")) return false;
  return true;
}

}  // namespace sfmc

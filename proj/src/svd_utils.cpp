#include "sfmc/svd_utils.hpp"

#include <Eigen/QR>
#include <Eigen/SVD>
#include <algorithm>

namespace sfmc {

Svd thin_svd(const Mat& a) {
  Eigen::BDCSVD<Mat> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  return Svd{svd.matrixU(), svd.singularValues(), svd.matrixV()};
}

Mat orthonormalize(const Mat& y) {
  if (y.cols() == 0) return y;
  Eigen::HouseholderQR<Mat> qr(y);
  Mat q = qr.householderQ() * Mat::Identity(y.rows(), std::min(y.rows(), y.cols()));
  return q;
}

Mat truncate_rank(const Mat& a, Index k) {
  if (k <= 0) return Mat::Zero(a.rows(), a.cols());
  Svd svd = thin_svd(a);
  const Index r = std::min<Index>(k, svd.s.size());
  return svd.u.leftCols(r) * svd.s.head(r).asDiagonal() * svd.v.leftCols(r).transpose();
}

Svd top_svd(const Mat& a, Index k, std::mt19937_64& rng, const Mat* warm_u, int power_iters,
            Index oversample) {
  const Index minDim = std::min(a.rows(), a.cols());
  k = std::min(k, minDim);
  if (k <= 0) return Svd{Mat(a.rows(), 0), Vec(0), Mat(a.cols(), 0)};

  const Index q = std::min<Index>(k + oversample, minDim);
  if (q >= (3 * minDim) / 4) {
    Svd full = thin_svd(a);
    return Svd{full.u.leftCols(k), full.s.head(k), full.v.leftCols(k)};
  }

  std::normal_distribution<double> gauss(0.0, 1.0);
  const Index extra = q;
  Mat y(a.rows(), q + (warm_u ? warm_u->cols() : 0));
  if (warm_u && warm_u->cols() > 0) y.leftCols(warm_u->cols()) = *warm_u;
  Mat omega(a.cols(), extra);
  for (Index j = 0; j < omega.cols(); ++j)
    for (Index i = 0; i < omega.rows(); ++i) omega(i, j) = gauss(rng);
  y.rightCols(extra) = a * omega;

  Mat qmat = orthonormalize(y);
  for (int it = 0; it < power_iters; ++it) {
    Mat z = orthonormalize(a.transpose() * qmat);
    qmat = orthonormalize(a * z);
  }

  Mat b = qmat.transpose() * a;  // (q' x cols)
  Eigen::BDCSVD<Mat> small(b, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Index r = std::min<Index>(k, small.singularValues().size());
  return Svd{qmat * small.matrixU().leftCols(r), small.singularValues().head(r),
             small.matrixV().leftCols(r)};
}

}  // namespace sfmc

#pragma once

#include <random>

#include "sfmc/types.hpp"

namespace sfmc {

struct Svd {
  Mat u;  // rows x r, orthonormal columns
  Vec s;  // r, descending
  Mat v;  // cols x r, orthonormal columns

  Mat reconstruct() const { return u * s.asDiagonal() * v.transpose(); }
};

// Exact thin SVD (LAPACK-style divide and conquer).
Svd thin_svd(const Mat& a);

// Top-k singular triplets. Uses the exact SVD when k is a large fraction of
// the matrix, otherwise randomized subspace iteration with optional warm
// start. The rng drives the Gaussian test matrix only.
Svd top_svd(const Mat& a, Index k, std::mt19937_64& rng, const Mat* warm_u = nullptr,
            int power_iters = 2, Index oversample = 10);

// Rank-k truncation of a (exact SVD path).
Mat truncate_rank(const Mat& a, Index k);

// Orthonormalize the columns of y in place (thin Householder QR).
Mat orthonormalize(const Mat& y);

}  // namespace sfmc

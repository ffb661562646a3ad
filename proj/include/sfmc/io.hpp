#pragma once

#include <string>
#include <vector>

#include "sfmc/types.hpp"

namespace sfmc {

struct RatingTriplet {
  long user = 0;  // 1-based
  long item = 0;  // 1-based
  double rating = 0.0;
  long long timestamp = 0;
  bool has_timestamp = false;
};

struct RatingsTriplets {
  std::vector<RatingTriplet> rows;
  Index n1 = 0;  // max user id
  Index n2 = 0;  // max item id
};

// Tab- (MovieLens "user item rating [timestamp]") or comma-separated
// triplets. delimiter '\0' auto-detects from the first data line. Errors:
// malformed line -> InputError with the line number; duplicate (user, item)
// -> InputError listing offenders.
RatingsTriplets load_triplets(const std::string& path, char delimiter = '\0');
void save_triplets(const std::string& path, const RatingsTriplets& t, char delimiter = '\t');

// Mask with ones at rated cells; x is NaN where unobserved.
MaskedData to_masked(const RatingsTriplets& t);

// Entrywise clamp to [lo, hi].
Mat predict_clipped(const Mat& m_hat, double lo = 1.0, double hi = 5.0);

// Mean squared prediction error over the test cells.
double mspe(const RatingsTriplets& test, const Mat& m_pre);

// Rating-weighted expected percentile ranking; 0 = best-predicted, ties
// averaged, single-item users assigned rank 0 and included.
double percentile_rank_bar(const RatingsTriplets& test, const Mat& m_pre);

// d_k(V1, V2) = sqrt((1/k) sum_{i<=k} (1 - sigma_i^2)) for orthonormal V1, V2
// with k <= d1 <= d2.
double subspace_distance(const Mat& v1, const Mat& v2, Index k);

// Dense comma-separated matrix with a header row.
Mat load_dense_csv(const std::string& path);
void save_dense_csv(const std::string& path, const Mat& a);

}  // namespace sfmc

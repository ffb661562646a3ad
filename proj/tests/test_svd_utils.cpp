#include <doctest.h>

#include <random>

#include "sfmc/svd_utils.hpp"
#include "test_helpers.hpp"

using namespace sfmc;
using sfmc::testing::random_matrix;

TEST_SUITE_BEGIN("svd_utils");

TEST_CASE("top_svd agrees with the exact SVD on low-rank plus noise") {
  std::mt19937_64 rng(5);
  Mat low = random_matrix(120, 6, rng) * random_matrix(80, 6, rng).transpose();
  Mat a = low + 1e-3 * random_matrix(120, 80, rng);

  Svd exact = thin_svd(a);
  std::mt19937_64 seed(7);
  Svd approx = top_svd(a, 6, seed);
  REQUIRE(approx.s.size() == 6);
  for (Index i = 0; i < 6; ++i)
    CHECK(approx.s(i) == doctest::Approx(exact.s(i)).epsilon(1e-8));
  // reconstruction quality matches the exact truncation
  Mat exact_rec = exact.u.leftCols(6) * exact.s.head(6).asDiagonal() * exact.v.leftCols(6).transpose();
  CHECK((approx.reconstruct() - exact_rec).norm() / exact_rec.norm() < 1e-6);
}

TEST_CASE("top_svd with warm start refines the previous subspace") {
  std::mt19937_64 rng(6);
  Mat a = random_matrix(90, 5, rng) * random_matrix(60, 5, rng).transpose() +
          0.05 * random_matrix(90, 60, rng);
  std::mt19937_64 s1(1);
  Svd first = top_svd(a, 5, s1);
  std::mt19937_64 s2(2);
  Svd warm = top_svd(a, 5, s2, &first.u);
  Svd exact = thin_svd(a);
  for (Index i = 0; i < 5; ++i)
    CHECK(warm.s(i) == doctest::Approx(exact.s(i)).epsilon(1e-7));
}

TEST_CASE("truncate_rank zero gives the zero matrix") {
  std::mt19937_64 rng(8);
  Mat a = random_matrix(7, 5, rng);
  CHECK(truncate_rank(a, 0).norm() == 0.0);
  CHECK((truncate_rank(a, 5) - a).norm() < 1e-10 * a.norm());
}

TEST_CASE("orthonormalize produces orthonormal columns") {
  std::mt19937_64 rng(9);
  Mat q = orthonormalize(random_matrix(30, 4, rng));
  CHECK((q.transpose() * q - Mat::Identity(4, 4)).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_SUITE_END();

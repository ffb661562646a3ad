#include <doctest.h>

#include <random>

#include "sfmc/factor_model.hpp"
#include "sfmc/svd_utils.hpp"
#include "test_helpers.hpp"

using namespace sfmc;
using sfmc::testing::random_canonical_model;
using sfmc::testing::random_raw_model;
using sfmc::testing::rel_error;

TEST_SUITE_BEGIN("factor_model");

TEST_CASE("assemble: zero blocks give zero matrices") {
  FactorModel fm = FactorModel::zeros(4, 6, FactorRanks{2, 1, 1});
  ParamPair p = assemble(fm);
  CHECK(p.m.norm() == 0.0);
  CHECK(p.theta.norm() == 0.0);
}

TEST_CASE("assemble: rank-1 ones outer product") {
  FactorModel fm = FactorModel::zeros(3, 5, FactorRanks{1, 0, 0});
  fm.lambda_m1.setOnes();
  fm.f_s.setOnes();
  ParamPair p = assemble(fm);
  CHECK((p.m - Mat::Ones(3, 5)).cwiseAbs().maxCoeff() == 0.0);
  CHECK(p.theta.norm() == 0.0);
}

TEST_CASE("assemble matches the entrywise double-loop oracle") {
  std::mt19937_64 rng(11);
  FactorModel fm = random_raw_model(5, 5, FactorRanks{2, 1, 1}, rng);
  ParamPair p = assemble(fm);

  Mat m_oracle = Mat::Zero(5, 5);
  Mat th_oracle = Mat::Zero(5, 5);
  for (Index i = 0; i < 5; ++i)
    for (Index j = 0; j < 5; ++j) {
      for (Index k = 0; k < 2; ++k) {
        m_oracle(i, j) += fm.lambda_m1(i, k) * fm.f_s(j, k);
        th_oracle(i, j) += fm.lambda_th1(i, k) * fm.f_s(j, k);
      }
      m_oracle(i, j) += fm.lambda_m2(i, 0) * fm.f_m(j, 0);
      th_oracle(i, j) += fm.lambda_th2(i, 0) * fm.f_th(j, 0);
    }
  CHECK(rel_error(p.m, m_oracle) < 1e-14);
  CHECK(rel_error(p.theta, th_oracle) < 1e-14);
}

TEST_CASE("assemble: dimension mismatch names the offending block") {
  FactorModel fm = FactorModel::zeros(4, 6, FactorRanks{2, 1, 1});
  fm.f_m = Mat::Zero(5, 1);  // wrong row count
  CHECK_THROWS_WITH_AS(assemble(fm), doctest::Contains("f_m"), InputError);
}

TEST_CASE("assemble is linear in each block") {
  std::mt19937_64 rng(12);
  FactorModel fm = random_raw_model(6, 7, FactorRanks{2, 2, 1}, rng);
  ParamPair base = assemble(fm);
  FactorModel scaled = fm;
  const double c = 3.25;
  scaled.lambda_m2 *= c;
  ParamPair p2 = assemble(scaled);
  // specific part of m scales exactly; shared part unchanged
  Mat shared = fm.lambda_m1 * fm.f_s.transpose();
  CHECK(rel_error(p2.m - shared, c * (base.m - shared)) < 1e-12);
  CHECK(rel_error(p2.theta, base.theta) == 0.0);
}

TEST_CASE("canonicalize lands on the constraints and reproduces the pair") {
  std::mt19937_64 rng(13);
  for (int rep = 0; rep < 20; ++rep) {
    FactorRanks ranks{2, 2, 1};
    FactorModel raw = random_raw_model(18, 22, ranks, rng);
    ParamPair p = assemble(raw);
    FactorModel canon = canonicalize(p, ranks);
    std::string why;
    CHECK_MESSAGE(is_canonical(canon, &why), why);
    ParamPair back = assemble(canon);
    CHECK(rel_error(back.m, p.m) < 1e-8);
    CHECK(rel_error(back.theta, p.theta) < 1e-8);
  }
}

TEST_CASE("canonicalize is idempotent up to column signs") {
  std::mt19937_64 rng(14);
  FactorRanks ranks{2, 1, 2};
  FactorModel canon = random_canonical_model(15, 20, ranks, rng);
  FactorModel again = canonicalize(assemble(canon), ranks);
  // factor blocks agree up to per-column sign flips; signs are fixed by the
  // largest-entry rule, so they agree exactly
  CHECK(rel_error(again.f_s, canon.f_s) < 1e-8);
  CHECK(rel_error(again.f_m, canon.f_m) < 1e-8);
  CHECK(rel_error(again.f_th, canon.f_th) < 1e-8);
  CHECK(rel_error(again.lambda_m1, canon.lambda_m1) < 1e-8);
  CHECK(rel_error(again.lambda_th2, canon.lambda_th2) < 1e-8);
}

TEST_CASE("canonicalize with d_s = 0 factors the two matrices independently") {
  std::mt19937_64 rng(15);
  FactorRanks ranks{0, 2, 2};
  FactorModel raw = random_raw_model(12, 16, ranks, rng);
  ParamPair p = assemble(raw);
  FactorModel canon = canonicalize(p, ranks);
  CHECK(canon.f_s.cols() == 0);
  ParamPair back = assemble(canon);
  CHECK(rel_error(back.m, p.m) < 1e-10);
  CHECK(rel_error(back.theta, p.theta) < 1e-10);
  // truncated-SVD oracle: m reproduced implies row space matches top SVD
  Mat trunc = truncate_rank(p.m, 2);
  CHECK(rel_error(back.m, trunc) < 1e-10);
}

TEST_CASE("canonicalize: rank-deficient input raises with the singular-value gap") {
  FactorRanks ranks{1, 1, 0};
  Mat m = Mat::Ones(6, 6);  // rank 1 < d_s + d_m = 2
  Mat theta = Mat::Ones(6, 6);
  CHECK_THROWS_AS(canonicalize(m, theta, ranks), NumericalError);
  try {
    canonicalize(m, theta, ranks);
  } catch (const NumericalError& e) {
    CHECK(std::string(e.what()).find("rank-deficient") != std::string::npos);
  }
}

TEST_CASE("round trip canonicalize-assemble-canonicalize is sign-stable") {
  std::mt19937_64 rng(16);
  for (int rep = 0; rep < 100; ++rep) {
    FactorRanks ranks{1 + rep % 3, rep % 2, (rep + 1) % 2};
    FactorModel c1 = random_canonical_model(12, 14, ranks, rng);
    FactorModel c2 = canonicalize(assemble(c1), ranks);
    CHECK(rel_error(assemble(c2).m, assemble(c1).m) < 1e-9);
    CHECK(rel_error(c2.f_s, c1.f_s) < 1e-7);
    CHECK(rel_error(c2.f_m, c1.f_m) < 1e-7);
    CHECK(rel_error(c2.f_th, c1.f_th) < 1e-7);
  }
}

TEST_CASE("shared_coupling_xi: orthogonal and degenerate cases") {
  FactorModel fm = FactorModel::zeros(4, 8, FactorRanks{0, 1, 1});
  fm.f_m.col(0) << 1, 1, 1, 1, -1, -1, -1, -1;
  fm.f_th.col(0) << 1, -1, 1, -1, 1, -1, 1, -1;
  fm.f_m *= std::sqrt(8.0) / fm.f_m.norm();
  fm.f_th *= std::sqrt(8.0) / fm.f_th.norm();
  CHECK(shared_coupling_xi(fm) == doctest::Approx(0.0).epsilon(1e-12));

  // identical columns: xi = 1, flagged invalid
  fm.f_th = fm.f_m;
  CHECK(shared_coupling_xi(fm) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK_FALSE(is_canonical(fm));

  // empty blocks: 0
  FactorModel empty = FactorModel::zeros(4, 8, FactorRanks{2, 0, 1});
  CHECK(shared_coupling_xi(empty) == 0.0);
}

TEST_CASE("shared_coupling_xi matches a direct SVD of the cross product") {
  std::mt19937_64 rng(17);
  FactorModel fm = random_canonical_model(30, 50, FactorRanks{1, 2, 2}, rng);
  Mat cross = fm.f_m.transpose() * fm.f_th / 50.0;
  Eigen::JacobiSVD<Mat> svd(cross);
  CHECK(shared_coupling_xi(fm) == doctest::Approx(svd.singularValues()(0)).epsilon(1e-12));
  CHECK(shared_coupling_xi(fm) < 1.0);
}

TEST_CASE("sigma lower bound: decoupled reduction when only shared factors") {
  std::mt19937_64 rng(18);
  FactorModel fm = random_canonical_model(20, 25, FactorRanks{3, 0, 0}, rng);
  SigmaBoundDiagnostic d = check_sigma_lower_bound(fm);
  CHECK(d.xi == 0.0);
  ParamPair p = assemble(fm);
  Svd sm = thin_svd(p.m), sth = thin_svd(p.theta);
  CHECK(d.rhs == doctest::Approx(std::min(sm.s(2), sth.s(2))).epsilon(1e-10));
  CHECK(d.holds);
}

TEST_CASE("sigma lower bound holds on random canonical instances") {
  std::mt19937_64 rng(19);
  for (int rep = 0; rep < 100; ++rep) {
    FactorRanks ranks{1 + rep % 2, rep % 3, (rep + 1) % 3};
    FactorModel fm = random_canonical_model(40, 50, ranks, rng);
    SigmaBoundDiagnostic d = check_sigma_lower_bound(fm);
    CHECK_MESSAGE(d.holds, "lhs=", d.lhs, " rhs=", d.rhs, " xi=", d.xi);
  }
}

TEST_CASE("sigma lower bound equality for disjoint specific row spaces") {
  // d_s = 0 and F_m orthogonal to F_th: the stacked Gram splits, so
  // sigma_d(H) equals min(sigma(M), sigma(Theta)) exactly and xi = 0.
  std::mt19937_64 rng(20);
  const Index n1 = 12, n2 = 16;
  Mat q = orthonormalize(sfmc::testing::random_matrix(n2, 4, rng));
  FactorModel fm = FactorModel::zeros(n1, n2, FactorRanks{0, 2, 2});
  const double s = std::sqrt(static_cast<double>(n2));
  fm.f_m = s * q.leftCols(2);
  fm.f_th = s * q.rightCols(2);
  fm.lambda_m2 = sfmc::testing::random_matrix(n1, 2, rng);
  fm.lambda_th2 = sfmc::testing::random_matrix(n1, 2, rng);
  FactorModel canon = canonicalize(assemble(fm), fm.ranks);
  SigmaBoundDiagnostic d = check_sigma_lower_bound(canon);
  CHECK(d.xi == doctest::Approx(0.0).epsilon(1e-10));
  CHECK(d.lhs == doctest::Approx(d.rhs).epsilon(1e-6));
  CHECK(d.holds);
}

TEST_SUITE_END();

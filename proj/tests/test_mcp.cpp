#include <doctest.h>

#include <random>

#include "sfmc/mcp.hpp"
#include "sfmc/svd_utils.hpp"
#include "test_helpers.hpp"

using namespace sfmc;
using sfmc::testing::random_canonical_model;
using sfmc::testing::random_matrix;
using sfmc::testing::rel_error;

TEST_SUITE_BEGIN("mcp");

TEST_CASE("mcp_scalar: zero, ramp branch, plateau branch, negative input") {
  CHECK(mcp_scalar(0.0, 2.0, 1.5) == 0.0);
  CHECK(mcp_scalar(1.0, 2.0, 1.5) == doctest::Approx(2.0 - 1.0 / 3.0).epsilon(1e-15));
  CHECK(mcp_scalar(4.0, 2.0, 1.5) == doctest::Approx(3.0).epsilon(1e-15));
  CHECK_THROWS_AS(mcp_scalar(-0.1, 2.0, 1.5), InputError);
}

TEST_CASE("mcp_penalty: zero matrix, rank-1, SVD oracle") {
  CHECK(mcp_penalty(Mat::Zero(4, 3), 2.0, 1.5) == 0.0);

  // rank-1 h with sigma = 1
  Mat h = Mat::Zero(5, 4);
  h(0, 0) = 1.0;
  CHECK(mcp_penalty(h, 2.0, 1.5) == doctest::Approx(2.0 - 1.0 / 3.0).epsilon(1e-12));

  std::mt19937_64 rng(31);
  Mat a = random_matrix(6, 4, rng);
  Eigen::BDCSVD<Mat> svd(a);
  double oracle = 0.0;
  for (Index i = 0; i < svd.singularValues().size(); ++i)
    oracle += mcp_scalar(svd.singularValues()(i), 0.7, 2.5);
  CHECK(mcp_penalty(a, 0.7, 2.5) == doctest::Approx(oracle).epsilon(1e-12));
}

TEST_CASE("firm_threshold_shrink: the three branches and the validity precondition") {
  CHECK(firm_threshold_shrink(0.5, 1.0, 1.0, 2.0) == 0.0);
  CHECK(firm_threshold_shrink(1.5, 1.0, 1.0, 2.0) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(firm_threshold_shrink(3.0, 1.0, 1.0, 2.0) == 3.0);
  CHECK_THROWS_WITH_AS(firm_threshold_shrink(1.0, 2.0, 1.0, 2.0), doctest::Contains("prox"),
                       NumericalError);
}

TEST_CASE("firm_threshold_shrink is the argmin of the prox objective (grid oracle)") {
  std::mt19937_64 rng(32);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (int rep = 0; rep < 50; ++rep) {
    const double step = 0.1 + 1.4 * unif(rng);
    const double gamma = step + 0.1 + 1.5 * unif(rng);
    const double mu = 1.5 * unif(rng);
    const double sigma = 3.0 * unif(rng);
    const double got = firm_threshold_shrink(sigma, step, mu, gamma);

    const double hi = sigma + gamma * mu + 1.0;
    const double res = 1e-4;
    const Index npts = static_cast<Index>(hi / res) + 1;
    double best_y = 0.0, best_f = std::numeric_limits<double>::infinity();
    for (Index t = 0; t < npts; ++t) {
      const double y = t * res;
      const double f = 0.5 * (sigma - y) * (sigma - y) / step + mcp_scalar(y, mu, gamma);
      if (f < best_f) {
        best_f = f;
        best_y = y;
      }
    }
    CHECK_MESSAGE(std::abs(got - best_y) <= 2e-4, "sigma=", sigma, " step=", step, " mu=", mu,
                  " gamma=", gamma, " got=", got, " grid=", best_y);
    const double f_got = 0.5 * (sigma - got) * (sigma - got) / step + mcp_scalar(got, mu, gamma);
    CHECK(f_got <= best_f + 1e-10);
  }
}

TEST_CASE("fit_mcp: total shrinkage to zero under a huge penalty") {
  std::mt19937_64 rng(33);
  FactorModel truth = random_canonical_model(20, 25, FactorRanks{1, 1, 1}, rng);
  ParamPair p = assemble(truth);
  MaskedData d;
  d.x = p.m;
  d.w = Mat::Ones(20, 25);

  McpConfig cfg;
  cfg.mu = 1e4;
  McpFit fit = fit_mcp(d, LossSpec::quadratic(), cfg);
  CHECK(fit.params.m.norm() == 0.0);
  CHECK(fit.params.theta.norm() == 0.0);
  CHECK(fit.singular_values.size() == 0);
}

TEST_CASE("fit_mcp: noiseless fully observed rank-3 recovery with a small penalty") {
  std::mt19937_64 rng(34);
  Mat m_true = random_matrix(40, 3, rng) * random_matrix(30, 3, rng).transpose();
  MaskedData d;
  d.x = m_true;
  d.w = Mat::Ones(40, 30);

  McpConfig cfg;
  cfg.mu = 0.05;
  cfg.k = 6;
  cfg.max_iter = 3000;
  cfg.tol = 1e-10;
  McpFit fit = fit_mcp(d, LossSpec::quadratic(), cfg);

  Vec sv_m = thin_svd(fit.params.m).s;
  Index rank_m = 0;
  for (Index i = 0; i < sv_m.size(); ++i)
    if (sv_m(i) > 1e-6 * sv_m(0)) ++rank_m;
  CHECK(rank_m == 3);
  CHECK(rel_error(fit.params.m, m_true) < 1e-3);
}

TEST_CASE("fit_mcp: objective trace is monotone and rank respects the cap") {
  std::mt19937_64 rng(35);
  FactorModel truth = random_canonical_model(30, 30, FactorRanks{2, 1, 1}, rng);
  ParamPair p = assemble(truth);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 0.4);
  MaskedData d;
  d.x.resize(30, 30);
  d.w.resize(30, 30);
  for (Index j = 0; j < 30; ++j)
    for (Index i = 0; i < 30; ++i) {
      const bool obs = unif(rng) < 0.6;
      d.w(i, j) = obs;
      d.x(i, j) = obs ? p.m(i, j) + gauss(rng) : std::numeric_limits<double>::quiet_NaN();
    }

  McpConfig cfg;
  cfg.mu = 0.3;
  cfg.k = 5;
  McpFit fit = fit_mcp(d, LossSpec::quadratic(), cfg);
  CHECK(fit.singular_values.size() <= 5);
  const auto& trace = fit.report.objective_trace;
  for (std::size_t i = 1; i < trace.size(); ++i)
    CHECK(trace[i] <= trace[i - 1] + 1e-10 * (1.0 + std::abs(trace[i - 1])));
  // the fixed-point criterion was reached
  CHECK(fit.report.converged);
}

TEST_CASE("fit_mcp objective at output never exceeds the spectral-init objective") {
  std::mt19937_64 rng(36);
  FactorModel truth = random_canonical_model(24, 26, FactorRanks{1, 1, 0}, rng);
  ParamPair p = assemble(truth);
  MaskedData d;
  d.x = p.m;
  d.w = Mat::Ones(24, 26);
  McpConfig cfg;
  cfg.mu = 0.2;
  McpFit fit = fit_mcp(d, LossSpec::quadratic(), cfg);
  REQUIRE(!fit.report.objective_trace.empty());
  CHECK(fit.penalized_objective <= fit.report.objective_trace.front() + 1e-9);
}

TEST_SUITE_END();

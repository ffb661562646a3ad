#include <doctest.h>

#include <random>

#include "sfmc/numeric.hpp"
#include "sfmc/oracle_fit.hpp"
#include "test_helpers.hpp"

using namespace sfmc;
using sfmc::testing::random_canonical_model;
using sfmc::testing::random_matrix;
using sfmc::testing::rel_error;

TEST_SUITE_BEGIN("oracle_fit");

namespace {

// Fully observed, noise-free data from a canonical model.
MaskedData full_data_from(const ParamPair& p) {
  MaskedData d;
  d.x = p.m;
  d.w = Mat::Ones(p.m.rows(), p.m.cols());
  return d;
}

MaskedData masked_data_from(const ParamPair& p, double rate, double noise_sd,
                            std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  MaskedData d;
  d.x.resizeLike(p.m);
  d.w.resizeLike(p.m);
  for (Index j = 0; j < p.m.cols(); ++j)
    for (Index i = 0; i < p.m.rows(); ++i) {
      const bool obs = unif(rng) < rate;
      d.w(i, j) = obs ? 1.0 : 0.0;
      d.x(i, j) = obs ? p.m(i, j) + noise_sd * gauss(rng)
                      : std::numeric_limits<double>::quiet_NaN();
    }
  return d;
}

}  // namespace

TEST_CASE("exact recovery: noise-free rank-(1,0,0), fully observed, quadratic") {
  std::mt19937_64 rng(101);
  FactorModel truth = random_canonical_model(40, 50, FactorRanks{1, 0, 0}, rng);
  ParamPair p = assemble(truth);
  MaskedData d = full_data_from(p);
  FitConfig cfg;
  OracleFit fit = fit_known_rank(d, truth.ranks, LossSpec::quadratic(), cfg);
  CHECK(rel_error(assemble(fit.model).m, p.m) < 1e-6);
}

TEST_CASE("descent: starting at the truth never increases the objective") {
  std::mt19937_64 rng(102);
  FactorModel truth = random_canonical_model(30, 35, FactorRanks{2, 1, 1}, rng);
  ParamPair p = assemble(truth);
  MaskedData d = masked_data_from(p, 0.6, 0.3, rng);
  FitConfig cfg;
  cfg.max_iter = 200;
  OracleFit fit = fit_known_rank(d, truth.ranks, LossSpec::quadratic(), cfg, &truth);
  const auto& trace = fit.report.objective_trace;
  REQUIRE(trace.size() >= 2);
  for (std::size_t i = 1; i < trace.size(); ++i)
    CHECK(trace[i] <= trace[i - 1] + 1e-9 * (1.0 + std::abs(trace[i - 1])));
  CHECK(fit.report.final_objective <= trace.front() + 1e-9);
}

TEST_CASE("monotone descent holds from a spectral start too") {
  std::mt19937_64 rng(103);
  FactorModel truth = random_canonical_model(25, 30, FactorRanks{1, 1, 1}, rng);
  MaskedData d = masked_data_from(assemble(truth), 0.5, 0.5, rng);
  FitConfig cfg;
  cfg.max_iter = 300;
  OracleFit fit = fit_known_rank(d, truth.ranks, LossSpec::quadratic(), cfg);
  const auto& trace = fit.report.objective_trace;
  for (std::size_t i = 1; i < trace.size(); ++i)
    CHECK(trace[i] <= trace[i - 1] + 1e-9 * (1.0 + std::abs(trace[i - 1])));
}

TEST_CASE("result satisfies the identification constraints") {
  std::mt19937_64 rng(104);
  FactorModel truth = random_canonical_model(30, 30, FactorRanks{2, 1, 1}, rng);
  MaskedData d = masked_data_from(assemble(truth), 0.7, 0.2, rng);
  FitConfig cfg;
  cfg.max_iter = 400;
  OracleFit fit = fit_known_rank(d, truth.ranks, LossSpec::quadratic(), cfg);
  std::string why;
  CHECK_MESSAGE(is_canonical(fit.model, &why), why);
  // re-canonicalization does not move the assembled pair
  ParamPair fitted = assemble(fit.model);
  ParamPair again = assemble(canonicalize(fitted, truth.ranks));
  CHECK(rel_error(again.m, fitted.m) < 1e-10);
  CHECK(rel_error(again.theta, fitted.theta) < 1e-10);
}

TEST_CASE("d_s = 0 decouples into independent m and theta fits") {
  std::mt19937_64 rng(105);
  FactorModel truth = random_canonical_model(25, 25, FactorRanks{0, 2, 2}, rng);
  MaskedData d = masked_data_from(assemble(truth), 0.7, 0.2, rng);
  FitConfig cfg;
  cfg.max_iter = 1500;
  cfg.tol = 1e-10;
  LossSpec loss = LossSpec::quadratic();

  OracleFit joint = fit_known_rank(d, FactorRanks{0, 2, 2}, loss, cfg);
  OracleFit m_only = fit_known_rank(d, FactorRanks{0, 2, 0}, loss, cfg);
  OracleFit th_only = fit_known_rank(d, FactorRanks{0, 0, 2}, loss, cfg);

  ParamPair combined;
  combined.m = assemble(m_only.model).m;
  combined.theta = assemble(th_only.model).theta;
  const double obj_joint = joint.report.final_objective;
  const double obj_combined = objective(d, combined, loss, cfg.eta);
  CHECK(std::abs(obj_joint - obj_combined) <= 1e-6 * (1.0 + std::abs(obj_joint)));
}

TEST_CASE("infeasible ranks raise an input error") {
  MaskedData d;
  d.x = Mat::Ones(5, 5);
  d.w = Mat::Ones(5, 5);
  CHECK_THROWS_AS(fit_known_rank(d, FactorRanks{4, 3, 0}, LossSpec::quadratic(), FitConfig{}),
                  InputError);
}

TEST_CASE("project_infinity_caps: no-op, clamp, and entrywise oracle") {
  FitConfig cfg;
  cfg.alpha_m = 3.0;
  cfg.alpha_theta = 2.0;
  ParamPair p;
  p.m = Mat::Constant(2, 2, 1.0);
  p.theta = Mat::Constant(2, 2, -1.0);
  ParamPair q = project_infinity_caps(p, cfg);
  CHECK((q.m - p.m).norm() == 0.0);
  CHECK((q.theta - p.theta).norm() == 0.0);

  p.m(0, 0) = 2.0 * cfg.alpha_m;
  q = project_infinity_caps(p, cfg);
  CHECK(q.m(0, 0) == cfg.alpha_m);

  std::mt19937_64 rng(106);
  p.m = 5.0 * random_matrix(7, 6, rng);
  p.theta = 5.0 * random_matrix(7, 6, rng);
  q = project_infinity_caps(p, cfg);
  for (Index j = 0; j < 6; ++j)
    for (Index i = 0; i < 7; ++i) {
      CHECK(q.m(i, j) == std::min(std::max(p.m(i, j), -cfg.alpha_m), cfg.alpha_m));
      CHECK(q.theta(i, j) == std::min(std::max(p.theta(i, j), -cfg.alpha_theta), cfg.alpha_theta));
    }
}

TEST_CASE("rank-0 model fits trivially") {
  MaskedData d;
  d.x = Mat::Ones(4, 4);
  d.w = Mat::Ones(4, 4);
  OracleFit fit = fit_known_rank(d, FactorRanks{0, 0, 0}, LossSpec::quadratic(), FitConfig{});
  CHECK(fit.report.converged);
  CHECK(assemble(fit.model).m.norm() == 0.0);
}

TEST_SUITE_END();

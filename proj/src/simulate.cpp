#include "sfmc/simulate.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <random>
#include <sstream>

#include "sfmc/numeric.hpp"
#include "sfmc/parallel.hpp"

namespace sfmc {

SimDesign make_design(Index n, Index d_s, Index d_theta, Index d_m, double m_p, double sigma2) {
  SimDesign d;
  d.n = n;
  d.ranks = FactorRanks{d_s, d_m, d_theta};
  d.m_p = m_p;
  d.sigma2 = sigma2;
  return d;
}

SimInstance generate(const SimDesign& design, std::uint64_t replicate) {
  const Index n = design.n;
  const FactorRanks& r = design.ranks;
  if (n <= 0) throw InputError("generate: n must be positive");
  if (r.d_s < 1) throw InputError("generate: d_s must be >= 1 (intercept column)");
  if ((r.d_m > 0 || r.d_s > 1) && r.rank_m() - 1 <= 0)
    throw InputError("generate: degenerate design (d_s + d_m - 1 = 0)");
  if ((r.d_theta > 0 || r.d_s > 1) && r.rank_theta() - 1 <= 0)
    throw InputError("generate: degenerate design (d_s + d_theta - 1 = 0)");

  std::mt19937_64 rng(derive_seed(design.seed, replicate));
  std::normal_distribution<double> gauss(0.0, 1.0);
  auto draw = [&](Index rows, Index cols, double sd) {
    Mat a(rows, cols);
    for (Index j = 0; j < cols; ++j)
      for (Index i = 0; i < rows; ++i) a(i, j) = sd * gauss(rng);
    return a;
  };

  const double sd_m = r.rank_m() > 1 ? 1.0 / std::sqrt(static_cast<double>(r.rank_m() - 1)) : 0.0;
  const double sd_th =
      r.rank_theta() > 1 ? 1.0 / std::sqrt(static_cast<double>(r.rank_theta() - 1)) : 0.0;

  FactorModel truth;
  truth.ranks = r;
  truth.lambda_m2 = draw(n, r.d_m, sd_m);
  truth.lambda_m1 = Mat(n, r.d_s);
  truth.lambda_m1.col(0).setOnes();
  if (r.d_s > 1) truth.lambda_m1.rightCols(r.d_s - 1) = draw(n, r.d_s - 1, sd_m);
  truth.lambda_th2 = draw(n, r.d_theta, sd_th);
  truth.lambda_th1 = Mat(n, r.d_s);
  truth.lambda_th1.col(0).setConstant(-design.m_p);
  if (r.d_s > 1) truth.lambda_th1.rightCols(r.d_s - 1) = draw(n, r.d_s - 1, sd_th);
  truth.f_m = draw(n, r.d_m, 1.0);
  truth.f_th = draw(n, r.d_theta, 1.0);
  truth.f_s = Mat(n, r.d_s);
  truth.f_s.col(0).setOnes();
  if (r.d_s > 1) truth.f_s.rightCols(r.d_s - 1) = draw(n, r.d_s - 1, 1.0);

  ParamPair p = assemble(truth);

  const double noise_sd = std::sqrt(design.sigma2);
  Mat eps(n, n);
  if (design.noise == NoiseFamily::gaussian) {
    for (Index j = 0; j < n; ++j)
      for (Index i = 0; i < n; ++i) eps(i, j) = noise_sd * gauss(rng);
  } else {
    std::student_t_distribution<double> tdist(design.t_dof);
    const double unit =
        design.t_dof > 2.0 ? std::sqrt((design.t_dof - 2.0) / design.t_dof) : 1.0;
    for (Index j = 0; j < n; ++j)
      for (Index i = 0; i < n; ++i) eps(i, j) = noise_sd * unit * tdist(rng);
  }

  std::uniform_real_distribution<double> unif(0.0, 1.0);
  MaskedData data;
  data.w.resize(n, n);
  data.x.resize(n, n);
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (Index j = 0; j < n; ++j)
    for (Index i = 0; i < n; ++i) {
      const bool obs = unif(rng) < expit(p.theta(i, j));
      data.w(i, j) = obs ? 1.0 : 0.0;
      data.x(i, j) = obs ? p.m(i, j) + eps(i, j) : nan;
    }

  return SimInstance{std::move(data), std::move(truth), std::move(p)};
}

Mat baseline_mcar_fit(const MaskedData& data, Index rank, const LossSpec& loss,
                      const FitConfig& cfg) {
  OracleFit fit = fit_known_rank(data, FactorRanks{0, rank, 0}, loss, cfg);
  return assemble(fit.model).m;
}

const char* method_name(Method m) {
  switch (m) {
    case Method::truth:
      return "truth";
    case Method::mht:
      return "mht";
    case Method::sh:
      return "sh";
    case Method::osh:
      return "osh";
  }
  return "?";
}

namespace {

double mse(const Mat& a, const Mat& b) {
  return (a - b).squaredNorm() / (static_cast<double>(a.rows()) * a.cols());
}

struct Moments {
  double mean = 0.0, sd = 0.0;
};

Moments moments(const std::vector<double>& v) {
  Moments m;
  if (v.empty()) return m;
  for (double x : v) m.mean += x;
  m.mean /= v.size();
  if (v.size() > 1) {
    double ss = 0.0;
    for (double x : v) ss += (x - m.mean) * (x - m.mean);
    m.sd = std::sqrt(ss / (v.size() - 1));
  }
  return m;
}

}  // namespace

ExperimentResult run_experiment(const SimDesign& design, const std::vector<Method>& methods,
                                const ExperimentConfig& cfg) {
  const int reps = design.replicates;
  if (reps <= 0) throw InputError("run_experiment: replicates must be positive");

  const bool need_baseline = !methods.empty();  // Ratio_1 is always against the baseline
  const bool need_pipeline =
      std::find(methods.begin(), methods.end(), Method::sh) != methods.end() ||
      std::find(methods.begin(), methods.end(), Method::osh) != methods.end();

  std::vector<std::vector<MetricsRow>> per_rep(reps);

  parallel_for(
      reps,
      [&](Index rep) {
        SimInstance inst = generate(design, static_cast<std::uint64_t>(rep));
        std::vector<MetricsRow>& rows = per_rep[rep];

        double mse_baseline = std::numeric_limits<double>::quiet_NaN();
        Mat baseline_m;
        if (need_baseline) {
          const auto t0 = std::chrono::steady_clock::now();
          try {
            baseline_m = baseline_mcar_fit(inst.data, design.ranks.rank_m(), cfg.pipeline.loss,
                                           cfg.pipeline.fit_cfg);
            mse_baseline = mse(baseline_m, inst.truth_params.m);
          } catch (const Error& e) {
            mse_baseline = std::numeric_limits<double>::quiet_NaN();
            if (std::find(methods.begin(), methods.end(), Method::mht) != methods.end()) {
              MetricsRow row;
              row.method = Method::mht;
              row.replicate = static_cast<int>(rep);
              row.failed = true;
              row.note = e.what();
              rows.push_back(std::move(row));
            }
          }
          if (std::isfinite(mse_baseline) &&
              std::find(methods.begin(), methods.end(), Method::mht) != methods.end()) {
            MetricsRow row;
            row.method = Method::mht;
            row.replicate = static_cast<int>(rep);
            row.mse_m = mse_baseline;
            row.ratio1 = 0.0;  // baseline against itself
            row.seconds =
                std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            rows.push_back(std::move(row));
          }
        }

        PipelineResult pipe;
        bool pipe_ok = false;
        std::string pipe_err;
        if (need_pipeline) {
          try {
            pipe = run_pipeline(inst.data, cfg.pipeline);
            pipe_ok = true;
          } catch (const Error& e) {
            pipe_err = e.what();
          }
        }

        for (Method m : methods) {
          if (m == Method::mht) continue;  // already handled
          MetricsRow row;
          row.method = m;
          row.replicate = static_cast<int>(rep);
          const auto t0 = std::chrono::steady_clock::now();
          try {
            Mat est_m;
            Mat est_theta;
            switch (m) {
              case Method::truth:
                est_m = inst.truth_params.m;
                est_theta = inst.truth_params.theta;
                row.rank_correct = true;
                row.ranks_est = design.ranks;
                break;
              case Method::sh:
              case Method::osh: {
                if (!pipe_ok) throw NumericalError(pipe_err);
                const OracleFit& fit = (m == Method::sh) ? pipe.sh_fit : pipe.osh_fit;
                ParamPair est = assemble(fit.model);
                est_m = est.m;
                est_theta = est.theta;
                row.ranks_est = pipe.ranks.ranks;
                row.rank_correct = pipe.ranks.ranks == design.ranks;
                break;
              }
              default:
                break;
            }
            row.mse_m = mse(est_m, inst.truth_params.m);
            row.mse_theta = mse(est_theta, inst.truth_params.theta);
            if (std::isfinite(mse_baseline) && mse_baseline > 0.0)
              row.ratio1 = 1.0 - row.mse_m / mse_baseline;
          } catch (const Error& e) {
            row.failed = true;
            row.note = e.what();
          }
          row.seconds =
              std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
          rows.push_back(std::move(row));
        }
      },
      cfg.parallel ? 0 : 1);

  ExperimentResult out;
  for (auto& rows : per_rep)
    for (auto& row : rows) out.rows.push_back(std::move(row));

  int failures = 0;
  for (const auto& row : out.rows)
    if (row.failed) ++failures;
  if (!out.rows.empty() && 2 * failures > static_cast<int>(out.rows.size()))
    throw NumericalError("run_experiment: more than half of the replicate fits failed");

  for (Method m : methods) {
    MethodSummary s;
    s.method = m;
    std::vector<double> mses, ratios;
    int rank_ok = 0, rank_counted = 0;
    for (const auto& row : out.rows) {
      if (row.method != m || row.failed) continue;
      ++s.completed;
      mses.push_back(row.mse_m);
      if (std::isfinite(row.ratio1)) ratios.push_back(row.ratio1);
      if (m == Method::sh || m == Method::osh || m == Method::truth) {
        ++rank_counted;
        if (row.rank_correct) ++rank_ok;
      }
    }
    Moments mm = moments(mses);
    s.mse_mean = mm.mean;
    s.mse_sd = mm.sd;
    if (!ratios.empty()) {
      Moments rm = moments(ratios);
      s.ratio1_mean = rm.mean;
      s.ratio1_sd = rm.sd;
    }
    if (rank_counted > 0) s.rank_correct_rate = static_cast<double>(rank_ok) / rank_counted;
    out.summaries.push_back(s);
  }
  return out;
}

std::string format_experiment_table(const SimDesign& design, const ExperimentResult& result) {
  std::ostringstream os;
  os << "# n=" << design.n << " ranks=(" << design.ranks.d_s << "," << design.ranks.d_theta << ","
     << design.ranks.d_m << ") [d_s,d_theta,d_m] m_p=" << design.m_p << " sigma2=" << design.sigma2
     << " reps=" << design.replicates << "\n";
  os << "method\tcompleted\tmse_mean\tmse_sd\tratio1_mean\tratio1_sd\trank_correct_rate\n";
  for (const auto& s : result.summaries) {
    os << method_name(s.method) << "\t" << s.completed << "\t" << s.mse_mean << "\t" << s.mse_sd
       << "\t" << s.ratio1_mean << "\t" << s.ratio1_sd << "\t" << s.rank_correct_rate << "\n";
  }
  return os.str();
}

}  // namespace sfmc

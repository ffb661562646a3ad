#include "sfmc/cli_run.hpp"

#include <chrono>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>

#include "sfmc/inference.hpp"
#include "sfmc/io.hpp"
#include "sfmc/numeric.hpp"
#include "sfmc/pipeline.hpp"
#include "sfmc/simulate.hpp"

namespace sfmc {

namespace {

LossSpec loss_from_name(const std::string& name, double huber_delta) {
  if (name == "quadratic") return LossSpec::quadratic();
  if (name == "huber") return LossSpec::huber(huber_delta);
  if (name == "expfamily") return LossSpec::poisson_glm();
  throw InputError("unknown loss '" + name + "' (expected quadratic|expfamily|huber)");
}

PipelineConfig pipeline_config(const RunConfig& cfg) {
  PipelineConfig pc;
  pc.loss = loss_from_name(cfg.loss, cfg.huber_delta);
  pc.gamma = cfg.gamma;
  pc.cap_k = cfg.cap_k;
  pc.ic_coef = cfg.ic_coef;
  pc.fit_cfg.alpha_m = cfg.alpha_m;
  pc.fit_cfg.alpha_theta = cfg.alpha_theta;
  if (cfg.mu.has_value()) pc.fixed_mu = cfg.mu;
  pc.mu_grid = cfg.mu_grid;
  if (cfg.eta == "auto") {
    pc.eta_auto = true;
  } else {
    pc.eta_auto = false;
    try {
      pc.eta_fixed = std::stod(cfg.eta);
    } catch (...) {
      throw InputError("--eta expects 'auto' or a number, got '" + cfg.eta + "'");
    }
    if (!(pc.eta_fixed > 0.0)) throw InputError("--eta must be positive");
    pc.eta_init = pc.eta_fixed;
  }
  return pc;
}

void write_text(const std::string& path, const std::string& text) {
  if (path.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path);
  out << text;
}

std::string render_fit_report(const RunConfig& cfg, const MaskedData& data,
                              const PipelineResult& pipe, const std::string& metrics_block,
                              const std::string& se_block) {
  std::ostringstream os;
  os.precision(10);
  const auto& rk = pipe.ranks.ranks;
  os << "sfmc fit report\n";
  os << "input: " << cfg.input_path << " (" << data.n1() << " x " << data.n2() << ", "
     << data.observed_count() << " observed)\n";
  os << "loss: " << cfg.loss << "\n\n";

  os << "mu selection (IC = Q + " << cfg.ic_coef << " log(n1 n2) k_f):\n";
  os << "  mu\tq\tk_f\tic\tranks(ds,dm,dth)\n";
  for (const auto& rec : pipe.mu_selection.records) {
    if (rec.failed) {
      os << "  " << rec.mu << "\t-\t-\t-\tfailed: " << rec.note << "\n";
    } else {
      os << "  " << rec.mu << "\t" << rec.q_value << "\t" << rec.k_f << "\t" << rec.ic_value
         << "\t(" << rec.ranks.ranks.d_s << "," << rec.ranks.ranks.d_m << ","
         << rec.ranks.ranks.d_theta << ")\n";
    }
  }
  os << "chosen mu = " << pipe.mu_selection.mu << ", threshold T = "
     << pipe.mu_selection.mu * cfg.gamma << "\n\n";

  os << "ranks: d = " << rk.total() << "  (d_s, d_m, d_theta) = (" << rk.d_s << ", " << rk.d_m
     << ", " << rk.d_theta << ")\n";
  os << "eta: " << pipe.eta.eta_hat;
  if (std::isfinite(pipe.eta.sigma2_corrected_value))
    os << "  [sigma2_naive = " << pipe.eta.sigma2_naive_value
       << ", sigma2_corrected = " << pipe.eta.sigma2_corrected_value << "]";
  if (std::isfinite(pipe.eta.phi_hat)) os << "  [phi_hat = " << pipe.eta.phi_hat << "]";
  os << "\n";
  const auto& rep = pipe.osh_fit.report;
  os << "final fit: objective " << rep.objective_trace.front() << " -> " << rep.final_objective
     << " in " << rep.iterations << " sweeps, " << (rep.converged ? "converged" : "NOT converged")
     << "\n";
  if (!pipe.warning.empty()) os << "warning: " << pipe.warning << "\n";
  if (!rep.warning.empty()) os << "warning: " << rep.warning << "\n";
  if (!metrics_block.empty()) os << "\n" << metrics_block;

  os << "\n[machine]\n";
  os << "mu=" << pipe.mu_selection.mu << "\n";
  os << "gamma=" << cfg.gamma << "\n";
  os << "eta=" << pipe.eta.eta_hat << "\n";
  os << "d=" << rk.total() << "\nd_s=" << rk.d_s << "\nd_m=" << rk.d_m << "\nd_theta=" << rk.d_theta
     << "\n";
  if (std::isfinite(pipe.eta.sigma2_naive_value))
    os << "sigma2_naive=" << pipe.eta.sigma2_naive_value << "\n";
  if (std::isfinite(pipe.eta.sigma2_corrected_value))
    os << "sigma2_corrected=" << pipe.eta.sigma2_corrected_value << "\n";
  if (std::isfinite(pipe.eta.phi_hat)) os << "phi_hat=" << pipe.eta.phi_hat << "\n";
  os << "objective_initial=" << rep.objective_trace.front() << "\n";
  os << "objective_final=" << rep.final_objective << "\n";
  os << "iterations=" << rep.iterations << "\n";
  os << "converged=" << (rep.converged ? 1 : 0) << "\n";
  if (!se_block.empty()) os << se_block;
  return os.str();
}

int run_fit(const RunConfig& cfg, bool ranks_only) {
  if (cfg.input_path.empty()) throw InputError("--input is required");
  RatingsTriplets triplets = load_triplets(cfg.input_path);
  if (triplets.rows.empty()) throw InputError("input dataset is empty; nothing to fit");
  MaskedData data = to_masked(triplets);

  PipelineConfig pc = pipeline_config(cfg);
  PipelineResult pipe = run_pipeline(data, pc);

  std::string metrics_block;
  if (!cfg.test_path.empty()) {
    RatingsTriplets test = load_triplets(cfg.test_path);
    Mat pred = predict_clipped(pipe.params.m, cfg.clip_lo, cfg.clip_hi);
    std::ostringstream mb;
    mb.precision(10);
    mb << "test metrics (" << cfg.test_path << ", clipped to [" << cfg.clip_lo << ", "
       << cfg.clip_hi << "]):\n";
    mb << "  mspe = " << mspe(test, pred) << "\n";
    mb << "  rank_bar = " << percentile_rank_bar(test, pred) << "\n";
    mb << "\n[metrics]\nmspe=" << mspe(test, pred)
       << "\nrank_bar=" << percentile_rank_bar(test, pred) << "\n";
    metrics_block = mb.str();
  }

  std::string se_block;
  if (cfg.se_sample > 0 && !ranks_only) {
    InferenceWeights w = build_weights(data, pipe.osh_fit.model, pc.loss, pipe.eta.eta_hat);
    std::mt19937_64 rng(cfg.seed);
    std::vector<std::pair<Index, Index>> cells;
    for (Index j = 0; j < data.n2(); ++j)
      for (Index i = 0; i < data.n1(); ++i)
        if (data.w(i, j) != 0.0) cells.emplace_back(i, j);
    std::shuffle(cells.begin(), cells.end(), rng);
    std::ostringstream sb;
    sb.precision(10);
    const double scale = std::sqrt(static_cast<double>(data.n1() + data.n2()));
    const int count = std::min<int>(cfg.se_sample, static_cast<int>(cells.size()));
    for (int c = 0; c < count; ++c) {
      auto [i, j] = cells[c];
      EntryVariance ev = entry_variance(w, pipe.osh_fit.model, i, j, pipe.eta.eta_hat);
      sb << "se_cell=" << (i + 1) << "," << (j + 1) << "," << std::sqrt(ev.v_m) / scale << ","
         << std::sqrt(ev.v_theta) / scale << "\n";
    }
    se_block = sb.str();
  }

  if (ranks_only) {
    std::ostringstream os;
    const auto& rk = pipe.ranks.ranks;
    os << "ranks: d=" << rk.total() << " d_s=" << rk.d_s << " d_m=" << rk.d_m
       << " d_theta=" << rk.d_theta << " (mu=" << pipe.mu_selection.mu << ", T="
       << pipe.mu_selection.mu * cfg.gamma << ")\n";
    os << "[machine]\nmu=" << pipe.mu_selection.mu << "\nd=" << rk.total() << "\nd_s=" << rk.d_s
       << "\nd_m=" << rk.d_m << "\nd_theta=" << rk.d_theta << "\n";
    write_text(cfg.out_path, os.str());
    return 0;
  }

  write_text(cfg.out_path, render_fit_report(cfg, data, pipe, metrics_block, se_block));
  if (!cfg.pred_out.empty())
    save_dense_csv(cfg.pred_out, predict_clipped(pipe.params.m, cfg.clip_lo, cfg.clip_hi));

  if (!pipe.osh_fit.report.converged) {
    std::cerr << "error: code=4 kind=convergence msg=\"final refit did not converge within "
              << "max_iter; report written\"\n";
    return 4;
  }
  return 0;
}

int run_simulate(const RunConfig& cfg) {
  SimDesign design = make_design(cfg.sim_n, cfg.sim_ds, cfg.sim_dtheta, cfg.sim_dm, cfg.sim_mp,
                                 cfg.sim_sigma2);
  design.replicates = cfg.sim_reps;
  design.seed = cfg.seed;

  std::vector<Method> methods;
  for (const auto& name : cfg.sim_methods) {
    if (name == "osh")
      methods.push_back(Method::osh);
    else if (name == "sh")
      methods.push_back(Method::sh);
    else if (name == "mht")
      methods.push_back(Method::mht);
    else if (name == "truth")
      methods.push_back(Method::truth);
    else
      throw InputError("unknown method '" + name + "' (expected osh|sh|mht|truth)");
  }

  ExperimentConfig ec;
  ec.pipeline = pipeline_config(cfg);
  ExperimentResult result = run_experiment(design, methods, ec);
  write_text(cfg.out_path, format_experiment_table(design, result));
  return 0;
}

int run_evaluate(const RunConfig& cfg) {
  if (cfg.pred_path.empty()) throw InputError("--pred is required for evaluate");
  if (cfg.test_path.empty()) throw InputError("--test is required for evaluate");
  Mat pred_raw = load_dense_csv(cfg.pred_path);
  Mat pred = predict_clipped(pred_raw, cfg.clip_lo, cfg.clip_hi);
  RatingsTriplets test = load_triplets(cfg.test_path);
  std::ostringstream os;
  os.precision(10);
  os << "mspe=" << mspe(test, pred) << "\n";
  os << "rank_bar=" << percentile_rank_bar(test, pred) << "\n";
  write_text(cfg.out_path, os.str());
  return 0;
}

}  // namespace

int run(const RunConfig& config) {
  try {
    if (config.command == "fit") return run_fit(config, false);
    if (config.command == "ranks") return run_fit(config, true);
    if (config.command == "simulate") return run_simulate(config);
    if (config.command == "evaluate") return run_evaluate(config);
    throw InputError("unknown command '" + config.command + "'");
  } catch (const Error& e) {
    std::string kind = e.exit_code() == 2 ? "input" : e.exit_code() == 4 ? "convergence" : "numerical";
    std::string msg = e.what();
    for (auto& c : msg)
      if (c == '\n') c = ' ';
    std::cerr << "error: code=" << e.exit_code() << " kind=" << kind << " msg=\"" << msg << "\"\n";
    return e.exit_code();
  } catch (const std::exception& e) {
    std::string msg = e.what();
    for (auto& c : msg)
      if (c == '\n') c = ' ';
    std::cerr << "error: code=3 kind=numerical msg=\"" << msg << "\"\n";
    return 3;
  }
}

}  // namespace sfmc

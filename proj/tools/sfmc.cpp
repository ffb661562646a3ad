#include <CLI11.hpp>

#include "sfmc/cli_run.hpp"

int main(int argc, char** argv) {
  CLI::App app{"sfmc: low-rank matrix completion with a shared factor structure"};
  app.require_subcommand(1);

  sfmc::RunConfig cfg;

  auto add_model_flags = [&](CLI::App* cmd) {
    cmd->add_option("--loss", cfg.loss, "quadratic|expfamily|huber")->default_val("quadratic");
    cmd->add_option("--huber-delta", cfg.huber_delta, "Huber threshold");
    cmd->add_option("--mu", [&cfg](const std::vector<std::string>& v) {
      cfg.mu = std::stod(v.at(0));
      return true;
    }, "fixed MCP penalty level (skips the grid)");
    cmd->add_option("--mu-grid", cfg.mu_grid, "explicit mu grid values")->delimiter(',');
    cmd->add_option("--gamma", cfg.gamma, "MCP concavity (> 1)")->default_val(1.5);
    cmd->add_option("--eta", cfg.eta, "'auto' or a fixed positive weight")->default_val("auto");
    cmd->add_option("--cap-k", cfg.cap_k, "rank cap (0 = sqrt rule)");
    cmd->add_option("--alpha-m", cfg.alpha_m, "infinity-norm cap on m");
    cmd->add_option("--alpha-theta", cfg.alpha_theta, "infinity-norm cap on theta");
    cmd->add_option("--ic-coef", cfg.ic_coef, "IC penalty coefficient")->default_val(0.125);
    cmd->add_option("--seed", cfg.seed, "random seed");
    cmd->add_option("--out", cfg.out_path, "report output path (default stdout)");
  };

  CLI::App* fit = app.add_subcommand("fit", "full pipeline: mu selection, MCP fit, rank "
                                            "estimation, refit, eta selection, inference");
  fit->add_option("--input", cfg.input_path, "training triplets (tsv/csv)")->required();
  fit->add_option("--test", cfg.test_path, "held-out triplets for MSPE / rank-bar");
  fit->add_option("--pred-out", cfg.pred_out, "write clipped predictions (dense csv)");
  fit->add_option("--se-sample", cfg.se_sample, "report standard errors at N observed cells");
  fit->add_option("--clip-lo", cfg.clip_lo, "prediction clip lower bound")->default_val(1.0);
  fit->add_option("--clip-hi", cfg.clip_hi, "prediction clip upper bound")->default_val(5.0);
  add_model_flags(fit);

  CLI::App* ranks = app.add_subcommand("ranks", "rank report only");
  ranks->add_option("--input", cfg.input_path, "training triplets (tsv/csv)")->required();
  add_model_flags(ranks);

  CLI::App* sim = app.add_subcommand("simulate", "synthetic-design Monte Carlo experiments");
  sim->add_option("--n", cfg.sim_n, "square dimension")->default_val(300);
  sim->add_option("--ds", cfg.sim_ds, "shared rank d_s")->default_val(5);
  sim->add_option("--dtheta", cfg.sim_dtheta, "theta-specific rank d_theta")->default_val(2);
  sim->add_option("--dm", cfg.sim_dm, "m-specific rank d_m")->default_val(2);
  sim->add_option("--mp", cfg.sim_mp, "missingness intercept m_p")->default_val(1.0);
  sim->add_option("--sigma2", cfg.sim_sigma2, "noise variance")->default_val(0.5);
  sim->add_option("--reps", cfg.sim_reps, "replicates")->default_val(5);
  sim->add_option("--methods", cfg.sim_methods, "osh,sh,mht,truth")->delimiter(',');
  add_model_flags(sim);

  CLI::App* eval = app.add_subcommand("evaluate", "MSPE / expected percentile ranking of a "
                                                  "prediction matrix on a test file");
  eval->add_option("--pred", cfg.pred_path, "dense prediction csv")->required();
  eval->add_option("--test", cfg.test_path, "test triplets")->required();
  eval->add_option("--clip-lo", cfg.clip_lo, "prediction clip lower bound")->default_val(1.0);
  eval->add_option("--clip-hi", cfg.clip_hi, "prediction clip upper bound")->default_val(5.0);
  eval->add_option("--out", cfg.out_path, "output path (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  cfg.command = app.get_subcommands().front()->get_name();
  return sfmc::run(cfg);
}

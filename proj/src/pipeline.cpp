#include "sfmc/pipeline.hpp"

#include <cmath>

namespace sfmc {

PipelineResult run_pipeline(const MaskedData& data, const PipelineConfig& cfg) {
  data.validate();
  if (data.observed_count() == 0) throw InputError("run_pipeline: dataset has no observed entries");

  std::vector<double> grid;
  if (cfg.fixed_mu.has_value())
    grid = {*cfg.fixed_mu};
  else if (!cfg.mu_grid.empty())
    grid = cfg.mu_grid;
  else
    grid = default_mu_grid(data, cfg.cap_k);

  MuSelectOptions opts;
  opts.gamma = cfg.gamma;
  opts.eta = cfg.eta_init;
  opts.k = cfg.cap_k;
  opts.ic_coef = cfg.ic_coef;
  opts.fit_cfg = cfg.fit_cfg;
  opts.fit_cfg.eta = cfg.eta_init;
  opts.mcp_tol = cfg.mcp_tol;
  opts.mcp_max_iter = cfg.mcp_max_iter;

  PipelineResult out;
  out.mu_selection = select_mu(data, cfg.loss, grid, opts);
  out.ranks = out.mu_selection.ranks;
  out.sh_fit = out.mu_selection.refit;

  double eta_final = cfg.eta_fixed;
  if (cfg.eta_auto) {
    try {
      out.eta = select_eta(data, out.sh_fit.model, cfg.loss);
      eta_final = out.eta.eta_hat;
    } catch (const Error& e) {
      out.warning = std::string("eta selection failed (") + e.what() + "); keeping eta = " +
                    std::to_string(cfg.eta_init);
      out.eta.eta_hat = cfg.eta_init;
      eta_final = cfg.eta_init;
    }
  } else {
    out.eta.eta_hat = cfg.eta_fixed;
    out.eta.method = EtaMethod::automatic;
  }

  if (std::abs(eta_final - cfg.eta_init) > 1e-12 * (1.0 + std::abs(cfg.eta_init)) &&
      out.ranks.ranks.total() > 0) {
    FitConfig fc = cfg.fit_cfg;
    fc.eta = eta_final;
    out.osh_fit = fit_known_rank(data, out.ranks.ranks, cfg.loss, fc, &out.sh_fit.model);
  } else {
    out.osh_fit = out.sh_fit;
  }
  out.params = assemble(out.osh_fit.model);
  return out;
}

}  // namespace sfmc

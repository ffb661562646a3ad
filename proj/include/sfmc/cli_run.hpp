#pragma once

#include <optional>
#include <string>
#include <vector>

#include "sfmc/types.hpp"

namespace sfmc {

// Parsed command line. run() dispatches on `command` and maps module errors
// to exit codes (0 success, 2 input, 3 numerical, 4 non-convergence).
struct RunConfig {
  std::string command;  // fit | simulate | evaluate | ranks
  std::string input_path;
  std::string test_path;
  std::string pred_path;   // evaluate: dense prediction csv
  std::string out_path;
  std::string pred_out;    // fit: write clipped predictions here
  std::string loss = "quadratic";
  double huber_delta = 1.0;
  std::optional<double> mu;
  std::vector<double> mu_grid;
  double gamma = 1.5;
  std::string eta = "auto";  // "auto" or a number
  Index cap_k = 0;
  double alpha_m = 20.0;
  double alpha_theta = 20.0;
  double ic_coef = 0.125;
  std::uint64_t seed = 20240501;
  int se_sample = 0;  // fit: report standard errors at this many observed cells
  double clip_lo = 1.0;
  double clip_hi = 5.0;
  // simulate
  Index sim_n = 300;
  Index sim_ds = 5, sim_dtheta = 2, sim_dm = 2;
  double sim_mp = 1.0;
  double sim_sigma2 = 0.5;
  int sim_reps = 5;
  std::vector<std::string> sim_methods = {"osh", "sh", "mht"};
};

int run(const RunConfig& config);

}  // namespace sfmc

#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace sfmc {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;
using Index = Eigen::Index;

// ---------------------------------------------------------------------------
// Errors. Exit codes: 2 input, 3 numerical, 4 non-convergence.
// ---------------------------------------------------------------------------

class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
  virtual int exit_code() const noexcept { return 3; }
};

class InputError : public Error {
 public:
  using Error::Error;
  int exit_code() const noexcept override { return 2; }
};

class NumericalError : public Error {
 public:
  using Error::Error;
  int exit_code() const noexcept override { return 3; }
};

class ConvergenceError : public Error {
 public:
  using Error::Error;
  int exit_code() const noexcept override { return 4; }
};

// Raised by rank estimation when the threshold produces incompatible counts.
class RankConsistencyError : public NumericalError {
 public:
  RankConsistencyError(const std::string& msg, Index d_hat, Index d_sm, Index d_sth)
      : NumericalError(msg), d_hat(d_hat), d_sm(d_sm), d_sth(d_sth) {}
  Index d_hat, d_sm, d_sth;
};

// ---------------------------------------------------------------------------
// Core data carriers.
// ---------------------------------------------------------------------------

// Observed matrix with binary mask. Entries of x where w == 0 carry no
// information and may hold any payload (including NaN); they are never read.
struct MaskedData {
  Mat x;
  Mat w;

  Index n1() const { return x.rows(); }
  Index n2() const { return x.cols(); }

  Index observed_count() const {
    Index c = 0;
    for (Index j = 0; j < w.cols(); ++j)
      for (Index i = 0; i < w.rows(); ++i)
        if (w(i, j) != 0.0) ++c;
    return c;
  }

  void validate() const {
    if (x.rows() != w.rows() || x.cols() != w.cols())
      throw InputError("MaskedData: x is " + std::to_string(x.rows()) + "x" +
                       std::to_string(x.cols()) + " but w is " + std::to_string(w.rows()) +
                       "x" + std::to_string(w.cols()));
    for (Index j = 0; j < w.cols(); ++j)
      for (Index i = 0; i < w.rows(); ++i) {
        const double wij = w(i, j);
        if (wij != 0.0 && wij != 1.0)
          throw InputError("MaskedData: w(" + std::to_string(i) + "," + std::to_string(j) +
                           ") = " + std::to_string(wij) + " is not binary");
      }
  }
};

// Dense parameter matrices: m (data-side) and theta (logits of the
// observation probability).
struct ParamPair {
  Mat m;
  Mat theta;

  Index n1() const { return m.rows(); }
  Index n2() const { return m.cols(); }

  // Vertical stack [m; theta], the total parameter matrix (2*n1 x n2).
  Mat stacked() const {
    Mat h(2 * m.rows(), m.cols());
    h.topRows(m.rows()) = m;
    h.bottomRows(theta.rows()) = theta;
    return h;
  }

  static ParamPair from_stacked(const Mat& h) {
    if (h.rows() % 2 != 0) throw InputError("stacked parameter matrix must have even row count");
    const Index n1 = h.rows() / 2;
    return ParamPair{h.topRows(n1), h.bottomRows(n1)};
  }
};

// Per-fit diagnostics shared by the solvers.
struct FitReport {
  std::vector<double> objective_trace;
  int iterations = 0;
  bool converged = false;
  std::string warning;
  double final_objective = std::numeric_limits<double>::quiet_NaN();
  double grad_norm = std::numeric_limits<double>::quiet_NaN();
};

}  // namespace sfmc

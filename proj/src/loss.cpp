#include "sfmc/loss.hpp"

#include <cmath>

#include "sfmc/numeric.hpp"

namespace sfmc {

LossSpec LossSpec::huber(double delta) {
  if (!(delta > 0.0)) throw InputError("huber: delta must be positive");
  LossSpec l;
  l.kind = Kind::huber;
  l.delta = delta;
  return l;
}

LossSpec LossSpec::exp_family(std::function<double(double)> b, std::function<double(double)> b1,
                              std::function<double(double)> b2) {
  if (!b || !b1 || !b2) throw InputError("exp_family: b, b', b'' must all be provided");
  LossSpec l;
  l.kind = Kind::exp_family;
  l.b = std::move(b);
  l.b_prime = std::move(b1);
  l.b_second = std::move(b2);
  return l;
}

LossSpec LossSpec::gaussian_glm() {
  return exp_family([](double m) { return 0.5 * m * m; }, [](double m) { return m; },
                    [](double) { return 1.0; });
}

LossSpec LossSpec::poisson_glm() {
  return exp_family([](double m) { return std::exp(m); }, [](double m) { return std::exp(m); },
                    [](double m) { return std::exp(m); });
}

double LossSpec::value(double x, double m) const {
  switch (kind) {
    case Kind::quadratic: {
      const double r = x - m;
      return -0.5 * r * r;
    }
    case Kind::exp_family:
      return x * m - b(m);
    case Kind::huber: {
      const double r = x - m;
      const double a = std::abs(r);
      if (a <= delta) return -0.5 * r * r;
      return -delta * (a - 0.5 * delta);
    }
  }
  return 0.0;
}

double LossSpec::deriv(double x, double m) const {
  switch (kind) {
    case Kind::quadratic:
      return x - m;
    case Kind::exp_family:
      return x - b_prime(m);
    case Kind::huber: {
      const double r = x - m;
      if (std::abs(r) <= delta) return r;
      return r > 0.0 ? delta : -delta;
    }
  }
  return 0.0;
}

double LossSpec::second(double x, double m) const {
  switch (kind) {
    case Kind::quadratic:
      return -1.0;
    case Kind::exp_family:
      return -b_second(m);
    case Kind::huber:
      // quadratic-branch value at the kink |x - m| == delta
      return std::abs(x - m) <= delta ? -1.0 : 0.0;
  }
  return 0.0;
}

double LossSpec::curvature_bound(double alpha_m) const {
  switch (kind) {
    case Kind::quadratic:
    case Kind::huber:
      return 1.0;
    case Kind::exp_family: {
      double best = 0.0;
      const int grid = 256;
      for (int i = 0; i <= grid; ++i) {
        const double m = -alpha_m + 2.0 * alpha_m * i / grid;
        best = std::max(best, std::abs(b_second(m)));
      }
      return std::max(best, 1e-12);
    }
  }
  return 1.0;
}

const char* LossSpec::name() const {
  switch (kind) {
    case Kind::quadratic:
      return "quadratic";
    case Kind::exp_family:
      return "expfamily";
    case Kind::huber:
      return "huber";
  }
  return "?";
}

namespace {

[[noreturn]] void throw_nonfinite(const char* what, Index i, Index j, double v) {
  throw NumericalError(std::string("non-finite ") + what + " at (" + std::to_string(i) + "," +
                       std::to_string(j) + "): " + std::to_string(v));
}

void check_dims(const MaskedData& data, const ParamPair& p) {
  if (data.x.rows() != p.m.rows() || data.x.cols() != p.m.cols() ||
      p.m.rows() != p.theta.rows() || p.m.cols() != p.theta.cols())
    throw InputError("objective: data and parameter dimensions differ");
}

}  // namespace

double objective(const MaskedData& data, const ParamPair& p, const LossSpec& loss, double eta) {
  check_dims(data, p);
  const Index n1 = data.n1(), n2 = data.n2();
  double total = 0.0;
  for (Index j = 0; j < n2; ++j) {
    for (Index i = 0; i < n1; ++i) {
      const double th = p.theta(i, j);
      if (!std::isfinite(th)) throw_nonfinite("theta", i, j, th);
      if (data.w(i, j) != 0.0) {
        const double m = p.m(i, j);
        if (!std::isfinite(m)) throw_nonfinite("m", i, j, m);
        const double x = data.x(i, j);
        if (!std::isfinite(x)) throw_nonfinite("x", i, j, x);
        total += softplus(-th) - eta * loss.value(x, m);
      } else {
        total += softplus(th);
      }
    }
  }
  if (!std::isfinite(total)) throw NumericalError("objective: non-finite total");
  return total;
}

void gradient(const MaskedData& data, const ParamPair& p, const LossSpec& loss, double eta,
              Mat& grad_m, Mat& grad_theta) {
  check_dims(data, p);
  const Index n1 = data.n1(), n2 = data.n2();
  grad_m.resize(n1, n2);
  grad_theta.resize(n1, n2);
  for (Index j = 0; j < n2; ++j) {
    for (Index i = 0; i < n1; ++i) {
      const double th = p.theta(i, j);
      if (!std::isfinite(th)) throw_nonfinite("theta", i, j, th);
      const double w = data.w(i, j);
      grad_theta(i, j) = expit(th) - w;
      if (w != 0.0) {
        const double m = p.m(i, j);
        const double x = data.x(i, j);
        if (!std::isfinite(m)) throw_nonfinite("m", i, j, m);
        if (!std::isfinite(x)) throw_nonfinite("x", i, j, x);
        grad_m(i, j) = -eta * loss.deriv(x, m);
      } else {
        grad_m(i, j) = 0.0;
      }
    }
  }
}

void second_derivative_diag(const MaskedData& data, const ParamPair& p, const LossSpec& loss,
                            double eta, Mat& h_m, Mat& h_theta) {
  check_dims(data, p);
  const Index n1 = data.n1(), n2 = data.n2();
  h_m.resize(n1, n2);
  h_theta.resize(n1, n2);
  for (Index j = 0; j < n2; ++j) {
    for (Index i = 0; i < n1; ++i) {
      h_theta(i, j) = logistic_weight(p.theta(i, j));
      h_m(i, j) = data.w(i, j) != 0.0 ? -eta * loss.second(data.x(i, j), p.m(i, j)) : 0.0;
    }
  }
}

}  // namespace sfmc

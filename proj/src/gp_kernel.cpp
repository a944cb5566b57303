#include "gplfm/gp_kernel.hpp"

#include <cmath>

#include "gplfm/error.hpp"

namespace gplfm {

Matern32Params::Matern32Params(double alpha, double ell) : alpha_(alpha), ell_(ell) {
  if (!(alpha > 0.0) || !std::isfinite(alpha)) throw InvalidInput("Matern32: alpha must be positive");
  if (!(ell > 0.0) || !std::isfinite(ell)) throw InvalidInput("Matern32: length scale must be positive");
  lambda_ = std::sqrt(3.0) / ell;
}

double kernel_eval(const Matern32Params& p, double tau) {
  const double r = p.lambda() * std::abs(tau);
  return p.alpha() * p.alpha() * (1.0 + r) * std::exp(-r);
}

GpKernelSsm to_state_space(const Matern32Params& p, double dt) {
  if (!(dt > 0.0)) throw InvalidInput("to_state_space: dt must be positive");
  const double lam = p.lambda();
  GpKernelSsm g;
  g.params = p;
  g.dt = dt;
  g.fc.resize(2, 2);
  g.fc << 0.0, 1.0, -lam * lam, -2.0 * lam;
  g.lc.resize(2, 1);
  g.lc << 0.0, 1.0;
  g.hc.resize(1, 2);
  g.hc << 1.0, 0.0;
  g.qc = 4.0 * p.alpha() * p.alpha() * lam * lam * lam;
  g.pinf = solve_continuous_lyapunov(g.fc, g.qc_matrix());
  g.fd = expm(g.fc * dt);
  g.qf = symmetrized(g.pinf - g.fd * g.pinf * g.fd.transpose());
  return g;
}

double ssm_covariance(const GpKernelSsm& g, int lag_steps) {
  if (lag_steps < 0) throw InvalidInput("ssm_covariance: lag must be non-negative");
  Matrix z = g.pinf * g.hc.transpose();
  for (int k = 0; k < lag_steps; ++k) z = g.fd * z;
  return (g.hc * z)(0, 0);
}

}  // namespace gplfm

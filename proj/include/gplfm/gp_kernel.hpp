#pragma once

#include "gplfm/linalg.hpp"

namespace gplfm {

/// Matérn nu = 3/2 hyperparameters. `alpha` is the marginal standard deviation of the
/// force, `ell` the length scale in seconds.
class Matern32Params {
public:
  Matern32Params(double alpha, double ell);

  double alpha() const { return alpha_; }
  double ell() const { return ell_; }
  /// sqrt(2 nu) / ell with nu = 3/2.
  double lambda() const { return lambda_; }

private:
  double alpha_;
  double ell_;
  double lambda_;
};

/// k(tau) = alpha^2 (1 + lambda |tau|) exp(-lambda |tau|)
double kernel_eval(const Matern32Params& p, double tau);

/// Companion-form SDE z' = Fc z + Lc w, f = Hc z, with w white of spectral density qc,
/// plus its steady state and exact discretization at dt.
struct GpKernelSsm {
  Matern32Params params{1.0, 1.0};
  double dt = 0.0;
  Matrix fc;    // 2x2
  Matrix lc;    // 2x1
  Matrix hc;    // 1x2
  double qc = 0.0;
  Matrix pinf;  // steady-state covariance, from the continuous Lyapunov equation
  Matrix fd;    // exp(Fc dt)
  Matrix qf;    // Pinf - Fd Pinf Fd^T

  Matrix qc_matrix() const { return lc * qc * lc.transpose(); }
};

/// qc = 4 alpha^2 lambda^3 gives stationary variance alpha^2 for the output f.
GpKernelSsm to_state_space(const Matern32Params& p, double dt);

/// Hc Fd^lag Pinf Hc^T, the stationary covariance implied by the state-space form at lag*dt.
double ssm_covariance(const GpKernelSsm& g, int lag_steps);

}  // namespace gplfm

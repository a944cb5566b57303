#pragma once

#include <Eigen/Dense>

namespace gplfm {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

/// Matrix exponential, Padé approximant with scaling and squaring.
Matrix expm(const Matrix& a);

/// Solves A X + X A^T + Q = 0 for X (Bartels-Stewart on the complex Schur form).
/// Throws NumericalError when A has eigenvalues with lambda_i + conj(lambda_j) ~ 0,
/// i.e. when no unique (stationary) solution exists.
Matrix solve_continuous_lyapunov(const Matrix& a, const Matrix& q);

/// Zero- and first-order-hold input matrices for x' = A x + B u over one step dt.
/// With u linear over the step from u_k to u_{k+1}:
///   x_{k+1} = Ad x_k + (gamma0 - gamma1) u_k + gamma1 u_{k+1}.
/// gamma0 alone is the zero-order-hold input matrix. Computed with one augmented
/// exponential, so A may be singular.
struct HoldMatrices {
  Matrix ad;
  Matrix gamma0;
  Matrix gamma1;
};
HoldMatrices hold_discretize(const Matrix& a, const Matrix& b, double dt);

inline Matrix symmetrized(const Matrix& m) { return 0.5 * (m + m.transpose()); }

/// Cholesky-based PSD check after symmetrization; `jitter` is added relative to the
/// largest diagonal entry so semidefinite matrices pass.
bool is_psd(const Matrix& m, double jitter = 1e-12);

/// log det of a symmetric positive-definite matrix. Throws InvalidInput if not PD.
double logdet_spd(const Matrix& m);

Matrix block_diagonal(const Matrix& a, const Matrix& b);

}  // namespace gplfm

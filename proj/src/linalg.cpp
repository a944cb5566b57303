#include "gplfm/linalg.hpp"

#include <cmath>
#include <complex>

#include <Eigen/Eigenvalues>
#include <unsupported/Eigen/MatrixFunctions>

#include "gplfm/error.hpp"

namespace gplfm {

Matrix expm(const Matrix& a) {
  if (a.rows() != a.cols()) throw InvalidInput("expm: matrix must be square");
  if (a.size() == 0) return a;
  if (!a.allFinite()) throw NumericalError("expm: non-finite input");
  Matrix e = a.exp();
  if (!e.allFinite()) throw NumericalError("expm: overflow in matrix exponential");
  return e;
}

Matrix solve_continuous_lyapunov(const Matrix& a, const Matrix& q) {
  const Eigen::Index n = a.rows();
  if (a.cols() != n || q.rows() != n || q.cols() != n)
    throw InvalidInput("lyapunov: dimension mismatch");
  if (n == 0) return Matrix(0, 0);

  using Complex = std::complex<double>;
  using CMatrix = Eigen::MatrixXcd;

  Eigen::ComplexSchur<Matrix> schur(a);
  if (schur.info() != Eigen::Success) throw NumericalError("lyapunov: Schur decomposition failed");
  const CMatrix& t = schur.matrixT();
  const CMatrix& u = schur.matrixU();

  // T Y + Y T^H = C with C = -U^H Q U; Y = U^H X U.
  CMatrix c = -(u.adjoint() * q.cast<Complex>() * u);
  CMatrix y = CMatrix::Zero(n, n);
  const double scale = std::max(1.0, t.cwiseAbs().maxCoeff());

  for (Eigen::Index j = n - 1; j >= 0; --j) {
    for (Eigen::Index i = n - 1; i >= 0; --i) {
      Complex rhs = c(i, j);
      for (Eigen::Index k = i + 1; k < n; ++k) rhs -= t(i, k) * y(k, j);
      for (Eigen::Index k = j + 1; k < n; ++k) rhs -= y(i, k) * std::conj(t(j, k));
      const Complex denom = t(i, i) + std::conj(t(j, j));
      if (std::abs(denom) <= 1e-14 * scale)
        throw NumericalError("lyapunov: system has marginally stable or mirrored eigenvalues");
      y(i, j) = rhs / denom;
    }
  }

  Matrix x = (u * y * u.adjoint()).real();
  return symmetrized(x);
}

HoldMatrices hold_discretize(const Matrix& a, const Matrix& b, double dt) {
  const Eigen::Index n = a.rows();
  const Eigen::Index m = b.cols();
  if (a.cols() != n || b.rows() != n) throw InvalidInput("hold_discretize: dimension mismatch");
  if (!(dt > 0.0)) throw InvalidInput("hold_discretize: dt must be positive");

  Matrix big = Matrix::Zero(n + 2 * m, n + 2 * m);
  big.topLeftCorner(n, n) = a * dt;
  big.block(0, n, n, m) = b * dt;
  big.block(n, n + m, m, m) = Matrix::Identity(m, m);
  const Matrix e = expm(big);
  return {e.topLeftCorner(n, n), e.block(0, n, n, m), e.block(0, n + m, n, m)};
}

bool is_psd(const Matrix& m, double jitter) {
  if (m.rows() != m.cols()) return false;
  if (m.size() == 0) return true;
  if (!m.allFinite()) return false;
  const Matrix s = symmetrized(m);
  const double d = std::max(s.diagonal().cwiseAbs().maxCoeff(), 1e-300);
  Eigen::LLT<Matrix> llt(s + jitter * d * Matrix::Identity(s.rows(), s.cols()));
  return llt.info() == Eigen::Success;
}

double logdet_spd(const Matrix& m) {
  Eigen::LLT<Matrix> llt(symmetrized(m));
  if (llt.info() != Eigen::Success) throw InvalidInput("logdet: matrix is not positive definite");
  const Matrix& l = llt.matrixL();
  return 2.0 * l.diagonal().array().log().sum();
}

Matrix block_diagonal(const Matrix& a, const Matrix& b) {
  Matrix out = Matrix::Zero(a.rows() + b.rows(), a.cols() + b.cols());
  out.topLeftCorner(a.rows(), a.cols()) = a;
  out.bottomRightCorner(b.rows(), b.cols()) = b;
  return out;
}

}  // namespace gplfm

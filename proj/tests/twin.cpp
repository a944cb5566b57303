#include "twin.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <string>

#include <Eigen/Eigenvalues>

namespace twin {

Twin make(const Options& opts) {
  Twin t;
  t.options = opts;
  const auto sys = gplfm::spring_mass_chain(opts.n_dof, opts.mass, opts.stiffness);
  t.modal = gplfm::solve_modal(sys, std::min(opts.n_modes, opts.n_dof)).with_uniform_damping(opts.zeta);

  gplfm::SensorLayout layout;
  layout.accel_dofs = opts.accel_dofs;
  if (layout.accel_dofs.empty())
    for (Index d = 0; d < opts.n_dof; ++d) layout.accel_dofs.push_back(d);
  t.channels = layout.channels();
  if (opts.duplicate_dof)
    t.channels.push_back({"a" + std::to_string(*opts.duplicate_dof) + "dup", gplfm::Quantity::Acceleration, *opts.duplicate_dof});

  t.scenario.force = {opts.peak, 8.0 / 128.0, 16.0 / 128.0, 0.5};
  t.scenario.loads = {{opts.load_dof, 1.0}};
  t.scenario.duration = opts.duration;
  t.scenario.fs = opts.fs;
  t.scenario.seed = opts.seed;
  t.scenario.noise.accel = 0.0;
  if (opts.snr_db) {
    const auto clean = gplfm::simulate(t.scenario, t.modal, t.channels);
    double ss = 0.0;
    std::size_t n = 0;
    for (const auto& ch : clean.clean.channels)
      for (double v : ch.values) {
        ss += v * v;
        ++n;
      }
    t.scenario.noise.accel = std::sqrt(ss / static_cast<double>(n)) * std::pow(10.0, -*opts.snr_db / 20.0);
  }
  t.sim = gplfm::simulate(t.scenario, t.modal, t.channels);
  return t;
}

gplfm::EstimationConfig estimation_config(int threads) {
  gplfm::EstimationConfig c;
  c.prior.restarts = 4;
  c.prior.max_iterations = 200;
  c.prior.seed = 11;
  c.threads = threads;
  return c;
}

double correlation(const std::vector<double>& a, const std::vector<double>& b) {
  const double n = static_cast<double>(a.size());
  const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
  const double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  return sab / std::sqrt(saa * sbb);
}

std::vector<double> row(const gplfm::Matrix& m, Index r) {
  std::vector<double> out(static_cast<std::size_t>(m.cols()));
  for (Index k = 0; k < m.cols(); ++k) out[static_cast<std::size_t>(k)] = m(r, k);
  return out;
}

using namespace gplfm;

gplfm::Matrix sample_lgm(const gplfm::LinearGaussianModel& m, const gplfm::GaussianState& s0, Index steps,
                         std::uint64_t seed, gplfm::Matrix* states) {
  NormalStream normal(seed);
  auto draw = [&](const Matrix& cov) {
    const Index n = cov.rows();
    Eigen::SelfAdjointEigenSolver<Matrix> es(cov);
    Vector z(n);
    for (Index i = 0; i < n; ++i) z(i) = normal();
    return Vector(es.eigenvectors() * (es.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal() * z));
  };
  Matrix y(m.n_outputs(), steps);
  Matrix xs(m.n_states(), steps);
  Vector x = s0.mean + draw(s0.cov);
  for (Index k = 0; k < steps; ++k) {
    if (k > 0) x = m.transition * x + draw(m.process_noise);
    xs.col(k) = x;
    y.col(k) = m.observation * x + draw(m.measurement_noise);
  }
  if (states) *states = xs;
  return y;
}

DensePosterior dense_posterior(const gplfm::LinearGaussianModel& m, const gplfm::Matrix& y,
                              const gplfm::GaussianState& s0) {
  const Index n = m.n_states(), ny = m.n_outputs(), steps = y.cols();
  std::vector<Matrix> marg(static_cast<std::size_t>(steps));
  marg[0] = s0.cov;
  for (Index k = 1; k < steps; ++k)
    marg[static_cast<std::size_t>(k)] =
        m.transition * marg[static_cast<std::size_t>(k - 1)] * m.transition.transpose() + m.process_noise;
  Matrix sxx(n * steps, n * steps);
  for (Index i = 0; i < steps; ++i) {
    Matrix f = Matrix::Identity(n, n);
    for (Index j = i; j < steps; ++j) {
      // Cov(s_j, s_i) = F^{j-i} P_i
      const Matrix c = f * marg[static_cast<std::size_t>(i)];
      sxx.block(j * n, i * n, n, n) = c;
      sxx.block(i * n, j * n, n, n) = c.transpose();
      f = m.transition * f;
    }
  }
  std::vector<Index> obs;  // flattened (k, channel) indices present
  for (Index k = 0; k < steps; ++k)
    for (Index c = 0; c < ny; ++c)
      if (std::isfinite(y(c, k))) obs.push_back(k * ny + c);
  const Index no = static_cast<Index>(obs.size());
  Matrix hbig = Matrix::Zero(no, n * steps);
  Matrix rbig = Matrix::Zero(no, no);
  Vector yv(no);
  for (Index a = 0; a < no; ++a) {
    const Index k = obs[static_cast<std::size_t>(a)] / ny, c = obs[static_cast<std::size_t>(a)] % ny;
    hbig.block(a, k * n, 1, n) = m.observation.row(c);
    yv(a) = y(c, k);
    for (Index b = 0; b < no; ++b) {
      const Index k2 = obs[static_cast<std::size_t>(b)] / ny, c2 = obs[static_cast<std::size_t>(b)] % ny;
      if (k2 == k) rbig(a, b) = m.measurement_noise(c, c2);
    }
  }
  const Matrix syy = hbig * sxx * hbig.transpose() + rbig;
  const Eigen::LDLT<Matrix> ldlt(syy);
  const Vector alpha = ldlt.solve(yv);
  const Vector mean = sxx * hbig.transpose() * alpha;
  DensePosterior out;
  out.mean = Eigen::Map<const Matrix>(mean.data(), n, steps);
  const double logdet = ldlt.vectorD().array().log().sum();
  out.loglik = -0.5 * (yv.dot(alpha) + logdet + static_cast<double>(no) * std::log(2.0 * std::numbers::pi));
  return out;
}

}  // namespace twin

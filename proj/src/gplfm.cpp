#include "gplfm/gplfm.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "gplfm/error.hpp"

namespace gplfm {

LinearGaussianModel gp_observation_model(const GpKernelSsm& g, double noise_var) {
  return {g.fd, g.hc, g.qf, Matrix::Constant(1, 1, noise_var)};
}

StateKind StateIndexMap::kind(Index state) const {
  if (state < 0 || state >= size()) throw InvalidInput("state index out of range");
  if (state < n_modes_) return StateKind::Displacement;
  if (state < 2 * n_modes_) return StateKind::Velocity;
  return (state - 2 * n_modes_) % 2 == 0 ? StateKind::Force : StateKind::ForceRate;
}

Index StateIndexMap::mode_of(Index state) const {
  if (state < 0 || state >= size()) throw InvalidInput("state index out of range");
  if (state < 2 * n_modes_) return state % n_modes_;
  return (state - 2 * n_modes_) / 2;
}

AugmentedModel assemble(const DiscreteStateSpace& dss, std::span<const GpKernelSsm> gps,
                        const Matrix& qx, const Matrix& r) {
  const ContinuousStateSpace& css = dss.continuous;
  const Index nr = css.n_inputs();
  const Index ns = css.n_states();
  const Index ny = css.n_outputs();
  if (static_cast<Index>(gps.size()) != nr)
    throw InvalidInput("assemble: need exactly one latent-force GP per retained mode");
  if (ns != 2 * nr) throw InvalidInput("assemble: structural state must be [r; r']");
  if (qx.rows() != ns || qx.cols() != ns) throw InvalidInput("assemble: Qx has wrong dimension");
  if (r.rows() != ny || r.cols() != ny) throw InvalidInput("assemble: R has wrong dimension");
  for (const auto& g : gps) {
    if (std::abs(g.dt - dss.dt) > 1e-12 * dss.dt) throw InvalidInput("assemble: GP and structure dt differ");
    if (g.fc.rows() != 2) throw InvalidInput("assemble: only 2-state GP blocks are supported");
  }

  const Index n = ns + 2 * nr;
  AugmentedModel m;
  m.dt = dss.dt;
  m.gps.assign(gps.begin(), gps.end());
  m.index_map = StateIndexMap(nr);

  m.fc = Matrix::Zero(n, n);
  m.fc.topLeftCorner(ns, ns) = css.ac;
  Matrix ha = Matrix::Zero(ny, n);
  ha.leftCols(ns) = css.gc;
  Matrix qa = Matrix::Zero(n, n);
  qa.topLeftCorner(ns, ns) = qx;
  m.qc = Matrix::Zero(n, n);
  m.qc.topLeftCorner(ns, ns) = qx / dss.dt;

  for (Index j = 0; j < nr; ++j) {
    const GpKernelSsm& g = gps[static_cast<std::size_t>(j)];
    const Index off = m.index_map.force(j);
    m.fc.block(0, off, ns, 2) = css.bc.col(j) * g.hc;
    m.fc.block(off, off, 2, 2) = g.fc;
    ha.block(0, off, ny, 2) = css.jc.col(j) * g.hc;
    qa.block(off, off, 2, 2) = g.qf;
    m.qc.block(off, off, 2, 2) = g.qc_matrix();
  }

  m.discrete.transition = expm(m.fc * dss.dt);
  m.discrete.observation = std::move(ha);
  m.discrete.process_noise = symmetrized(qa);
  m.discrete.measurement_noise = symmetrized(r);
  return m;
}

GaussianState initial_state(const AugmentedModel& m) {
  const Index n = m.n_states();
  const Index ns = 2 * m.n_modes();
  double scale = 1.0;
  try {
    const Matrix pinf = solve_continuous_lyapunov(m.fc, m.qc);
    const double s = pinf.diagonal().head(ns).maxCoeff();
    if (s > 0.0 && std::isfinite(s)) scale = s;
  } catch (const NumericalError&) {
    // undamped structure: no stationary variance, keep unit scale
  }
  GaussianState s0;
  s0.mean = Vector::Zero(n);
  s0.cov = Matrix::Zero(n, n);
  s0.cov.topLeftCorner(ns, ns) = 1e-6 * scale * Matrix::Identity(ns, ns);
  for (Index j = 0; j < m.n_modes(); ++j) {
    const Index off = m.index_map.force(j);
    s0.cov.block(off, off, 2, 2) = m.gps[static_cast<std::size_t>(j)].pinf;
  }
  return s0;
}

FilterResult kalman_filter(const LinearGaussianModel& m, const Matrix& y, const GaussianState& s0,
                           double dt) {
  const Index n = m.n_states();
  const Index ny = m.n_outputs();
  if (y.rows() != ny) throw InvalidInput("kalman_filter: observation rows do not match the model outputs");
  if (s0.mean.size() != n || s0.cov.rows() != n || s0.cov.cols() != n)
    throw InvalidInput("kalman_filter: initial state has wrong dimension");
  const Index steps = y.cols();

  FilterResult out;
  out.predicted.reserve(static_cast<std::size_t>(steps));
  out.filtered.reserve(static_cast<std::size_t>(steps));
  out.normalized_innovations.reserve(static_cast<std::size_t>(steps));
  const double log2pi = std::log(2.0 * std::numbers::pi);
  const Matrix identity = Matrix::Identity(n, n);

  std::vector<Index> rows;
  rows.reserve(static_cast<std::size_t>(ny));
  GaussianState prior = s0;
  for (Index k = 0; k < steps; ++k) {
    if (k > 0) {
      const GaussianState& prev = out.filtered.back();
      prior.mean = m.transition * prev.mean;
      prior.cov = symmetrized(m.transition * prev.cov * m.transition.transpose() + m.process_noise);
      prior.t = prev.t + dt;
    }
    out.predicted.push_back(prior);

    rows.clear();
    for (Index i = 0; i < ny; ++i)
      if (std::isfinite(y(i, k))) rows.push_back(i);

    GaussianState post = prior;
    Vector whitened;
    if (!rows.empty()) {
      const Index nv = static_cast<Index>(rows.size());
      Matrix h(nv, n);
      Matrix r(nv, nv);
      Vector innov(nv);
      for (Index a = 0; a < nv; ++a) {
        const Index ra = rows[static_cast<std::size_t>(a)];
        h.row(a) = m.observation.row(ra);
        innov(a) = y(ra, k);
        for (Index b = 0; b < nv; ++b) r(a, b) = m.measurement_noise(ra, rows[static_cast<std::size_t>(b)]);
      }
      innov -= h * prior.mean;
      const Matrix ph = prior.cov * h.transpose();
      const Matrix s = symmetrized(h * ph + r);
      Eigen::LLT<Matrix> llt(s);
      if (llt.info() != Eigen::Success || !s.allFinite())
        throw NumericalError("kalman_filter: innovation covariance is not positive definite at step " +
                             std::to_string(k));
      const Matrix gain = llt.solve(ph.transpose()).transpose();
      post.mean = prior.mean + gain * innov;
      const Matrix ikh = identity - gain * h;
      post.cov = symmetrized(ikh * prior.cov * ikh.transpose() + gain * r * gain.transpose());

      whitened = llt.matrixL().solve(innov);
      const Matrix& l = llt.matrixL();
      const double logdet = 2.0 * l.diagonal().array().log().sum();
      out.loglik += -0.5 * (whitened.squaredNorm() + logdet + static_cast<double>(nv) * log2pi);
    }
    out.normalized_innovations.push_back(std::move(whitened));
    out.filtered.push_back(std::move(post));
  }
  return out;
}

std::vector<GaussianState> rts_smooth(const LinearGaussianModel& m, const FilterResult& fr) {
  const std::size_t steps = fr.filtered.size();
  if (steps == 0) throw InvalidInput("rts_smooth: empty filtered sequence");
  if (fr.predicted.size() != steps) throw InvalidInput("rts_smooth: predicted/filtered length mismatch");

  std::vector<GaussianState> smoothed(steps);
  smoothed[steps - 1] = fr.filtered[steps - 1];
  for (std::size_t k = steps - 1; k-- > 0;) {
    const GaussianState& f = fr.filtered[k];
    const GaussianState& p = fr.predicted[k + 1];
    Eigen::LLT<Matrix> llt(p.cov);
    if (llt.info() != Eigen::Success)
      throw NumericalError("rts_smooth: predicted covariance is singular at step " + std::to_string(k + 1));
    // G = Pf F^T Pp^-1
    const Matrix gain = llt.solve(m.transition * f.cov).transpose();
    GaussianState& s = smoothed[k];
    s.t = f.t;
    s.mean = f.mean + gain * (smoothed[k + 1].mean - p.mean);
    s.cov = symmetrized(f.cov + gain * (smoothed[k + 1].cov - p.cov) * gain.transpose());
  }
  return smoothed;
}

SeriesWithVariance extract_forces(const AugmentedModel& m, std::span<const GaussianState> states) {
  const Index nr = m.n_modes();
  const Index steps = static_cast<Index>(states.size());
  SeriesWithVariance out{Matrix(nr, steps), Matrix(nr, steps)};
  for (Index k = 0; k < steps; ++k) {
    const GaussianState& s = states[static_cast<std::size_t>(k)];
    for (Index j = 0; j < nr; ++j) {
      const Index off = m.index_map.force(j);
      const Matrix& hc = m.gps[static_cast<std::size_t>(j)].hc;
      out.mean(j, k) = (hc * s.mean.segment(off, 2))(0);
      out.var(j, k) = (hc * s.cov.block(off, off, 2, 2) * hc.transpose())(0, 0);
    }
  }
  return out;
}

SeriesWithVariance reconstruct_outputs(const AugmentedModel& m, const ModalModel& modal,
                                       std::span<const GaussianState> states,
                                       std::span<const Channel> channels) {
  if (modal.n_modes() != m.n_modes()) throw InvalidInput("reconstruct_outputs: modal model does not match");
  const ObservationRows rows = observation_rows(modal, channels);
  const Index nc = rows.g.rows();
  const Index ns = 2 * m.n_modes();
  Matrix hv = Matrix::Zero(nc, m.n_states());
  hv.leftCols(ns) = rows.g;
  for (Index j = 0; j < m.n_modes(); ++j) {
    const Index off = m.index_map.force(j);
    hv.block(0, off, nc, 2) = rows.j.col(j) * m.gps[static_cast<std::size_t>(j)].hc;
  }

  const Index steps = static_cast<Index>(states.size());
  SeriesWithVariance out{Matrix(nc, steps), Matrix(nc, steps)};
  for (Index k = 0; k < steps; ++k) {
    const GaussianState& s = states[static_cast<std::size_t>(k)];
    out.mean.col(k) = hv * s.mean;
    out.var.col(k) = (hv * s.cov).cwiseProduct(hv).rowwise().sum();
  }
  return out;
}

SeriesWithVariance reconstruct_outputs(const AugmentedModel& m, const ModalModel& modal,
                                       std::span<const GaussianState> states,
                                       const SensorLayout& layout) {
  layout.validate(modal.n_dof());
  const auto channels = layout.channels();
  return reconstruct_outputs(m, modal, states, channels);
}

double NoiseVariances::for_quantity(Quantity q) const {
  switch (q) {
    case Quantity::Acceleration: return accel;
    case Quantity::Velocity: return vel;
    case Quantity::Displacement: return disp;
  }
  return accel;
}

Matrix measurement_noise(std::span<const Channel> channels, const NoiseVariances& noise) {
  const Index n = static_cast<Index>(channels.size());
  Matrix r = Matrix::Zero(n, n);
  for (Index i = 0; i < n; ++i) {
    const double v = noise.for_quantity(channels[static_cast<std::size_t>(i)].quantity);
    if (!(v > 0.0)) throw InvalidInput("measurement noise variances must be positive");
    r(i, i) = v;
  }
  return r;
}

AugmentedModel build_gplfm(const ModalModel& modal, std::span<const Channel> observed, double dt,
                           const GplfmHyperparameters& hyper, const NoiseVariances& noise) {
  if (!(hyper.q_x >= 0.0)) throw InvalidInput("q_x must be non-negative");
  const ContinuousStateSpace css = build_continuous(modal, observed);
  const DiscreteStateSpace dss = discretize(css, dt);
  const GpKernelSsm gp = to_state_space(Matern32Params(hyper.alpha, hyper.ell), dt);
  const std::vector<GpKernelSsm> gps(static_cast<std::size_t>(modal.n_modes()), gp);
  const Index ns = css.n_states();
  return assemble(dss, gps, hyper.q_x * Matrix::Identity(ns, ns), measurement_noise(observed, noise));
}

EstimationResult estimate(const AugmentedModel& m, const ModalModel& modal, const Matrix& y,
                          std::span<const Channel> outputs, const std::optional<GaussianState>& s0) {
  EstimationResult res;
  FilterResult fr = kalman_filter(m.discrete, y, s0 ? *s0 : initial_state(m), m.dt);
  res.smoothed = rts_smooth(m.discrete, fr);
  res.loglik = fr.loglik;
  res.filtered = std::move(fr.filtered);
  res.forces = extract_forces(m, res.smoothed);
  if (!outputs.empty()) res.outputs = reconstruct_outputs(m, modal, res.smoothed, outputs);
  return res;
}

}  // namespace gplfm

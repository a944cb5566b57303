#include <doctest.h>

#include <cmath>
#include <numbers>
#include <numeric>
#include <random>

#include "gplfm/error.hpp"
#include "gplfm/gplfm.hpp"
#include "gplfm/simulate.hpp"
#include "twin.hpp"

using namespace gplfm;

namespace {

ModalModel two_dof() {
  return solve_modal(spring_mass_chain(2, 1.0, 400.0), 2).with_uniform_damping(0.05);
}

}  // namespace

TEST_CASE("pure gp smoother equals dense gp regression") {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int seed = 0; seed < 10; ++seed) {
    const double alpha = 0.5 + 2.0 * u(rng), ell = 0.05 + 0.5 * u(rng), dt = 0.01, noise = 0.05 * alpha * alpha;
    const Matern32Params p(alpha, ell);
    const GpKernelSsm g = to_state_space(p, dt);
    const LinearGaussianModel lgm = gp_observation_model(g, noise);
    const GaussianState s0{Vector::Zero(2), g.pinf, 0.0};
    const Index n = 200;
    const Matrix y = twin::sample_lgm(lgm, s0, n, static_cast<std::uint64_t>(seed + 1));

    Matrix k(n, n);
    for (Index i = 0; i < n; ++i)
      for (Index j = 0; j < n; ++j) k(i, j) = kernel_eval(p, static_cast<double>(i - j) * dt);
    const Vector yv = y.row(0).transpose();
    const Vector dense = k * (k + noise * Matrix::Identity(n, n)).ldlt().solve(yv);

    const FilterResult fr = kalman_filter(lgm, y, s0, dt);
    const auto sm = rts_smooth(lgm, fr);
    double worst = 0.0;
    for (Index i = 0; i < n; ++i) worst = std::max(worst, std::abs(sm[static_cast<std::size_t>(i)].mean(0) - dense(i)));
    CHECK(worst / dense.cwiseAbs().maxCoeff() < 1e-6);
  }
}

TEST_CASE("gplfm smoother and likelihood equal the dense joint gaussian") {
  const ModalModel modal = two_dof();
  const std::vector<Channel> ch = {{"a0", Quantity::Acceleration, 0}, {"d1", Quantity::Displacement, 1}};
  const AugmentedModel m = build_gplfm(modal, ch, 0.02, {3.0, 0.1, 1e-8}, {1e-2, 1e-6, 1e-8});
  GaussianState s0 = initial_state(m);
  s0.cov.topLeftCorner(4, 4) += 1e-6 * Matrix::Identity(4, 4);
  Matrix y = twin::sample_lgm(m.discrete, s0, 50, 3);
  y(1, 7) = std::numeric_limits<double>::quiet_NaN();
  y(0, 20) = std::numeric_limits<double>::quiet_NaN();

  const twin::DensePosterior dense = twin::dense_posterior(m.discrete, y, s0);
  const FilterResult fr = kalman_filter(m.discrete, y, s0, m.dt);
  const auto sm = rts_smooth(m.discrete, fr);
  // per-state error relative to that state's largest posterior mean
  const Vector scale = dense.mean.cwiseAbs().rowwise().maxCoeff();
  double worst = 0.0;
  for (Index k = 0; k < 50; ++k) {
    const Vector err = (sm[static_cast<std::size_t>(k)].mean - dense.mean.col(k)).cwiseAbs();
    worst = std::max(worst, (err.array() / scale.array()).maxCoeff());
  }
  CHECK(worst < 1e-6);
  CHECK(fr.loglik == doctest::Approx(dense.loglik).epsilon(1e-8));
  CHECK(std::abs(fr.loglik - dense.loglik) < 1e-6 * std::max(1.0, std::abs(dense.loglik)));
}

TEST_CASE("augmented assembly") {
  ModalModel sdof;
  sdof.phi = Matrix::Constant(1, 1, 1.0);
  sdof.omega = Vector::Constant(1, 5.0);
  sdof.zeta = Vector::Constant(1, 0.1);
  const std::vector<Channel> ch = {{"a0", Quantity::Acceleration, 0}};
  const AugmentedModel m = build_gplfm(sdof, ch, 0.01, {2.0, 0.3, 1e-6}, {});
  CHECK(m.n_states() == 4);
  CHECK((m.discrete.process_noise.topLeftCorner(2, 2) - 1e-6 * Matrix::Identity(2, 2)).cwiseAbs().maxCoeff() == 0.0);
  CHECK((m.discrete.process_noise.bottomRightCorner(2, 2) - m.gps[0].qf).cwiseAbs().maxCoeff() < 1e-18);
  CHECK(m.discrete.process_noise.topRightCorner(2, 2).cwiseAbs().maxCoeff() == 0.0);
  // continuous coupling b_j Hc and force feedthrough j_j Hc
  CHECK(m.fc(1, 2) == 1.0);
  CHECK(m.fc(1, 3) == 0.0);
  CHECK(m.discrete.observation(0, 2) == 1.0);
  CHECK((m.discrete.transition - expm(m.fc * 0.01)).cwiseAbs().maxCoeff() == 0.0);

  const ModalModel modal = two_dof();
  const AugmentedModel m2 = build_gplfm(modal, ch, 0.01, {2.0, 0.3, 1e-6}, {});
  CHECK((m2.discrete.process_noise.block(4, 4, 2, 2) - m2.discrete.process_noise.block(6, 6, 2, 2)).cwiseAbs().maxCoeff() == 0.0);
  std::vector<int> seen(static_cast<std::size_t>(m2.n_states()), 0);
  for (Index j = 0; j < 2; ++j)
    for (Index s : {m2.index_map.displacement(j), m2.index_map.velocity(j), m2.index_map.force(j), m2.index_map.force_rate(j)}) {
      ++seen[static_cast<std::size_t>(s)];
      CHECK(m2.index_map.mode_of(s) == j);
    }
  for (int c : seen) CHECK(c == 1);
  CHECK(m2.index_map.kind(5) == StateKind::ForceRate);

  DiscreteStateSpace dss = discretize(build_continuous(modal, ch), 0.01);
  const GpKernelSsm g = to_state_space(Matern32Params(1.0, 1.0), 0.01);
  const std::vector<GpKernelSsm> one = {g};
  CHECK_THROWS_AS(assemble(dss, one, Matrix::Zero(4, 4), Matrix::Identity(1, 1)), InvalidInput);
  const std::vector<GpKernelSsm> two = {g, g};
  CHECK_THROWS_AS(assemble(dss, two, Matrix::Zero(3, 3), Matrix::Identity(1, 1)), InvalidInput);
  const std::vector<GpKernelSsm> wrong_dt = {g, to_state_space(Matern32Params(1.0, 1.0), 0.02)};
  CHECK_THROWS_AS(assemble(dss, wrong_dt, Matrix::Zero(4, 4), Matrix::Identity(1, 1)), InvalidInput);
}

TEST_CASE("vanishing force prior gives a free-decay observer") {
  const ModalModel modal = two_dof();
  const std::vector<Channel> ch = {{"a0", Quantity::Acceleration, 0}};
  const AugmentedModel m = build_gplfm(modal, ch, 0.01, {1e-12, 0.1, 0.0}, {});
  const Matrix y = Matrix::Random(1, 100);
  const EstimationResult est = estimate(m, modal, y, ch);
  CHECK(est.forces.mean.cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("filter limits") {
  SUBCASE("exact full-state observation") {
    LinearGaussianModel m;
    m.transition = Matrix::Identity(2, 2) * 0.9;
    m.observation = Matrix::Identity(2, 2);
    m.process_noise = Matrix::Identity(2, 2);
    m.measurement_noise = Matrix::Identity(2, 2) * 1e-12;
    const Matrix y = Matrix::Random(2, 30);
    const FilterResult fr = kalman_filter(m, y, {Vector::Zero(2), Matrix::Identity(2, 2), 0.0});
    for (Index k = 0; k < 30; ++k) CHECK((fr.filtered[static_cast<std::size_t>(k)].mean - y.col(k)).cwiseAbs().maxCoeff() < 1e-9);
  }
  SUBCASE("all samples missing") {
    const ModalModel modal = two_dof();
    const std::vector<Channel> ch = {{"a0", Quantity::Acceleration, 0}};
    const AugmentedModel m = build_gplfm(modal, ch, 0.01, {1.0, 0.2, 1e-10}, {});
    const Matrix y = Matrix::Constant(1, 400, std::numeric_limits<double>::quiet_NaN());
    const GaussianState s0 = initial_state(m);
    const FilterResult fr = kalman_filter(m.discrete, y, s0, m.dt);
    CHECK(fr.loglik == 0.0);
    for (std::size_t k = 0; k < fr.filtered.size(); ++k) {
      CHECK(fr.filtered[k].mean.cwiseAbs().maxCoeff() == 0.0);
      CHECK((fr.filtered[k].cov - fr.predicted[k].cov).cwiseAbs().maxCoeff() == 0.0);
    }
    const Matrix pinf = solve_continuous_lyapunov(m.fc, m.qc);
    CHECK(fr.filtered.back().cov(0, 0) > fr.filtered[10].cov(0, 0));
    CHECK(fr.filtered.back().cov(0, 0) <= pinf(0, 0) * 1.0001);
  }
}

TEST_CASE("filtering beats pure prediction") {
  const ModalModel modal = two_dof();
  const std::vector<Channel> ch = {{"a0", Quantity::Acceleration, 0}, {"a1", Quantity::Acceleration, 1}};
  const AugmentedModel m = build_gplfm(modal, ch, 0.01, {2.0, 0.1, 1e-8}, {1e-3, 1, 1});
  const GaussianState s0 = initial_state(m);
  double err_f = 0.0, err_p = 0.0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    Matrix x;
    const Matrix y = twin::sample_lgm(m.discrete, s0, 500, seed, &x);
    const FilterResult fr = kalman_filter(m.discrete, y, s0, m.dt);
    const Matrix none = Matrix::Constant(2, 500, std::numeric_limits<double>::quiet_NaN());
    const FilterResult pr = kalman_filter(m.discrete, none, s0, m.dt);
    for (Index k = 0; k < 500; ++k) {
      err_f += (fr.filtered[static_cast<std::size_t>(k)].mean - x.col(k)).squaredNorm();
      err_p += (pr.filtered[static_cast<std::size_t>(k)].mean - x.col(k)).squaredNorm();
    }
  }
  CHECK(err_f < err_p);
}

TEST_CASE("smoother properties") {
  const ModalModel modal = two_dof();
  const std::vector<Channel> ch = {{"a1", Quantity::Acceleration, 1}};
  const AugmentedModel m = build_gplfm(modal, ch, 0.01, {2.0, 0.1, 1e-8}, {1e-3, 1, 1});
  const GaussianState s0 = initial_state(m);
  const Matrix y = twin::sample_lgm(m.discrete, s0, 300, 4);
  const FilterResult fr = kalman_filter(m.discrete, y, s0, m.dt);
  const auto sm = rts_smooth(m.discrete, fr);
  REQUIRE(sm.size() == fr.filtered.size());
  CHECK((sm.back().mean - fr.filtered.back().mean).cwiseAbs().maxCoeff() == 0.0);
  CHECK((sm.back().cov - fr.filtered.back().cov).cwiseAbs().maxCoeff() == 0.0);
  for (std::size_t k = 0; k < sm.size(); ++k) {
    CHECK((sm[k].cov.diagonal() - fr.filtered[k].cov.diagonal()).maxCoeff() <= 1e-9);
    CHECK((fr.filtered[k].cov - fr.filtered[k].cov.transpose()).cwiseAbs().maxCoeff() < 1e-12);
  }
  const SeriesWithVariance f = extract_forces(m, sm);
  CHECK(f.var.maxCoeff() <= 4.0 + 1e-9);

  LinearGaussianModel singular = m.discrete;
  singular.process_noise.setZero();
  FilterResult bad = fr;
  bad.predicted[5].cov.setZero();
  CHECK_THROWS_AS(rts_smooth(singular, bad), NumericalError);
  bad.filtered.clear();
  bad.predicted.clear();
  CHECK_THROWS_AS(rts_smooth(singular, bad), InvalidInput);
}

TEST_CASE("non positive innovation covariance names the step") {
  LinearGaussianModel m;
  m.transition = Matrix::Identity(1, 1);
  m.observation = Matrix::Identity(1, 1);
  m.process_noise = Matrix::Zero(1, 1);
  m.measurement_noise = Matrix::Constant(1, 1, -1.0);
  try {
    kalman_filter(m, Matrix::Ones(1, 3), {Vector::Zero(1), Matrix::Zero(1, 1), 0.0});
    FAIL("expected an error");
  } catch (const NumericalError& e) {
    CHECK(std::string(e.what()).find("step 0") != std::string::npos);
  }
}

TEST_CASE("missing samples equal an inflated noise variance") {
  const ModalModel modal = two_dof();
  const std::vector<Channel> ch = {{"a0", Quantity::Acceleration, 0}, {"a1", Quantity::Acceleration, 1}};
  const AugmentedModel m = build_gplfm(modal, ch, 0.01, {2.0, 0.1, 1e-8}, {1e-3, 1, 1});
  const GaussianState s0 = initial_state(m);
  Matrix y = twin::sample_lgm(m.discrete, s0, 200, 8);
  Matrix masked = y;
  masked.row(1).setConstant(std::numeric_limits<double>::quiet_NaN());
  const auto a = rts_smooth(m.discrete, kalman_filter(m.discrete, masked, s0));
  LinearGaussianModel inflated = m.discrete;
  inflated.measurement_noise(1, 1) *= 1e12;
  const auto b = rts_smooth(inflated, kalman_filter(inflated, y, s0));
  double scale = 0.0, worst = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    scale = std::max(scale, a[k].mean.cwiseAbs().maxCoeff());
    worst = std::max(worst, (a[k].mean - b[k].mean).cwiseAbs().maxCoeff());
  }
  CHECK(worst < 1e-6 * scale);
}

TEST_CASE("normalized innovations are white on well specified data") {
  const ModalModel modal = two_dof();
  const std::vector<Channel> ch = {{"a0", Quantity::Acceleration, 0}, {"d1", Quantity::Displacement, 1}};
  const AugmentedModel m = build_gplfm(modal, ch, 0.01, {2.0, 0.1, 1e-8}, {1e-3, 1, 1e-7});
  const GaussianState s0 = initial_state(m);
  const Matrix y = twin::sample_lgm(m.discrete, s0, 5000, 12);
  const FilterResult fr = kalman_filter(m.discrete, y, s0, m.dt);
  for (Index c = 0; c < 2; ++c) {
    double num = 0.0, den = 0.0, mean = 0.0;
    for (const auto& v : fr.normalized_innovations) mean += v(c);
    mean /= 5000.0;
    for (std::size_t k = 0; k < fr.normalized_innovations.size(); ++k) {
      const double e = fr.normalized_innovations[k](c) - mean;
      den += e * e;
      if (k > 0) num += e * (fr.normalized_innovations[k - 1](c) - mean);
    }
    CHECK(std::abs(num / den) < 0.1);
    CHECK(den / 5000.0 == doctest::Approx(1.0).epsilon(0.1));
  }
}

TEST_CASE("reconstruction at an observed channel reuses its observation row") {
  const ModalModel modal = two_dof();
  const std::vector<Channel> ch = {{"a0", Quantity::Acceleration, 0}, {"v1", Quantity::Velocity, 1}};
  const AugmentedModel m = build_gplfm(modal, ch, 0.01, {2.0, 0.1, 1e-8}, {1e-3, 1e-4, 1});
  const GaussianState s0 = initial_state(m);
  const Matrix y = twin::sample_lgm(m.discrete, s0, 100, 2);
  const EstimationResult est = estimate(m, modal, y, ch);
  for (Index k = 0; k < 100; ++k) {
    const Vector direct = m.discrete.observation * est.smoothed[static_cast<std::size_t>(k)].mean;
    CHECK((est.outputs.mean.col(k) - direct).cwiseAbs().maxCoeff() < 1e-12 * (1.0 + direct.cwiseAbs().maxCoeff()));
  }
  std::vector<GaussianState> zero(3, GaussianState{Vector::Zero(m.n_states()), Matrix::Zero(m.n_states(), m.n_states()), 0.0});
  SensorLayout virt;
  virt.disp_dofs = {1};
  CHECK(reconstruct_outputs(m, modal, zero, virt).mean.cwiseAbs().maxCoeff() == 0.0);
  const EstimationResult none = estimate(m, modal, Matrix::Constant(2, 20, std::numeric_limits<double>::quiet_NaN()), ch);
  CHECK(none.forces.mean.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("sdof virtual displacement and force recovery under a known impact") {
  // m = 1, so the modal force equals the physical force
  const double wn = 2.0 * std::numbers::pi, zeta = 0.05, fs = 100.0;
  ModalModel modal;
  modal.phi = Matrix::Constant(1, 1, 1.0);
  modal.omega = Vector::Constant(1, wn);
  modal.zeta = Vector::Constant(1, zeta);
  ImpactScenario sc;
  sc.force = {1.0, 0.1, 0.2, 0.5};
  sc.loads = {{0, 1.0}};
  sc.duration = 6.0;
  sc.fs = fs;
  sc.noise.accel = 0.0;
  sc.noise.vel = 0.0;
  const std::vector<Channel> obs = {{"a0", Quantity::Acceleration, 0}, {"v0", Quantity::Velocity, 0}};
  const SimulationResult sim = simulate(sc, modal, obs);

  // Duhamel oracle for the displacement on a fine grid
  const double wd = wn * std::sqrt(1.0 - zeta * zeta);
  const int sub = 40;
  const double h = 1.0 / fs / sub;
  const std::size_t n = sc.samples();
  std::vector<double> truth(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double t = static_cast<double>(k) / fs;
    const int m = static_cast<int>(std::lround(t / h));
    double acc = 0.0;
    for (int i = 0; i <= m; ++i) {
      const double tau = i * h;
      const double w = (i == 0 || i == m) ? 0.5 : 1.0;
      acc += w * sc.force.value(tau) * std::exp(-zeta * wn * (t - tau)) * std::sin(wd * (t - tau)) / wd;
    }
    truth[k] = acc * h;
  }

  const Matrix y = sim.measured.matrix();
  const AugmentedModel m = build_gplfm(modal, obs, 1.0 / fs, {0.5, 0.05, 1e-14}, {1e-8, 1e-12, 1});
  const std::vector<Channel> virt = {{"d0", Quantity::Displacement, 0}};
  const EstimationResult est = estimate(m, modal, y, virt);
  const auto recon = twin::row(est.outputs.mean, 0);
  CHECK(rmse(recon, truth) < 0.02 * std::sqrt(std::inner_product(truth.begin(), truth.end(), truth.begin(), 0.0) / n));
  const auto f_est = twin::row(est.forces.mean, 0);
  const auto f_true = twin::row(sim.modal_forces, 0);
  CHECK(twin::correlation(f_est, f_true) > 0.9);
}

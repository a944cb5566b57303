#include <doctest.h>

#include <cmath>
#include <numbers>

#include "gplfm/error.hpp"
#include "gplfm/simulate.hpp"

using namespace gplfm;

namespace {

ModalModel sdof(double m, double k, double zeta) {
  FullOrderSystem s{Matrix::Constant(1, 1, m), Matrix::Zero(1, 1), Matrix::Constant(1, 1, k)};
  return solve_modal(s, 1).with_uniform_damping(zeta);
}

// u(t) = 1/(m wd) int_0^t p(tau) e^{-zeta wn (t - tau)} sin(wd (t - tau)) dtau, trapezoid on a fine grid.
std::vector<double> duhamel(const TriangularForce& f, double m, double wn, double zeta, double fs, std::size_t n,
                            int sub) {
  const double wd = wn * std::sqrt(1.0 - zeta * zeta);
  const double h = 1.0 / fs / sub;
  std::vector<double> out(n);
  for (std::size_t k = 0; k < n; ++k) {
    const int steps = static_cast<int>(k) * sub;
    const double t = steps * h;
    double acc = 0.0;
    for (int i = 0; i <= steps; ++i) {
      const double tau = i * h;
      const double w = (i == 0 || i == steps) ? 0.5 : 1.0;
      acc += w * f.value(tau) * std::exp(-zeta * wn * (t - tau)) * std::sin(wd * (t - tau));
    }
    out[k] = acc * h / (m * wd);
  }
  return out;
}

double rms(const std::vector<double>& x) {
  double s = 0.0;
  for (double v : x) s += v * v;
  return std::sqrt(s / static_cast<double>(x.size()));
}

}  // namespace

TEST_CASE("sdof triangular impact matches the duhamel integral") {
  const double m = 2.0, k = 2.0 * std::pow(2.0 * std::numbers::pi * 1.5, 2), zeta = 0.03;
  const ModalModel modal = sdof(m, k, zeta);
  const double fn = modal.omega(0) / (2.0 * std::numbers::pi);
  ImpactScenario sc;
  sc.fs = 100.0 * fn;
  // breakpoints on the sampling grid
  sc.force = {50.0, 7.0 / sc.fs, 13.0 / sc.fs, 20.0 / sc.fs};
  sc.loads = {{0, 1.0}};
  sc.duration = 4.0 / fn;
  sc.noise.accel = 0.0;
  const std::vector<Channel> ch = {{"d0", Quantity::Displacement, 0}};
  const SimulationResult r = simulate(sc, modal, ch);
  const auto oracle = duhamel(sc.force, m, modal.omega(0), zeta, sc.fs, sc.samples(), 20);
  double err = 0.0;
  for (std::size_t i = 0; i < oracle.size(); ++i) err += std::pow(r.clean.channels[0].values[i] - oracle[i], 2);
  err = std::sqrt(err / static_cast<double>(oracle.size()));
  CHECK(err < 0.005 * rms(oracle));
  CHECK(r.displacement(0, 100) == r.clean.channels[0].values[100]);
}

TEST_CASE("zero force gives zero clean responses") {
  const ModalModel modal = solve_modal(spring_mass_chain(3, 1.0, 100.0), 3).with_uniform_damping(0.05);
  ImpactScenario sc;
  sc.force.peak = 0.0;
  sc.loads = {{1, 1.0}};
  SensorLayout layout;
  layout.accel_dofs = {0, 2};
  layout.disp_dofs = {1};
  const SimulationResult r = simulate(sc, modal, layout.channels());
  for (const auto& c : r.clean.channels)
    for (double v : c.values) CHECK(v == 0.0);
  // default accelerometer noise follows the sensor noise density
  const auto& noisy = r.measured.channels[0].values;
  CHECK(rms(noisy) == doctest::Approx(25e-6 * 9.80665 * std::sqrt(sc.fs / 2.0)).epsilon(0.1));
  for (double v : r.measured.channels[2].values) CHECK(v == 0.0);
}

TEST_CASE("linearity, determinism and ground truth consistency") {
  const ModalModel modal = solve_modal(spring_mass_chain(4, 10.0, 1e4), 3).with_uniform_damping(0.02);
  ImpactScenario sc;
  sc.loads = {{2, 1.0}, {3, -0.5}};
  sc.force = {100.0, 0.0625, 0.125, 0.5};
  sc.noise.accel = 1e-3;
  sc.seed = 42;
  SensorLayout layout;
  layout.accel_dofs = {0, 3};
  layout.vel_dofs = {1};
  const auto ch = layout.channels();
  const SimulationResult a = simulate(sc, modal, ch);
  ImpactScenario doubled = sc;
  doubled.force.peak *= 2.0;
  const SimulationResult b = simulate(doubled, modal, ch);
  for (std::size_t c = 0; c < ch.size(); ++c)
    for (std::size_t k = 0; k < a.clean.length(); ++k)
      CHECK(b.clean.channels[c].values[k] == doctest::Approx(2.0 * a.clean.channels[c].values[k]).epsilon(1e-12));

  const SimulationResult again = simulate(sc, modal, ch);
  for (std::size_t c = 0; c < ch.size(); ++c) CHECK(again.measured.channels[c].values == a.measured.channels[c].values);
  ImpactScenario other = sc;
  other.seed = 43;
  CHECK(simulate(other, modal, ch).measured.channels[0].values != a.measured.channels[0].values);

  CHECK(a.modal_forces.rows() == 3);
  CHECK(a.acceleration.rows() == 4);
  for (Index k = 0; k < a.acceleration.cols(); k += 37) {
    CHECK(a.acceleration(0, k) == doctest::Approx(a.clean.channels[0].values[static_cast<std::size_t>(k)]).epsilon(1e-12));
    CHECK(a.velocity(1, k) == doctest::Approx(a.clean.channels[2].values[static_cast<std::size_t>(k)]).epsilon(1e-12));
  }
  CHECK(a.load.maxCoeff() == doctest::Approx(100.0));
}

TEST_CASE("scenario validation") {
  const ModalModel modal = solve_modal(spring_mass_chain(2, 1.0, 1.0), 2).with_uniform_damping(0.05);
  const std::vector<Channel> ch = {{"a0", Quantity::Acceleration, 0}};
  ImpactScenario sc;
  sc.loads = {{0, 1.0}};
  sc.force.rise = 0.0;
  CHECK_THROWS_AS(simulate(sc, modal, ch), InvalidInput);
  sc = ImpactScenario{};
  sc.loads = {{0, 1.0}};
  sc.duration = 0.55;
  CHECK_THROWS_AS(simulate(sc, modal, ch), InvalidInput);
  sc = ImpactScenario{};
  CHECK_THROWS_AS(simulate(sc, modal, ch), InvalidInput);
  sc.loads = {{5, 1.0}};
  CHECK_THROWS_AS(simulate(sc, modal, ch), InvalidInput);
}

TEST_CASE("normal stream") {
  NormalStream a(3), b(3);
  double s = 0.0, s2 = 0.0;
  for (int i = 0; i < 200000; ++i) {
    const double v = a();
    CHECK(v == b());
    s += v;
    s2 += v * v;
  }
  CHECK(std::abs(s / 200000) < 0.01);
  CHECK(s2 / 200000 == doctest::Approx(1.0).epsilon(0.01));
}

#include "gplfm/simulate.hpp"

#include <cmath>
#include <numbers>

#include "gplfm/error.hpp"

namespace gplfm {

double TriangularForce::value(double t) const {
  const double s = t - onset;
  if (s <= 0.0 || s >= rise + fall) return 0.0;
  if (s <= rise) return peak * s / rise;
  return peak * (rise + fall - s) / fall;
}

double NoiseRms::accel_or_default(double fs) const {
  return accel.value_or(kAccelNoiseDensity * std::sqrt(fs / 2.0));
}

double NoiseRms::for_quantity(Quantity q, double fs) const {
  switch (q) {
    case Quantity::Acceleration: return accel_or_default(fs);
    case Quantity::Velocity: return vel;
    case Quantity::Displacement: return disp;
  }
  return 0.0;
}

void ImpactScenario::validate() const {
  if (!(force.rise > 0.0) || !(force.fall > 0.0)) throw InvalidInput("scenario: rise and fall times must be positive");
  if (!(fs > 0.0)) throw InvalidInput("scenario: fs must be positive");
  if (!(duration >= force.onset + force.rise + force.fall))
    throw InvalidInput("scenario: duration must cover onset + rise + fall");
  if (loads.empty()) throw InvalidInput("scenario: at least one load location is required");
  if (noise.accel && *noise.accel < 0.0) throw InvalidInput("scenario: noise RMS must be non-negative");
  if (noise.vel < 0.0 || noise.disp < 0.0) throw InvalidInput("scenario: noise RMS must be non-negative");
}

std::size_t ImpactScenario::samples() const {
  return static_cast<std::size_t>(std::floor(duration * fs + 1e-9)) + 1;
}

double NormalStream::operator()() {
  if (spare_) {
    const double v = *spare_;
    spare_.reset();
    return v;
  }
  auto uniform = [this] { return (static_cast<double>(rng_() >> 11) + 0.5) * 0x1.0p-53; };
  const double u1 = uniform();
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  spare_ = r * std::sin(2.0 * std::numbers::pi * u2);
  return r * std::cos(2.0 * std::numbers::pi * u2);
}

SimulationResult simulate(const ImpactScenario& scenario, const ModalModel& modal,
                          std::span<const Channel> channels) {
  scenario.validate();
  if (channels.empty()) throw InvalidInput("simulate: no output channels");
  const ContinuousStateSpace css = build_continuous(modal, channels);
  const Index nr = modal.n_modes();
  const Index n = static_cast<Index>(scenario.samples());
  const double dt = 1.0 / scenario.fs;

  Vector load_shape = Vector::Zero(modal.n_dof());
  for (const auto& l : scenario.loads) {
    if (l.dof < 0 || l.dof >= modal.n_dof()) throw InvalidInput("simulate: load DOF out of range");
    load_shape(l.dof) += l.direction;
  }
  const Vector modal_shape = modal.phi.transpose() * load_shape;

  SimulationResult res;
  res.load.resize(n);
  for (Index k = 0; k < n; ++k) res.load(k) = scenario.force.value(static_cast<double>(k) * dt);
  res.modal_forces = modal_shape * res.load.transpose();

  const HoldMatrices hold = hold_discretize(css.ac, css.bc, dt);
  const Matrix first = hold.gamma0 - hold.gamma1;
  res.states = Matrix::Zero(2 * nr, n);
  for (Index k = 0; k + 1 < n; ++k)
    res.states.col(k + 1) =
        hold.ad * res.states.col(k) + first * res.modal_forces.col(k) + hold.gamma1 * res.modal_forces.col(k + 1);

  const Matrix r = res.states.topRows(nr);
  const Matrix rdot = res.states.bottomRows(nr);
  Vector w2(nr), c(nr);
  for (Index j = 0; j < nr; ++j) {
    w2(j) = modal.omega(j) * modal.omega(j);
    c(j) = 2.0 * modal.zeta(j) * modal.omega(j);
  }
  const Matrix rddot = res.modal_forces - w2.asDiagonal() * r - c.asDiagonal() * rdot;
  res.displacement = modal.phi * r;
  res.velocity = modal.phi * rdot;
  res.acceleration = modal.phi * rddot;

  const Matrix y = css.gc * res.states + css.jc * res.modal_forces;
  res.clean.t0 = 0.0;
  res.clean.fs = scenario.fs;
  NormalStream normal(scenario.seed);
  res.measured = res.clean;
  for (std::size_t i = 0; i < channels.size(); ++i) {
    const Channel& ch = channels[i];
    SeriesChannel clean{ch.name, ch.quantity, std::vector<double>(static_cast<std::size_t>(n))};
    SeriesChannel noisy = clean;
    const double sigma = scenario.noise.for_quantity(ch.quantity, scenario.fs);
    for (Index k = 0; k < n; ++k) {
      const double v = y(static_cast<Index>(i), k);
      clean.values[static_cast<std::size_t>(k)] = v;
      noisy.values[static_cast<std::size_t>(k)] = v + sigma * normal();
    }
    res.clean.channels.push_back(std::move(clean));
    res.measured.channels.push_back(std::move(noisy));
  }
  res.clean.validate();
  return res;
}

}  // namespace gplfm

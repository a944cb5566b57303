#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "gplfm/signal.hpp"
#include "gplfm/structural_model.hpp"

namespace gplfm {

/// Isosceles-or-not triangle: 0 before onset, linear rise to `peak`, linear fall to 0.
struct TriangularForce {
  double peak = 1.0;   ///< N
  double rise = 0.05;  ///< s
  double fall = 0.05;  ///< s
  double onset = 0.5;  ///< s

  double value(double t) const;
};

/// The triangular history applied at `dof` scaled by `direction` (+1/-1 or any weight).
struct ForceLoad {
  Index dof = 0;
  double direction = 1.0;
};

/// Per-group measurement noise RMS (SI units). Accelerometer default follows a
/// 25 ug/sqrt(Hz) noise density over the Nyquist band.
struct NoiseRms {
  std::optional<double> accel;
  double vel = 0.0;
  double disp = 0.0;

  double accel_or_default(double fs) const;
  double for_quantity(Quantity q, double fs) const;
};

inline constexpr double kStandardGravity = 9.80665;
inline constexpr double kAccelNoiseDensity = 25e-6 * kStandardGravity;  // (m/s^2)/sqrt(Hz)

struct ImpactScenario {
  TriangularForce force;
  std::vector<ForceLoad> loads;
  NoiseRms noise;
  double duration = 5.0;  ///< s
  double fs = 128.0;      ///< Hz
  std::uint64_t seed = 1;

  void validate() const;
  std::size_t samples() const;
};

struct SimulationResult {
  TimeSeriesSet measured;  ///< clean + seeded Gaussian noise
  TimeSeriesSet clean;     ///< noise-free channels
  Matrix states;           ///< 2n_r x N modal displacements and velocities
  Matrix modal_forces;     ///< n_r x N
  Vector load;             ///< N, physical force history p(t_k)
  Matrix displacement;     ///< n_dof x N
  Matrix velocity;         ///< n_dof x N
  Matrix acceleration;     ///< n_dof x N
};

/// Exact propagation of the modal model under the piecewise-linear (first-order hold)
/// interpolation of the sampled load, which reproduces triangular loads exactly when
/// their breakpoints fall on the sampling grid.
SimulationResult simulate(const ImpactScenario& scenario, const ModalModel& modal,
                          std::span<const Channel> channels);

/// Seeded standard normal stream (Box-Muller on the raw mt19937_64 output, so the sequence
/// does not depend on the standard library's distribution implementation).
class NormalStream {
public:
  explicit NormalStream(std::uint64_t seed) : rng_(seed) {}
  double operator()();

private:
  std::mt19937_64 rng_;
  std::optional<double> spare_;
};

}  // namespace gplfm

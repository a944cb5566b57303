#pragma once

#include <optional>
#include <vector>

#include "gplfm/sensor_placement.hpp"
#include "gplfm/simulate.hpp"
#include "gplfm/virtual_sensing.hpp"

namespace twin {

using gplfm::Index;

// Seeded synthetic chain used by the higher-level tests and the acceptance run.
struct Options {
  Index n_dof = 5;
  Index n_modes = 7;  // capped at n_dof
  double mass = 1000.0;
  double stiffness = 4.0e6;
  double zeta = 0.05;
  double fs = 128.0;
  double duration = 4.0;
  Index load_dof = 2;
  double peak = 1.0e4;
  std::vector<Index> accel_dofs;  // all DOFs when empty
  std::optional<Index> duplicate_dof;  // extra accelerometer "a<d>dup" at an instrumented DOF
  std::optional<double> snr_db;   // noise-free when unset
  std::uint64_t seed = 7;
};

struct Twin {
  Options options;
  gplfm::ModalModel modal;
  std::vector<gplfm::Channel> channels;
  gplfm::ImpactScenario scenario;
  gplfm::SimulationResult sim;
};

Twin make(const Options& opts = {});

// Estimation settings used for the synthetic runs: both tuning stages on, fixed seed.
gplfm::EstimationConfig estimation_config(int threads = 1);

// Pearson correlation of two equally long series.
double correlation(const std::vector<double>& a, const std::vector<double>& b);

std::vector<double> row(const gplfm::Matrix& m, Index r);

// Draws one trajectory of a linear Gaussian model; returns observations, optionally states.
gplfm::Matrix sample_lgm(const gplfm::LinearGaussianModel& m, const gplfm::GaussianState& s0, Index steps,
                         std::uint64_t seed, gplfm::Matrix* states = nullptr);

// Posterior of the whole trajectory by dense joint-Gaussian conditioning.
struct DensePosterior {
  gplfm::Matrix mean;  // n x N
  double loglik = 0.0;
};

DensePosterior dense_posterior(const gplfm::LinearGaussianModel& m, const gplfm::Matrix& y,
                              const gplfm::GaussianState& s0);

}  // namespace twin

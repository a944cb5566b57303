#pragma once

#include <optional>
#include <span>
#include <vector>

#include "gplfm/gp_kernel.hpp"
#include "gplfm/structural_model.hpp"

namespace gplfm {

/// s_{k+1} = F s_k + w_k,  y_k = H s_k + v_k,  w ~ N(0, Q),  v ~ N(0, R).
struct LinearGaussianModel {
  Matrix transition;
  Matrix observation;
  Matrix process_noise;
  Matrix measurement_noise;

  Index n_states() const { return transition.rows(); }
  Index n_outputs() const { return observation.rows(); }
};

/// Pure GP observed directly with white noise of variance `noise_var`.
LinearGaussianModel gp_observation_model(const GpKernelSsm& g, double noise_var);

enum class StateKind { Displacement, Velocity, Force, ForceRate };

/// Which augmented state is what. Layout: [r (n_r), r' (n_r), (f_j, f_j') per mode].
class StateIndexMap {
public:
  StateIndexMap() = default;
  explicit StateIndexMap(Index n_modes) : n_modes_(n_modes) {}

  Index n_modes() const { return n_modes_; }
  Index size() const { return 4 * n_modes_; }
  Index displacement(Index mode) const { return mode; }
  Index velocity(Index mode) const { return n_modes_ + mode; }
  Index force(Index mode) const { return 2 * n_modes_ + 2 * mode; }
  Index force_rate(Index mode) const { return 2 * n_modes_ + 2 * mode + 1; }
  StateKind kind(Index state) const;
  Index mode_of(Index state) const;

private:
  Index n_modes_ = 0;
};

/// Structure + per-mode latent-force model, jointly discretized.
struct AugmentedModel {
  LinearGaussianModel discrete;  ///< Fa_d, Ha, Qa = blkdiag(Qx, Qf...), R
  Matrix fc;                     ///< continuous augmented transition
  Matrix qc;                     ///< continuous noise density blkdiag(Qx/dt, Lc qc Lc^T ...)
  double dt = 0.0;
  std::vector<GpKernelSsm> gps;
  StateIndexMap index_map;

  Index n_modes() const { return index_map.n_modes(); }
  Index n_states() const { return discrete.n_states(); }
};

AugmentedModel assemble(const DiscreteStateSpace& dss, std::span<const GpKernelSsm> gps,
                        const Matrix& qx, const Matrix& r);

struct GaussianState {
  Vector mean;
  Matrix cov;
  double t = 0.0;
};

/// Zero mean; covariance blkdiag(eps I, Pinf_1, ..., Pinf_nr) with eps = 1e-6 times the
/// largest stationary structural variance under the GP prior.
GaussianState initial_state(const AugmentedModel& m);

struct FilterResult {
  std::vector<GaussianState> predicted;  ///< prior at each step, predicted[0] = s0
  std::vector<GaussianState> filtered;
  double loglik = 0.0;
  /// Whitened innovations L^-1 v for each step (empty where every channel is missing).
  std::vector<Vector> normalized_innovations;
};

/// Kalman filter with Joseph-form covariance update. `y` is n_y x N; NaN entries are
/// missing samples and their rows are dropped from that step's update.
/// Throws NumericalError (naming the step) when the innovation covariance is not PD.
FilterResult kalman_filter(const LinearGaussianModel& m, const Matrix& y, const GaussianState& s0,
                           double dt = 1.0);

/// Rauch-Tung-Striebel backward pass.
std::vector<GaussianState> rts_smooth(const LinearGaussianModel& m, const FilterResult& filtered);

/// Rows are series (modes or channels), columns are time steps.
struct SeriesWithVariance {
  Matrix mean;
  Matrix var;
};

SeriesWithVariance extract_forces(const AugmentedModel& m, std::span<const GaussianState> states);

/// Applies output rows [G_v | J_v Hc] for any requested channels to the states.
SeriesWithVariance reconstruct_outputs(const AugmentedModel& m, const ModalModel& modal,
                                       std::span<const GaussianState> states,
                                       std::span<const Channel> channels);
SeriesWithVariance reconstruct_outputs(const AugmentedModel& m, const ModalModel& modal,
                                       std::span<const GaussianState> states,
                                       const SensorLayout& layout);

struct EstimationResult {
  std::vector<GaussianState> filtered;
  std::vector<GaussianState> smoothed;
  SeriesWithVariance forces;
  SeriesWithVariance outputs;
  double loglik = 0.0;
};

// ---------------------------------------------------------------------------
// Convenience layer: hyperparameters -> model -> estimate.

/// Shared Matérn 3/2 prior for every modal force plus the structural noise scalar.
struct GplfmHyperparameters {
  double alpha = 1.0;
  double ell = 0.1;
  double q_x = 1e-12;
};

/// Measurement noise variances per sensor group.
struct NoiseVariances {
  double accel = 1e-4;
  double vel = 1e-6;
  double disp = 1e-8;

  double for_quantity(Quantity q) const;
};

Matrix measurement_noise(std::span<const Channel> channels, const NoiseVariances& noise);

AugmentedModel build_gplfm(const ModalModel& modal, std::span<const Channel> observed, double dt,
                           const GplfmHyperparameters& hyper, const NoiseVariances& noise);

/// Filter, smooth and reconstruct `outputs` (may include unobserved channels).
EstimationResult estimate(const AugmentedModel& m, const ModalModel& modal, const Matrix& y,
                          std::span<const Channel> outputs,
                          const std::optional<GaussianState>& s0 = std::nullopt);

}  // namespace gplfm

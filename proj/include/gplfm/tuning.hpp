#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gplfm/gplfm.hpp"
#include "gplfm/optim.hpp"

namespace gplfm {

/// Search interval in log10 space. A `fixed` value removes the parameter from the search.
struct LogBounds {
  double lower = 0.0;
  double upper = 1.0;
  std::optional<double> fixed;

  void validate(const std::string& name) const;
};

struct TuningConfig {
  LogBounds alpha{-4.0, 6.0, std::nullopt};
  LogBounds ell{-3.0, 1.0, std::nullopt};
  LogBounds q_x{-20.0, -2.0, std::nullopt};
  int restarts = 8;
  int max_iterations = 300;
  double tolerance = 1e-10;
  std::uint64_t seed = 1;
  bool detrend = true;
  /// Optional [begin, end) sample window for the empirical covariance; full record if unset.
  std::optional<std::pair<Index, Index>> window;
  int threads = 1;

  void validate() const;
};

struct EmpiricalCovariance {
  Matrix cov;
  Index samples = 0;
  bool singular = false;  ///< a constant channel or rank deficiency was detected
};

/// Sample covariance (1/(N-1)) across channels after per-channel mean removal.
/// Time steps where any channel is missing are skipped.
EmpiricalCovariance empirical_output_cov(const Matrix& y, bool detrend = true);

/// Ha P_inf Ha^T with P_inf the stationary covariance of the continuous augmented model.
/// Throws InvalidInput if the augmented system has no stationary covariance.
Matrix prior_output_cov(const AugmentedModel& m);

/// Hellinger distance between N(0, P1) and N(0, P2):
///   H^2 = 1 - det(P1)^(1/4) det(P2)^(1/4) / det((P1 + P2)/2)^(1/2).
/// Throws InvalidInput for non-PSD or mismatched inputs. Singular (PSD but not PD)
/// inputs give 1 unless the two matrices are equal.
double hellinger(const Matrix& p1, const Matrix& p2);

struct RestartRecord {
  GplfmHyperparameters start;
  double start_objective = 0.0;
  GplfmHyperparameters result;
  double objective = 0.0;
  int iterations = 0;
  bool converged = false;
};

struct PriorTuningResult {
  GplfmHyperparameters best;
  double objective = 0.0;
  std::vector<RestartRecord> restarts;
  std::vector<double> trace;  ///< running best objective over all iterations, non-increasing
  EmpiricalCovariance empirical;
};

/// Hellinger matching of empirical and prior output covariances over (alpha, ell, q_x).
/// `noise` only fills R for model assembly; R does not enter the objective.
PriorTuningResult tune_prior(const ModalModel& modal, std::span<const Channel> observed, double dt,
                             const Matrix& y, const TuningConfig& config,
                             const NoiseVariances& noise = {});

enum class ResidualKind {
  Smoothed,   ///< y - Ha s_{k|N}: posterior after filtering and smoothing
  Predicted,  ///< y - Ha s_{k|k-1}: one-step-ahead prediction
};

struct NoiseTuningConfig {
  LogBounds accel{-10.0, 2.0, std::nullopt};
  LogBounds vel{-12.0, 0.0, std::nullopt};
  LogBounds disp{-14.0, -2.0, std::nullopt};
  ResidualKind residual = ResidualKind::Predicted;
  int grid_points = 13;
  int max_iterations = 60;

  void validate() const;
};

struct NoiseTuningResult {
  NoiseVariances best;
  double objective = 0.0;
  bool flat_objective = false;  ///< objective did not vary over the grid; midpoint returned
  int evaluations = 0;
};

/// Searches the per-group measurement-noise variances of the groups present in `observed`
/// minimizing the sum over groups of RMSE(y, y_hat) / rms(y).
NoiseTuningResult tune_R(const ModalModel& modal, std::span<const Channel> observed, double dt,
                         const Matrix& y, const GplfmHyperparameters& hyper,
                         const NoiseTuningConfig& config);

/// Residual objective used by tune_R for one noise setting.
double noise_objective(const ModalModel& modal, std::span<const Channel> observed, double dt,
                       const Matrix& y, const GplfmHyperparameters& hyper, const NoiseVariances& noise,
                       ResidualKind residual);

}  // namespace gplfm

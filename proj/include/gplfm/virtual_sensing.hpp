#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gplfm/gplfm.hpp"
#include "gplfm/signal.hpp"
#include "gplfm/tuning.hpp"

namespace gplfm {

/// How a single estimation obtains its model: tuned (prior by Hellinger matching,
/// then R by residual RMSE) or with fixed values.
struct EstimationConfig {
  TuningConfig prior;
  NoiseTuningConfig noise;
  bool tune_prior = true;
  bool tune_noise = true;
  GplfmHyperparameters hyper;  ///< used when tune_prior is false
  NoiseVariances noise_fixed;  ///< used when tune_noise is false; also R during prior tuning
  int threads = 1;
};

struct TunedModel {
  GplfmHyperparameters hyper;
  NoiseVariances noise;
  std::optional<double> prior_objective;
  std::optional<double> noise_objective;
  bool noise_flat = false;
};

TunedModel tune_model(const ModalModel& modal, std::span<const Channel> observed, double dt, const Matrix& y,
                      const EstimationConfig& config);

/// Binds data channels to model DOFs: `channels[i]` describes `data.channels[i]`.
/// Throws InvalidInput on count/name/quantity mismatch.
void check_channel_binding(const TimeSeriesSet& data, std::span<const Channel> channels);

struct ChannelEstimate {
  Channel channel;
  std::vector<double> mean;
  std::vector<double> variance;
  std::optional<double> rmse;  ///< only when a held-out measurement exists
  std::optional<double> trac;
};

struct TargetResult {
  std::vector<std::string> observed;
  TunedModel tuning;
  std::vector<ChannelEstimate> targets;
  EstimationResult estimation;
};

/// Single estimation with `targets` excluded from the observations. Targets whose name is a
/// data channel are scored against it; other targets are pure virtual channels.
/// `shared` skips tuning and uses the given model.
TargetResult run_target(const TimeSeriesSet& data, const ModalModel& modal, std::span<const Channel> channels,
                        std::span<const Channel> targets, const EstimationConfig& config,
                        const std::optional<TunedModel>& shared = std::nullopt);

struct LooConfig {
  EstimationConfig estimation;
  bool shared_tuning = false;  ///< tune once on all channels instead of per fold
};

struct LooFold {
  Channel channel;
  bool failed = false;
  std::string error;
  double rmse = 0.0;
  double trac = 0.0;
  TunedModel tuning;
  std::vector<double> measured;
  std::vector<double> reconstructed;
  std::vector<double> variance;
};

struct LooReport {
  std::vector<LooFold> folds;        ///< one per channel, in channel order
  std::vector<std::string> ranking;  ///< successful folds by ascending RMSE
  std::optional<TunedModel> shared;

  std::size_t failed() const;
};

/// Leave-one-out virtual sensing over every channel of `data`.
LooReport run_loo(const TimeSeriesSet& data, const ModalModel& modal, std::span<const Channel> channels,
                  const LooConfig& config);

}  // namespace gplfm

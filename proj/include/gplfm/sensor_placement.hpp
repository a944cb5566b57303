#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gplfm/virtual_sensing.hpp"

namespace gplfm {

/// Which single removal is made permanent at each backward step.
enum class RemovalRule {
  /// Remove the sensor whose absence yields the lowest target RMSE (least critical).
  LeastCritical,
  /// Remove the sensor whose absence yields the highest target RMSE (literal variant,
  /// kept for comparison).
  HighestRmse,
};

struct BsspConfig {
  EstimationConfig estimation;
  std::size_t min_sensors = 3;
  bool retune = false;  ///< re-tune for every evaluated subset instead of once on the full set
  RemovalRule rule = RemovalRule::LeastCritical;
};

struct BsspEvaluation {
  std::string removed;  ///< candidate taken out for this evaluation
  double rmse = 0.0;
  double trac = 0.0;
  bool failed = false;
  std::string error;
};

struct BsspStep {
  std::vector<std::string> retained;
  double rmse = 0.0;
  double trac = 0.0;
};

struct BsspIteration {
  std::vector<BsspEvaluation> evaluations;
  std::string removed;
};

struct BsspResult {
  std::string target;
  std::vector<std::string> removal_order;
  std::vector<BsspStep> steps;  ///< steps[0] is the full candidate set
  std::vector<BsspIteration> iterations;
  std::size_t stopping_cardinality = 0;
  bool aborted = false;  ///< every candidate of some iteration failed
  std::size_t failed_evaluations = 0;
  TunedModel tuning;
};

/// Backward sequential sensor placement for reconstructing `target`. Candidates are all
/// data channels except the target. RMSE/TRAC are scored against `truth` when given
/// (noise-free simulated response), otherwise against the target's measured channel.
/// Ties are broken by the lowest channel index.
BsspResult run_bssp(const TimeSeriesSet& data, const ModalModel& modal, std::span<const Channel> channels,
                    const Channel& target, const std::optional<std::vector<double>>& truth,
                    const BsspConfig& config);

}  // namespace gplfm

#include "gplfm/virtual_sensing.hpp"

#include <algorithm>
#include <numeric>

#include "gplfm/error.hpp"
#include "gplfm/parallel.hpp"

namespace gplfm {

TunedModel tune_model(const ModalModel& modal, std::span<const Channel> observed, double dt, const Matrix& y,
                      const EstimationConfig& config) {
  TunedModel t;
  t.hyper = config.hyper;
  t.noise = config.noise_fixed;
  if (config.tune_prior) {
    TuningConfig pc = config.prior;
    pc.threads = config.threads;
    const PriorTuningResult pr = tune_prior(modal, observed, dt, y, pc, t.noise);
    t.hyper = pr.best;
    t.prior_objective = pr.objective;
  }
  if (config.tune_noise) {
    const NoiseTuningResult nr = tune_R(modal, observed, dt, y, t.hyper, config.noise);
    t.noise = nr.best;
    t.noise_objective = nr.objective;
    t.noise_flat = nr.flat_objective;
  }
  return t;
}

void check_channel_binding(const TimeSeriesSet& data, std::span<const Channel> channels) {
  if (data.channels.size() != channels.size())
    throw InvalidInput("channel binding: data has " + std::to_string(data.channels.size()) +
                       " channels but " + std::to_string(channels.size()) + " channel definitions were given");
  for (std::size_t i = 0; i < channels.size(); ++i) {
    if (data.channels[i].name != channels[i].name)
      throw InvalidInput("channel binding: data channel '" + data.channels[i].name + "' bound to '" +
                         channels[i].name + "'");
    if (data.channels[i].quantity != channels[i].quantity)
      throw InvalidInput("channel binding: quantity mismatch for '" + channels[i].name + "'");
  }
}

TargetResult run_target(const TimeSeriesSet& data, const ModalModel& modal, std::span<const Channel> channels,
                        std::span<const Channel> targets, const EstimationConfig& config,
                        const std::optional<TunedModel>& shared) {
  data.validate();
  check_channel_binding(data, channels);
  if (targets.empty()) throw InvalidInput("run_target: no target channels");

  TargetResult res;
  std::vector<Channel> observed;
  std::vector<std::string> observed_names;
  for (const auto& ch : channels) {
    const bool is_target = std::any_of(targets.begin(), targets.end(), [&](const Channel& t) { return t.name == ch.name; });
    if (!is_target) {
      observed.push_back(ch);
      observed_names.push_back(ch.name);
    }
  }
  if (observed.empty()) throw InvalidInput("run_target: excluding the targets leaves no observing channel");

  const Matrix y = data.matrix(observed_names);
  const double dt = data.dt();
  res.observed = observed_names;
  res.tuning = shared ? *shared : tune_model(modal, observed, dt, y, config);
  const AugmentedModel m = build_gplfm(modal, observed, dt, res.tuning.hyper, res.tuning.noise);
  res.estimation = estimate(m, modal, y, targets);

  for (std::size_t i = 0; i < targets.size(); ++i) {
    ChannelEstimate ce;
    ce.channel = targets[i];
    const auto row = static_cast<Index>(i);
    ce.mean.resize(static_cast<std::size_t>(y.cols()));
    ce.variance.resize(ce.mean.size());
    for (Index k = 0; k < y.cols(); ++k) {
      ce.mean[static_cast<std::size_t>(k)] = res.estimation.outputs.mean(row, k);
      ce.variance[static_cast<std::size_t>(k)] = res.estimation.outputs.var(row, k);
    }
    if (data.find(targets[i].name) >= 0) {
      const auto& measured = data.at(targets[i].name).values;
      ce.rmse = rmse(measured, ce.mean);
      ce.trac = trac(measured, ce.mean);
    }
    res.targets.push_back(std::move(ce));
  }
  return res;
}

std::size_t LooReport::failed() const {
  return static_cast<std::size_t>(std::count_if(folds.begin(), folds.end(), [](const LooFold& f) { return f.failed; }));
}

LooReport run_loo(const TimeSeriesSet& data, const ModalModel& modal, std::span<const Channel> channels,
                  const LooConfig& config) {
  data.validate();
  check_channel_binding(data, channels);
  if (channels.size() < 2) throw InvalidInput("run_loo: need at least two channels");

  LooReport report;
  EstimationConfig inner = config.estimation;
  if (config.shared_tuning) {
    report.shared = tune_model(modal, channels, data.dt(), data.matrix(), config.estimation);
  } else {
    // folds run in parallel; restarts inside a fold stay sequential
    inner.threads = 1;
  }

  report.folds.resize(channels.size());
  parallel_for(channels.size(), config.estimation.threads, [&](std::size_t i) {
    LooFold& fold = report.folds[i];
    fold.channel = channels[i];
    fold.measured = data.channels[i].values;
    try {
      const Channel target = channels[i];
      const TargetResult tr = run_target(data, modal, channels, std::span<const Channel>(&target, 1), inner, report.shared);
      const ChannelEstimate& ce = tr.targets.front();
      fold.rmse = ce.rmse.value();
      fold.trac = ce.trac.value();
      fold.reconstructed = ce.mean;
      fold.variance = ce.variance;
      fold.tuning = tr.tuning;
    } catch (const Error& e) {
      fold.failed = true;
      fold.error = e.what();
    }
  });

  std::vector<std::size_t> order;
  for (std::size_t i = 0; i < report.folds.size(); ++i)
    if (!report.folds[i].failed) order.push_back(i);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return report.folds[a].rmse < report.folds[b].rmse; });
  for (std::size_t i : order) report.ranking.push_back(report.folds[i].channel.name);
  return report;
}

}  // namespace gplfm

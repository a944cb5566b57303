#include "gplfm/sensor_placement.hpp"

#include <algorithm>
#include <limits>

#include "gplfm/error.hpp"
#include "gplfm/parallel.hpp"

namespace gplfm {

namespace {

struct SubsetScore {
  double rmse = 0.0;
  double trac = 0.0;
};

}  // namespace

BsspResult run_bssp(const TimeSeriesSet& data, const ModalModel& modal, std::span<const Channel> channels,
                    const Channel& target, const std::optional<std::vector<double>>& truth,
                    const BsspConfig& config) {
  data.validate();
  check_channel_binding(data, channels);
  if (config.min_sensors < 1) throw InvalidInput("bssp: min_sensors must be >= 1");

  std::vector<std::size_t> current;
  for (std::size_t i = 0; i < channels.size(); ++i)
    if (channels[i].name != target.name) current.push_back(i);
  if (current.size() < config.min_sensors)
    throw InvalidInput("bssp: fewer candidate sensors than min_sensors");

  std::vector<double> reference;
  if (truth) {
    reference = *truth;
  } else if (data.find(target.name) >= 0) {
    reference = data.at(target.name).values;
  } else {
    throw InvalidInput("bssp: target has neither a ground-truth series nor a measured channel");
  }
  if (reference.size() != data.length()) throw InvalidInput("bssp: reference length differs from the data");

  const Matrix all = data.matrix();
  const double dt = data.dt();
  auto subset = [&](const std::vector<std::size_t>& idx) {
    std::vector<Channel> obs;
    Matrix y(static_cast<Index>(idx.size()), all.cols());
    for (std::size_t r = 0; r < idx.size(); ++r) {
      obs.push_back(channels[idx[r]]);
      y.row(static_cast<Index>(r)) = all.row(static_cast<Index>(idx[r]));
    }
    return std::pair{obs, y};
  };

  BsspResult res;
  res.target = target.name;
  {
    auto [obs, y] = subset(current);
    res.tuning = tune_model(modal, obs, dt, y, config.estimation);
  }

  EstimationConfig inner = config.estimation;
  inner.threads = 1;
  auto score = [&](const std::vector<std::size_t>& idx) {
    auto [obs, y] = subset(idx);
    const TunedModel tm = config.retune ? tune_model(modal, obs, dt, y, inner) : res.tuning;
    const AugmentedModel m = build_gplfm(modal, obs, dt, tm.hyper, tm.noise);
    const EstimationResult est = estimate(m, modal, y, std::span<const Channel>(&target, 1));
    const Eigen::RowVectorXd row = est.outputs.mean.row(0);
    const std::vector<double> recon(row.data(), row.data() + row.size());
    return SubsetScore{rmse(reference, recon), trac(reference, recon)};
  };
  auto names_of = [&](const std::vector<std::size_t>& idx) {
    std::vector<std::string> names;
    for (std::size_t i : idx) names.push_back(channels[i].name);
    return names;
  };

  const SubsetScore initial = score(current);
  res.steps.push_back({names_of(current), initial.rmse, initial.trac});

  while (current.size() > config.min_sensors) {
    BsspIteration iter;
    iter.evaluations.resize(current.size());
    parallel_for(current.size(), config.estimation.threads, [&](std::size_t c) {
      std::vector<std::size_t> reduced;
      for (std::size_t j = 0; j < current.size(); ++j)
        if (j != c) reduced.push_back(current[j]);
      BsspEvaluation& ev = iter.evaluations[c];
      ev.removed = channels[current[c]].name;
      try {
        const SubsetScore s = score(reduced);
        ev.rmse = s.rmse;
        ev.trac = s.trac;
      } catch (const Error& e) {
        ev.failed = true;
        ev.error = e.what();
      }
    });

    // current is kept in channel order, so the first strict improvement wins ties
    std::size_t pick = current.size();
    for (std::size_t c = 0; c < current.size(); ++c) {
      const BsspEvaluation& ev = iter.evaluations[c];
      if (ev.failed) {
        ++res.failed_evaluations;
        continue;
      }
      if (pick == current.size()) {
        pick = c;
        continue;
      }
      const double best = iter.evaluations[pick].rmse;
      const bool better = config.rule == RemovalRule::LeastCritical ? ev.rmse < best : ev.rmse > best;
      if (better) pick = c;
    }
    if (pick == current.size()) {
      res.aborted = true;
      res.iterations.push_back(std::move(iter));
      break;
    }
    iter.removed = iter.evaluations[pick].removed;
    res.removal_order.push_back(iter.removed);
    const BsspEvaluation chosen = iter.evaluations[pick];
    current.erase(current.begin() + static_cast<std::ptrdiff_t>(pick));
    res.steps.push_back({names_of(current), chosen.rmse, chosen.trac});
    res.iterations.push_back(std::move(iter));
  }
  res.stopping_cardinality = current.size();
  return res;
}

}  // namespace gplfm

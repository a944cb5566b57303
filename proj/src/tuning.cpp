#include "gplfm/tuning.hpp"

#include <cmath>
#include <limits>
#include <map>

#include "gplfm/error.hpp"
#include "gplfm/parallel.hpp"

namespace gplfm {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Free-parameter bookkeeping for the three-parameter prior search.
struct PriorParameterization {
  const TuningConfig& cfg;
  std::vector<int> free;  // 0 = alpha, 1 = ell, 2 = q_x

  explicit PriorParameterization(const TuningConfig& c) : cfg(c) {
    for (int i = 0; i < 3; ++i)
      if (!bounds(i).fixed) free.push_back(i);
  }

  const LogBounds& bounds(int i) const { return i == 0 ? cfg.alpha : (i == 1 ? cfg.ell : cfg.q_x); }

  Vector lower() const {
    Vector v(static_cast<Index>(free.size()));
    for (std::size_t k = 0; k < free.size(); ++k) v(static_cast<Index>(k)) = bounds(free[k]).lower;
    return v;
  }
  Vector upper() const {
    Vector v(static_cast<Index>(free.size()));
    for (std::size_t k = 0; k < free.size(); ++k) v(static_cast<Index>(k)) = bounds(free[k]).upper;
    return v;
  }

  GplfmHyperparameters decode(const Vector& x) const {
    double logs[3];
    for (int i = 0; i < 3; ++i) logs[i] = bounds(i).fixed.value_or(0.0);
    for (std::size_t k = 0; k < free.size(); ++k) logs[free[k]] = x(static_cast<Index>(k));
    return {std::pow(10.0, logs[0]), std::pow(10.0, logs[1]), std::pow(10.0, logs[2])};
  }
};

Matrix windowed(const Matrix& y, const std::optional<std::pair<Index, Index>>& window) {
  if (!window) return y;
  const auto [b, e] = *window;
  if (b < 0 || e > y.cols() || e - b < 2) throw InvalidInput("tuning window outside the record");
  return y.middleCols(b, e - b);
}

}  // namespace

void LogBounds::validate(const std::string& name) const {
  if (fixed) {
    if (!std::isfinite(*fixed)) throw InvalidInput(name + ": fixed value must be finite");
    return;
  }
  if (!std::isfinite(lower) || !std::isfinite(upper) || !(lower < upper))
    throw InvalidInput(name + ": bounds must be finite with lower < upper");
}

void TuningConfig::validate() const {
  alpha.validate("alpha");
  ell.validate("ell");
  q_x.validate("q_x");
  if (restarts < 1) throw InvalidInput("tuning: restarts must be >= 1");
  if (max_iterations < 1) throw InvalidInput("tuning: max_iterations must be >= 1");
}

void NoiseTuningConfig::validate() const {
  accel.validate("r_accel");
  vel.validate("r_vel");
  disp.validate("r_disp");
  if (grid_points < 2) throw InvalidInput("noise tuning: need at least 2 grid points");
}

EmpiricalCovariance empirical_output_cov(const Matrix& y, bool detrend) {
  const Index ny = y.rows();
  std::vector<Index> cols;
  for (Index k = 0; k < y.cols(); ++k)
    if (y.col(k).allFinite()) cols.push_back(k);
  const Index n = static_cast<Index>(cols.size());
  if (n < 2) throw InvalidInput("empirical_output_cov: need at least 2 complete samples");

  Matrix data(ny, n);
  for (Index k = 0; k < n; ++k) data.col(k) = y.col(cols[static_cast<std::size_t>(k)]);
  if (detrend) data.colwise() -= data.rowwise().mean();

  EmpiricalCovariance out;
  out.samples = n;
  out.cov = symmetrized(data * data.transpose() / static_cast<double>(n - 1));
  for (Index i = 0; i < ny; ++i)
    if (!(out.cov(i, i) > 0.0)) out.singular = true;
  if (!out.singular) {
    Eigen::LLT<Matrix> llt(out.cov);
    out.singular = llt.info() != Eigen::Success;
  }
  return out;
}

Matrix prior_output_cov(const AugmentedModel& m) {
  Matrix pinf;
  try {
    pinf = solve_continuous_lyapunov(m.fc, m.qc);
  } catch (const NumericalError& e) {
    throw InvalidInput(std::string("prior_output_cov: augmented model has no stationary covariance (") +
                       e.what() + ")");
  }
  const Matrix& ha = m.discrete.observation;
  return symmetrized(ha * pinf * ha.transpose());
}

double hellinger(const Matrix& p1, const Matrix& p2) {
  if (p1.rows() != p1.cols() || p2.rows() != p2.cols() || p1.rows() != p2.rows())
    throw InvalidInput("hellinger: covariance matrices must be square with equal dimension");
  if (p1.rows() == 0) throw InvalidInput("hellinger: empty covariance");
  if (!is_psd(p1) || !is_psd(p2)) throw InvalidInput("hellinger: covariance is not positive semidefinite");

  const Matrix a = symmetrized(p1);
  const Matrix b = symmetrized(p2);
  if (a == b) return 0.0;

  Eigen::LLT<Matrix> la(a), lb(b);
  if (la.info() != Eigen::Success || lb.info() != Eigen::Success) return 1.0;
  auto logdet = [](const Eigen::LLT<Matrix>& llt) {
    const Matrix& l = llt.matrixL();
    return 2.0 * l.diagonal().array().log().sum();
  };
  const Matrix mid = 0.5 * (a + b);
  const double log_bc = 0.25 * logdet(la) + 0.25 * logdet(lb) - 0.5 * logdet_spd(mid);
  const double h2 = 1.0 - std::exp(std::min(log_bc, 0.0));
  return std::sqrt(std::clamp(h2, 0.0, 1.0));
}

PriorTuningResult tune_prior(const ModalModel& modal, std::span<const Channel> observed, double dt,
                             const Matrix& y, const TuningConfig& config, const NoiseVariances& noise) {
  config.validate();
  if (y.rows() != static_cast<Index>(observed.size()))
    throw InvalidInput("tune_prior: data rows do not match the observed channels");

  PriorTuningResult result;
  result.empirical = empirical_output_cov(windowed(y, config.window), config.detrend);
  const Matrix& py = result.empirical.cov;
  const std::vector<Channel> channels(observed.begin(), observed.end());

  const PriorParameterization par(config);
  auto objective_at = [&](const GplfmHyperparameters& h) {
    try {
      const AugmentedModel m = build_gplfm(modal, channels, dt, h, noise);
      return hellinger(py, prior_output_cov(m));
    } catch (const Error&) {
      return kInf;
    }
  };

  if (par.free.empty()) {
    result.best = par.decode(Vector());
    result.objective = objective_at(result.best);
    if (!std::isfinite(result.objective)) throw TuningError("tune_prior: fixed parameters give an unstable model");
    result.trace.push_back(result.objective);
    result.restarts.push_back({result.best, result.objective, result.best, result.objective, 0, true});
    return result;
  }

  const Vector lo = par.lower();
  const Vector hi = par.upper();
  const auto starts = latin_hypercube(config.restarts, lo, hi, config.seed);
  std::vector<RestartRecord> records(starts.size());
  std::vector<std::vector<double>> traces(starts.size());

  NelderMeadOptions nm;
  nm.max_iterations = config.max_iterations;
  nm.f_tolerance = config.tolerance;
  nm.x_tolerance = 1e-6;
  parallel_for(starts.size(), config.threads, [&](std::size_t i) {
    auto f = [&](const Vector& x) { return objective_at(par.decode(x)); };
    RestartRecord& rec = records[i];
    rec.start = par.decode(starts[i]);
    rec.start_objective = f(starts[i]);
    const NelderMeadResult r = nelder_mead(f, starts[i], lo, hi, nm);
    rec.result = par.decode(r.x);
    rec.objective = r.value;
    rec.iterations = r.iterations;
    rec.converged = r.converged;
    traces[i] = r.best_trace;
  });

  std::size_t best = records.size();
  double running = kInf;
  for (std::size_t i = 0; i < records.size(); ++i) {
    running = std::min(running, records[i].start_objective);
    for (double v : traces[i]) {
      running = std::min(running, v);
      result.trace.push_back(running);
    }
    if (std::isfinite(records[i].objective) &&
        (best == records.size() || records[i].objective < records[best].objective))
      best = i;
  }
  if (best == records.size())
    throw TuningError("tune_prior: every restart produced an unstable or invalid model");

  result.best = records[best].result;
  result.objective = records[best].objective;
  result.restarts = std::move(records);
  return result;
}

double noise_objective(const ModalModel& modal, std::span<const Channel> observed, double dt,
                       const Matrix& y, const GplfmHyperparameters& hyper, const NoiseVariances& noise,
                       ResidualKind residual) {
  const AugmentedModel m = build_gplfm(modal, observed, dt, hyper, noise);
  FilterResult fr = kalman_filter(m.discrete, y, initial_state(m), dt);
  const Matrix& ha = m.discrete.observation;
  Matrix yhat(y.rows(), y.cols());
  if (residual == ResidualKind::Smoothed) {
    const auto sm = rts_smooth(m.discrete, fr);
    for (Index k = 0; k < y.cols(); ++k) yhat.col(k) = ha * sm[static_cast<std::size_t>(k)].mean;
  } else {
    for (Index k = 0; k < y.cols(); ++k) yhat.col(k) = ha * fr.predicted[static_cast<std::size_t>(k)].mean;
  }

  // per group: RMSE / rms(y), summed over groups
  std::map<Quantity, std::pair<double, double>> sums;  // squared error, squared signal
  std::map<Quantity, Index> counts;
  for (Index i = 0; i < y.rows(); ++i) {
    const Quantity q = observed[static_cast<std::size_t>(i)].quantity;
    for (Index k = 0; k < y.cols(); ++k) {
      if (!std::isfinite(y(i, k))) continue;
      const double e = y(i, k) - yhat(i, k);
      sums[q].first += e * e;
      sums[q].second += y(i, k) * y(i, k);
      ++counts[q];
    }
  }
  double total = 0.0;
  for (const auto& [q, s] : sums) {
    const double n = static_cast<double>(counts[q]);
    const double rms = std::sqrt(s.second / n);
    total += std::sqrt(s.first / n) / (rms > 0.0 ? rms : 1.0);
  }
  return total;
}

NoiseTuningResult tune_R(const ModalModel& modal, std::span<const Channel> observed, double dt,
                         const Matrix& y, const GplfmHyperparameters& hyper,
                         const NoiseTuningConfig& config) {
  config.validate();
  if (y.rows() != static_cast<Index>(observed.size()))
    throw InvalidInput("tune_R: data rows do not match the observed channels");

  // Groups present in the data and not fixed become search dimensions.
  std::vector<Quantity> groups;
  NoiseVariances base;
  auto bounds_of = [&](Quantity q) -> const LogBounds& {
    return q == Quantity::Acceleration ? config.accel : (q == Quantity::Velocity ? config.vel : config.disp);
  };
  auto set = [](NoiseVariances& nv, Quantity q, double v) {
    (q == Quantity::Acceleration ? nv.accel : (q == Quantity::Velocity ? nv.vel : nv.disp)) = v;
  };
  for (Quantity q : {Quantity::Acceleration, Quantity::Velocity, Quantity::Displacement}) {
    const LogBounds& b = bounds_of(q);
    set(base, q, std::pow(10.0, b.fixed.value_or(0.5 * (b.lower + b.upper))));
    bool present = false;
    for (const auto& ch : observed) present = present || ch.quantity == q;
    if (present && !b.fixed) groups.push_back(q);
  }

  NoiseTuningResult result;
  const std::vector<Channel> channels(observed.begin(), observed.end());
  auto decode = [&](const Vector& x) {
    NoiseVariances nv = base;
    for (std::size_t g = 0; g < groups.size(); ++g) set(nv, groups[g], std::pow(10.0, x(static_cast<Index>(g))));
    return nv;
  };
  auto f = [&](const Vector& x) {
    ++result.evaluations;
    try {
      return noise_objective(modal, channels, dt, y, hyper, decode(x), config.residual);
    } catch (const Error&) {
      return kInf;
    }
  };

  if (groups.empty()) {
    result.best = base;
    result.objective = f(Vector());
    return result;
  }

  const Index d = static_cast<Index>(groups.size());
  Vector lo(d), hi(d);
  for (Index g = 0; g < d; ++g) {
    lo(g) = bounds_of(groups[static_cast<std::size_t>(g)]).lower;
    hi(g) = bounds_of(groups[static_cast<std::size_t>(g)]).upper;
  }

  // Coarse grid (fewer points per axis in higher dimension), then a bounded simplex refine.
  const int per_axis = d == 1 ? config.grid_points : std::max(3, config.grid_points / (2 * static_cast<int>(d) - 1));
  Index total = 1;
  for (Index g = 0; g < d; ++g) total *= per_axis;
  Vector best_x;
  double best_f = kInf, worst_f = -kInf;
  for (Index flat = 0; flat < total; ++flat) {
    Vector x(d);
    Index rem = flat;
    for (Index g = 0; g < d; ++g) {
      const Index i = rem % per_axis;
      rem /= per_axis;
      x(g) = lo(g) + (hi(g) - lo(g)) * static_cast<double>(i) / (per_axis - 1);
    }
    const double v = f(x);
    if (v < best_f) {
      best_f = v;
      best_x = x;
    }
    if (std::isfinite(v)) worst_f = std::max(worst_f, v);
  }
  if (!std::isfinite(best_f)) throw TuningError("tune_R: every noise setting failed");

  if (worst_f - best_f <= 1e-12 * std::max(std::abs(best_f), 1e-300)) {
    result.flat_objective = true;
    result.best = decode(0.5 * (lo + hi));
    result.objective = best_f;
    return result;
  }

  NelderMeadOptions nm;
  nm.max_iterations = config.max_iterations;
  nm.initial_step = 0.5 * (hi - lo).minCoeff() / (per_axis - 1);
  nm.x_tolerance = 1e-3;
  nm.f_tolerance = 1e-12;
  const NelderMeadResult r = nelder_mead(f, best_x, lo, hi, nm);
  result.best = decode(r.x);
  result.objective = r.value;
  return result;
}

}  // namespace gplfm

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "gplfm/error.hpp"
#include "gplfm/gp_kernel.hpp"
#include "gplfm/gplfm.hpp"
#include "gplfm/sensor_placement.hpp"
#include "gplfm/signal.hpp"
#include "gplfm/simulate.hpp"
#include "gplfm/tuning.hpp"
#include "gplfm/virtual_sensing.hpp"

namespace py = pybind11;
using namespace gplfm;

namespace {

using release = py::call_guard<py::gil_scoped_release>;

// Span parameters arrive as lists or 1-d arrays; pybind converts to vectors first.
double rmse_v(const std::vector<double>& a, const std::vector<double>& b) { return rmse(a, b); }
double trac_v(const std::vector<double>& a, const std::vector<double>& b) { return trac(a, b); }

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Gaussian-process latent force model virtual sensing";
  m.attr("__version__") = GPLFM_VERSION;

  auto base = py::register_exception<Error>(m, "GplfmError", PyExc_RuntimeError);
  py::register_exception<InvalidInput>(m, "InvalidInput", base.ptr());
  py::register_exception<ParseError>(m, "ParseError", base.ptr());
  py::register_exception<NumericalError>(m, "NumericalError", base.ptr());
  py::register_exception<TuningError>(m, "TuningError", base.ptr());
  py::register_exception<UndefinedMetric>(m, "UndefinedMetric", base.ptr());

  // structure
  py::enum_<Quantity>(m, "Quantity")
      .value("Acceleration", Quantity::Acceleration)
      .value("Velocity", Quantity::Velocity)
      .value("Displacement", Quantity::Displacement);

  py::class_<Channel>(m, "Channel")
      .def(py::init<>())
      .def(py::init([](std::string name, Quantity q, Index dof) { return Channel{std::move(name), q, dof}; }),
           py::arg("name"), py::arg("quantity"), py::arg("dof"))
      .def_readwrite("name", &Channel::name)
      .def_readwrite("quantity", &Channel::quantity)
      .def_readwrite("dof", &Channel::dof)
      .def("__eq__", &Channel::operator==)
      .def("__repr__", [](const Channel& c) {
        return "Channel('" + c.name + "', " + std::string(to_string(c.quantity)) + ", " + std::to_string(c.dof) + ")";
      });

  py::class_<SensorLayout>(m, "SensorLayout")
      .def(py::init<>())
      .def(py::init([](std::vector<Index> a, std::vector<Index> v, std::vector<Index> d) {
             return SensorLayout{std::move(a), std::move(v), std::move(d)};
           }),
           py::arg("accel") = std::vector<Index>{}, py::arg("vel") = std::vector<Index>{},
           py::arg("disp") = std::vector<Index>{})
      .def_readwrite("accel_dofs", &SensorLayout::accel_dofs)
      .def_readwrite("vel_dofs", &SensorLayout::vel_dofs)
      .def_readwrite("disp_dofs", &SensorLayout::disp_dofs)
      .def("channels", &SensorLayout::channels);

  py::class_<FullOrderSystem>(m, "FullOrderSystem")
      .def(py::init([](Matrix mass, Matrix damping, Matrix stiffness) {
             return FullOrderSystem{std::move(mass), std::move(damping), std::move(stiffness)};
           }),
           py::arg("mass"), py::arg("damping"), py::arg("stiffness"))
      .def_readwrite("mass", &FullOrderSystem::mass)
      .def_readwrite("damping", &FullOrderSystem::damping)
      .def_readwrite("stiffness", &FullOrderSystem::stiffness)
      .def_property_readonly("n_dof", &FullOrderSystem::n_dof)
      .def("validate", &FullOrderSystem::validate);

  py::class_<ModalModel>(m, "ModalModel")
      .def(py::init<>())
      .def_readwrite("phi", &ModalModel::phi)
      .def_readwrite("omega", &ModalModel::omega)
      .def_readwrite("zeta", &ModalModel::zeta)
      .def_readwrite("dof_labels", &ModalModel::dof_labels)
      .def_property_readonly("n_dof", &ModalModel::n_dof)
      .def_property_readonly("n_modes", &ModalModel::n_modes)
      .def("with_uniform_damping", &ModalModel::with_uniform_damping, py::arg("ratio"))
      .def("truncated", &ModalModel::truncated, py::arg("n_modes"))
      .def("validate", &ModalModel::validate);

  m.def("spring_mass_chain", &spring_mass_chain, py::arg("n_dof"), py::arg("mass"), py::arg("stiffness"));
  m.def("solve_modal", &solve_modal, py::arg("system"), py::arg("n_modes"));

  // kernel
  py::class_<Matern32Params>(m, "Matern32Params")
      .def(py::init<double, double>(), py::arg("alpha"), py::arg("ell"))
      .def_property_readonly("alpha", &Matern32Params::alpha)
      .def_property_readonly("ell", &Matern32Params::ell)
      .def_property_readonly("lam", &Matern32Params::lambda);
  py::class_<GpKernelSsm>(m, "GpKernelSsm")
      .def_readonly("dt", &GpKernelSsm::dt)
      .def_readonly("fc", &GpKernelSsm::fc)
      .def_readonly("qc", &GpKernelSsm::qc)
      .def_readonly("pinf", &GpKernelSsm::pinf)
      .def_readonly("fd", &GpKernelSsm::fd)
      .def_readonly("qf", &GpKernelSsm::qf);
  m.def("kernel_eval", &kernel_eval, py::arg("params"), py::arg("tau"));
  m.def("to_state_space", &to_state_space, py::arg("params"), py::arg("dt"));
  m.def("ssm_covariance", &ssm_covariance, py::arg("ssm"), py::arg("lag_steps"));

  // model and inference
  py::class_<GplfmHyperparameters>(m, "Hyperparameters")
      .def(py::init([](double a, double l, double q) { return GplfmHyperparameters{a, l, q}; }), py::arg("alpha") = 1.0,
           py::arg("ell") = 0.1, py::arg("q_x") = 1e-12)
      .def_readwrite("alpha", &GplfmHyperparameters::alpha)
      .def_readwrite("ell", &GplfmHyperparameters::ell)
      .def_readwrite("q_x", &GplfmHyperparameters::q_x);
  py::class_<NoiseVariances>(m, "NoiseVariances")
      .def(py::init([](double a, double v, double d) { return NoiseVariances{a, v, d}; }), py::arg("accel") = 1e-4,
           py::arg("vel") = 1e-6, py::arg("disp") = 1e-8)
      .def_readwrite("accel", &NoiseVariances::accel)
      .def_readwrite("vel", &NoiseVariances::vel)
      .def_readwrite("disp", &NoiseVariances::disp);

  py::class_<AugmentedModel>(m, "AugmentedModel")
      .def_readonly("dt", &AugmentedModel::dt)
      .def_property_readonly("n_states", &AugmentedModel::n_states)
      .def_property_readonly("n_modes", &AugmentedModel::n_modes)
      .def_property_readonly("transition", [](const AugmentedModel& a) { return a.discrete.transition; })
      .def_property_readonly("observation", [](const AugmentedModel& a) { return a.discrete.observation; })
      .def_property_readonly("process_noise", [](const AugmentedModel& a) { return a.discrete.process_noise; })
      .def_property_readonly("measurement_noise", [](const AugmentedModel& a) { return a.discrete.measurement_noise; });
  m.def(
      "build_gplfm",
      [](const ModalModel& modal, const std::vector<Channel>& observed, double dt, const GplfmHyperparameters& h,
         const NoiseVariances& n) { return build_gplfm(modal, observed, dt, h, n); },
      py::arg("modal"), py::arg("observed"), py::arg("dt"), py::arg("hyper"), py::arg("noise"));

  py::class_<GaussianState>(m, "GaussianState")
      .def_readonly("mean", &GaussianState::mean)
      .def_readonly("cov", &GaussianState::cov)
      .def_readonly("t", &GaussianState::t);
  py::class_<SeriesWithVariance>(m, "SeriesWithVariance")
      .def_readonly("mean", &SeriesWithVariance::mean)
      .def_readonly("var", &SeriesWithVariance::var);
  py::class_<EstimationResult>(m, "EstimationResult")
      .def_readonly("filtered", &EstimationResult::filtered)
      .def_readonly("smoothed", &EstimationResult::smoothed)
      .def_readonly("forces", &EstimationResult::forces)
      .def_readonly("outputs", &EstimationResult::outputs)
      .def_readonly("loglik", &EstimationResult::loglik);
  m.def(
      "estimate",
      [](const AugmentedModel& a, const ModalModel& modal, const Matrix& y, const std::vector<Channel>& outputs) {
        return estimate(a, modal, y, outputs);
      },
      py::arg("model"), py::arg("modal"), py::arg("y"), py::arg("outputs"), release());

  // signals
  py::class_<SeriesChannel>(m, "SeriesChannel")
      .def(py::init([](std::string name, Quantity q, std::vector<double> v) {
             return SeriesChannel{std::move(name), q, std::move(v)};
           }),
           py::arg("name"), py::arg("quantity"), py::arg("values"))
      .def_readwrite("name", &SeriesChannel::name)
      .def_readwrite("quantity", &SeriesChannel::quantity)
      .def_readwrite("values", &SeriesChannel::values);
  py::class_<TimeSeriesSet>(m, "TimeSeriesSet")
      .def(py::init([](double fs, std::vector<SeriesChannel> ch, double t0) {
             TimeSeriesSet ts;
             ts.fs = fs;
             ts.t0 = t0;
             ts.channels = std::move(ch);
             ts.validate();
             return ts;
           }),
           py::arg("fs"), py::arg("channels"), py::arg("t0") = 0.0)
      .def_readwrite("fs", &TimeSeriesSet::fs)
      .def_readwrite("t0", &TimeSeriesSet::t0)
      .def_readwrite("channels", &TimeSeriesSet::channels)
      .def_property_readonly("length", &TimeSeriesSet::length)
      .def("matrix", py::overload_cast<>(&TimeSeriesSet::matrix, py::const_))
      .def("at", &TimeSeriesSet::at, py::return_value_policy::copy)
      .def("validate", &TimeSeriesSet::validate);
  m.def(
      "load_csv",
      [](const std::filesystem::path& p, std::optional<double> fs) { return load_csv(p, CsvOptions{fs}); },
      py::arg("path"), py::arg("fs") = py::none());
  m.def(
      "write_csv",
      [](const std::filesystem::path& p, const TimeSeriesSet& ts, const std::vector<std::string>& header) {
        write_csv(p, ts, header);
      },
      py::arg("path"), py::arg("data"), py::arg("header") = std::vector<std::string>{});
  m.def("highpass", &highpass, py::arg("data"), py::arg("cutoff_hz"), py::arg("include_displacement") = false);
  m.def("decimate", &decimate, py::arg("data"), py::arg("factor"));
  m.def("rmse", &rmse_v, py::arg("a"), py::arg("b"));
  m.def("trac", &trac_v, py::arg("a"), py::arg("b"));
  m.def("hellinger", &hellinger, py::arg("p1"), py::arg("p2"));
  py::class_<Spectrum>(m, "Spectrum")
      .def_readonly("frequency", &Spectrum::frequency)
      .def_readonly("power", &Spectrum::power);
  m.def(
      "psd",
      [](const std::vector<double>& x, double fs, std::size_t segment) {
        WelchOptions o;
        o.segment = segment;
        return psd(x, fs, o);
      },
      py::arg("x"), py::arg("fs"), py::arg("segment") = 1024);

  // simulation
  py::class_<TriangularForce>(m, "TriangularForce")
      .def(py::init([](double peak, double rise, double fall, double onset) {
             return TriangularForce{peak, rise, fall, onset};
           }),
           py::arg("peak") = 1.0, py::arg("rise") = 0.05, py::arg("fall") = 0.05, py::arg("onset") = 0.5)
      .def_readwrite("peak", &TriangularForce::peak)
      .def_readwrite("rise", &TriangularForce::rise)
      .def_readwrite("fall", &TriangularForce::fall)
      .def_readwrite("onset", &TriangularForce::onset)
      .def("value", &TriangularForce::value);
  py::class_<ForceLoad>(m, "ForceLoad")
      .def(py::init([](Index dof, double dir) { return ForceLoad{dof, dir}; }), py::arg("dof"), py::arg("direction") = 1.0)
      .def_readwrite("dof", &ForceLoad::dof)
      .def_readwrite("direction", &ForceLoad::direction);
  py::class_<NoiseRms>(m, "NoiseRms")
      .def(py::init<>())
      .def_readwrite("accel", &NoiseRms::accel)
      .def_readwrite("vel", &NoiseRms::vel)
      .def_readwrite("disp", &NoiseRms::disp);
  py::class_<ImpactScenario>(m, "ImpactScenario")
      .def(py::init<>())
      .def_readwrite("force", &ImpactScenario::force)
      .def_readwrite("loads", &ImpactScenario::loads)
      .def_readwrite("noise", &ImpactScenario::noise)
      .def_readwrite("duration", &ImpactScenario::duration)
      .def_readwrite("fs", &ImpactScenario::fs)
      .def_readwrite("seed", &ImpactScenario::seed)
      .def("samples", &ImpactScenario::samples);
  py::class_<SimulationResult>(m, "SimulationResult")
      .def_readonly("measured", &SimulationResult::measured)
      .def_readonly("clean", &SimulationResult::clean)
      .def_readonly("states", &SimulationResult::states)
      .def_readonly("modal_forces", &SimulationResult::modal_forces)
      .def_readonly("load", &SimulationResult::load)
      .def_readonly("displacement", &SimulationResult::displacement)
      .def_readonly("velocity", &SimulationResult::velocity)
      .def_readonly("acceleration", &SimulationResult::acceleration);
  m.def(
      "simulate",
      [](const ImpactScenario& sc, const ModalModel& modal, const std::vector<Channel>& ch) {
        return simulate(sc, modal, ch);
      },
      py::arg("scenario"), py::arg("modal"), py::arg("channels"), release());

  // tuning and workflows
  py::enum_<ResidualKind>(m, "ResidualKind")
      .value("Smoothed", ResidualKind::Smoothed)
      .value("Predicted", ResidualKind::Predicted);
  py::enum_<RemovalRule>(m, "RemovalRule")
      .value("LeastCritical", RemovalRule::LeastCritical)
      .value("HighestRmse", RemovalRule::HighestRmse);
  py::class_<LogBounds>(m, "LogBounds")
      .def(py::init([](double lo, double hi, std::optional<double> fixed) { return LogBounds{lo, hi, fixed}; }),
           py::arg("lower"), py::arg("upper"), py::arg("fixed") = py::none())
      .def_readwrite("lower", &LogBounds::lower)
      .def_readwrite("upper", &LogBounds::upper)
      .def_readwrite("fixed", &LogBounds::fixed);
  py::class_<TuningConfig>(m, "TuningConfig")
      .def(py::init<>())
      .def_readwrite("alpha", &TuningConfig::alpha)
      .def_readwrite("ell", &TuningConfig::ell)
      .def_readwrite("q_x", &TuningConfig::q_x)
      .def_readwrite("restarts", &TuningConfig::restarts)
      .def_readwrite("max_iterations", &TuningConfig::max_iterations)
      .def_readwrite("tolerance", &TuningConfig::tolerance)
      .def_readwrite("seed", &TuningConfig::seed)
      .def_readwrite("detrend", &TuningConfig::detrend)
      .def_readwrite("window", &TuningConfig::window)
      .def_readwrite("threads", &TuningConfig::threads);
  py::class_<NoiseTuningConfig>(m, "NoiseTuningConfig")
      .def(py::init<>())
      .def_readwrite("accel", &NoiseTuningConfig::accel)
      .def_readwrite("vel", &NoiseTuningConfig::vel)
      .def_readwrite("disp", &NoiseTuningConfig::disp)
      .def_readwrite("residual", &NoiseTuningConfig::residual)
      .def_readwrite("grid_points", &NoiseTuningConfig::grid_points)
      .def_readwrite("max_iterations", &NoiseTuningConfig::max_iterations);
  py::class_<EstimationConfig>(m, "EstimationConfig")
      .def(py::init<>())
      .def_readwrite("prior", &EstimationConfig::prior)
      .def_readwrite("noise", &EstimationConfig::noise)
      .def_readwrite("tune_prior", &EstimationConfig::tune_prior)
      .def_readwrite("tune_noise", &EstimationConfig::tune_noise)
      .def_readwrite("hyper", &EstimationConfig::hyper)
      .def_readwrite("noise_fixed", &EstimationConfig::noise_fixed)
      .def_readwrite("threads", &EstimationConfig::threads);
  py::class_<TunedModel>(m, "TunedModel")
      .def(py::init<>())
      .def_readwrite("hyper", &TunedModel::hyper)
      .def_readwrite("noise", &TunedModel::noise)
      .def_readonly("prior_objective", &TunedModel::prior_objective)
      .def_readonly("noise_objective", &TunedModel::noise_objective)
      .def_readonly("noise_flat", &TunedModel::noise_flat);
  m.def(
      "tune_model",
      [](const ModalModel& modal, const std::vector<Channel>& observed, double dt, const Matrix& y,
         const EstimationConfig& c) { return tune_model(modal, observed, dt, y, c); },
      py::arg("modal"), py::arg("observed"), py::arg("dt"), py::arg("y"), py::arg("config"), release());

  py::class_<ChannelEstimate>(m, "ChannelEstimate")
      .def_readonly("channel", &ChannelEstimate::channel)
      .def_readonly("mean", &ChannelEstimate::mean)
      .def_readonly("variance", &ChannelEstimate::variance)
      .def_readonly("rmse", &ChannelEstimate::rmse)
      .def_readonly("trac", &ChannelEstimate::trac);
  py::class_<TargetResult>(m, "TargetResult")
      .def_readonly("observed", &TargetResult::observed)
      .def_readonly("tuning", &TargetResult::tuning)
      .def_readonly("targets", &TargetResult::targets)
      .def_readonly("estimation", &TargetResult::estimation);
  m.def(
      "run_target",
      [](const TimeSeriesSet& data, const ModalModel& modal, const std::vector<Channel>& ch,
         const std::vector<Channel>& targets, const EstimationConfig& c, const std::optional<TunedModel>& shared) {
        return run_target(data, modal, ch, targets, c, shared);
      },
      py::arg("data"), py::arg("modal"), py::arg("channels"), py::arg("targets"), py::arg("config"),
      py::arg("shared") = py::none(), release());

  py::class_<LooConfig>(m, "LooConfig")
      .def(py::init<>())
      .def_readwrite("estimation", &LooConfig::estimation)
      .def_readwrite("shared_tuning", &LooConfig::shared_tuning);
  py::class_<LooFold>(m, "LooFold")
      .def_readonly("channel", &LooFold::channel)
      .def_readonly("failed", &LooFold::failed)
      .def_readonly("error", &LooFold::error)
      .def_readonly("rmse", &LooFold::rmse)
      .def_readonly("trac", &LooFold::trac)
      .def_readonly("tuning", &LooFold::tuning)
      .def_readonly("measured", &LooFold::measured)
      .def_readonly("reconstructed", &LooFold::reconstructed)
      .def_readonly("variance", &LooFold::variance);
  py::class_<LooReport>(m, "LooReport")
      .def_readonly("folds", &LooReport::folds)
      .def_readonly("ranking", &LooReport::ranking)
      .def_readonly("shared", &LooReport::shared)
      .def("failed", &LooReport::failed);
  m.def(
      "run_loo",
      [](const TimeSeriesSet& data, const ModalModel& modal, const std::vector<Channel>& ch, const LooConfig& c) {
        return run_loo(data, modal, ch, c);
      },
      py::arg("data"), py::arg("modal"), py::arg("channels"), py::arg("config"), release());

  py::class_<BsspConfig>(m, "BsspConfig")
      .def(py::init<>())
      .def_readwrite("estimation", &BsspConfig::estimation)
      .def_readwrite("min_sensors", &BsspConfig::min_sensors)
      .def_readwrite("retune", &BsspConfig::retune)
      .def_readwrite("rule", &BsspConfig::rule);
  py::class_<BsspEvaluation>(m, "BsspEvaluation")
      .def_readonly("removed", &BsspEvaluation::removed)
      .def_readonly("rmse", &BsspEvaluation::rmse)
      .def_readonly("trac", &BsspEvaluation::trac)
      .def_readonly("failed", &BsspEvaluation::failed)
      .def_readonly("error", &BsspEvaluation::error);
  py::class_<BsspStep>(m, "BsspStep")
      .def_readonly("retained", &BsspStep::retained)
      .def_readonly("rmse", &BsspStep::rmse)
      .def_readonly("trac", &BsspStep::trac);
  py::class_<BsspIteration>(m, "BsspIteration")
      .def_readonly("evaluations", &BsspIteration::evaluations)
      .def_readonly("removed", &BsspIteration::removed);
  py::class_<BsspResult>(m, "BsspResult")
      .def_readonly("target", &BsspResult::target)
      .def_readonly("removal_order", &BsspResult::removal_order)
      .def_readonly("steps", &BsspResult::steps)
      .def_readonly("iterations", &BsspResult::iterations)
      .def_readonly("stopping_cardinality", &BsspResult::stopping_cardinality)
      .def_readonly("aborted", &BsspResult::aborted)
      .def_readonly("failed_evaluations", &BsspResult::failed_evaluations)
      .def_readonly("tuning", &BsspResult::tuning);
  m.def(
      "run_bssp",
      [](const TimeSeriesSet& data, const ModalModel& modal, const std::vector<Channel>& ch, const Channel& target,
         const std::optional<std::vector<double>>& truth,
         const BsspConfig& c) { return run_bssp(data, modal, ch, target, truth, c); },
      py::arg("data"), py::arg("modal"), py::arg("channels"), py::arg("target"), py::arg("truth") = py::none(),
      py::arg("config") = BsspConfig{}, release());
}

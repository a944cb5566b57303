// gplfm: config-driven virtual sensing workflows.
//
// Exit codes: 0 ok, 1 unexpected, 2 usage/config, 3 invalid input, 4 parse,
// 5 numerical, 6 tuning, 7 completed with failed folds/candidates, 8 undefined metric.
#include <CLI11.hpp>
#include <json.hpp>

#include <cctype>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "gplfm/config.hpp"
#include "gplfm/error.hpp"
#include "gplfm/model_io.hpp"
#include "gplfm/sensor_placement.hpp"
#include "gplfm/signal.hpp"
#include "gplfm/simulate.hpp"
#include "gplfm/virtual_sensing.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace gplfm;

namespace {

constexpr int kExitUnknown = 1;
constexpr int kExitUsage = 2;
constexpr int kExitPartial = 7;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Flags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<int> threads;
  std::optional<double> fs;
  std::optional<double> highpass;
  std::optional<int> decimate;
  bool verbose = false;
  // metrics
  std::string reference, estimate;
  bool psd = false;
};

struct Run {
  json cfg;
  fs::path base;  // relative paths in the config resolve here
  fs::path out;
  std::uint64_t seed = 1;
  int threads = 1;
  bool verbose = false;
  std::vector<std::string> header;

  json echo;  // cfg without run-location keys; this is what gets hashed and echoed
  std::string hash;

  json header_json() const {
    return {{"tool", std::string("gplfm ") + GPLFM_VERSION}, {"config_hash", hash}, {"seed", seed}};
  }
  void log(const std::string& s) const {
    if (verbose) std::cerr << s << "\n";
  }
};

const json& section(const json& j, const char* key) {
  static const json empty = json::object();
  if (!j.contains(key)) return empty;
  if (!j[key].is_object()) throw UsageError(std::string("config: [") + key + "] must be a table");
  return j[key];
}

template <class T>
T get_or(const json& j, const char* key, T fallback) {
  return j.contains(key) ? j[key].get<T>() : fallback;
}

Run make_run(const Flags& f) {
  Run r;
  r.cfg = json::object();
  if (!f.config.empty()) {
    r.cfg = load_config(f.config);
    r.base = fs::path(f.config).parent_path();
  }
  // flags win over the file; the hash covers the merged result
  if (f.seed) r.cfg["seed"] = *f.seed;
  if (f.threads) r.cfg["threads"] = *f.threads;
  if (f.out) r.cfg["out"] = *f.out;
  if (f.fs) {
    r.cfg["simulation"]["fs"] = *f.fs;
    if (r.cfg.contains("data")) r.cfg["data"]["fs"] = *f.fs;
  }
  if (f.highpass) r.cfg["preprocess"]["highpass"] = *f.highpass;
  if (f.decimate) r.cfg["preprocess"]["decimate"] = *f.decimate;

  r.seed = get_or<std::uint64_t>(r.cfg, "seed", 1);
  r.threads = get_or<int>(r.cfg, "threads", 1);
  if (r.threads < 1) throw UsageError("threads must be >= 1");
  r.out = get_or<std::string>(r.cfg, "out", "gplfm_out");
  r.verbose = f.verbose || get_or<bool>(r.cfg, "verbose", false);
  // where the files go and how chatty the run is do not change any result
  r.echo = r.cfg;
  r.echo.erase("out");
  r.echo.erase("verbose");
  r.hash = config_hash_hex(r.echo);
  r.header = {std::string("gplfm ") + GPLFM_VERSION, "config_hash " + r.hash,
              "seed " + std::to_string(r.seed)};
  fs::create_directories(r.out);
  return r;
}

fs::path resolve(const Run& r, const std::string& p) {
  const fs::path path(p);
  return path.is_absolute() || r.base.empty() ? path : r.base / path;
}

void write_json(const Run& r, const std::string& name, json body) {
  json doc = {{"header", r.header_json()}};
  doc.update(body);
  std::ofstream out(r.out / name);
  out << doc.dump(2) << "\n";
  if (!out) throw InvalidInput("cannot write " + (r.out / name).string());
}

// Plain numeric table with the same comment header as the series files.
void write_table(const Run& r, const fs::path& path, const std::vector<std::string>& names,
                 const std::vector<std::vector<double>>& cols) {
  std::ofstream out(path);
  for (const auto& h : r.header) out << "# " << h << "\n";
  for (std::size_t c = 0; c < names.size(); ++c) out << (c ? "," : "") << names[c];
  out << "\n";
  const std::size_t n = cols.empty() ? 0 : cols.front().size();
  char buf[40];
  for (std::size_t k = 0; k < n; ++k) {
    for (std::size_t c = 0; c < cols.size(); ++c) {
      std::snprintf(buf, sizeof buf, "%.17g", cols[c][k]);
      out << (c ? "," : "") << buf;
    }
    out << "\n";
  }
  if (!out) throw InvalidInput("cannot write " + path.string());
}

std::vector<double> time_axis(double t0, double fs, std::size_t n) {
  std::vector<double> t(n);
  for (std::size_t k = 0; k < n; ++k) t[k] = t0 + static_cast<double>(k) / fs;
  return t;
}

std::vector<double> stddev(const std::vector<double>& var) {
  std::vector<double> s(var.size());
  for (std::size_t i = 0; i < var.size(); ++i) s[i] = std::sqrt(std::max(var[i], 0.0));
  return s;
}

// --- structure, sensors, scenario -------------------------------------------

ModalModel load_structure(const Run& r) {
  const json& s = section(r.cfg, "structure");
  ModalModel modal;
  const Index n_modes = get_or<Index>(s, "n_modes", -1);  // -1 keeps every mode
  if (s.contains("modal_file")) {
    modal = load_modal(resolve(r, s["modal_file"].get<std::string>()));
  } else {
    FullOrderSystem sys;
    if (s.contains("full_order_file")) {
      sys = load_full_order(resolve(r, s["full_order_file"].get<std::string>()));
    } else if (s.contains("chain")) {
      const json& c = s["chain"];
      sys = spring_mass_chain(c.at("n_dof").get<Index>(), c.at("mass").get<double>(), c.at("stiffness").get<double>());
    } else {
      throw UsageError("config: [structure] needs modal_file, full_order_file or chain");
    }
    modal = solve_modal(sys, n_modes > 0 ? std::min(n_modes, sys.n_dof()) : sys.n_dof());
  }
  if (n_modes > 0 && n_modes < modal.n_modes()) modal = modal.truncated(n_modes);
  if (s.contains("zeta")) modal = modal.with_uniform_damping(s["zeta"].get<double>());
  if (!modal.has_damping()) throw UsageError("config: structure.zeta is required when the modal file has no damping");
  modal.validate();
  return modal;
}

Index resolve_dof(const json& v, const ModalModel& modal) {
  if (v.is_number_integer()) return v.get<Index>();
  const std::string s = v.get<std::string>();
  const Index byname = modal.dof_index(s);
  if (byname >= 0) return byname;
  std::size_t i = s.size();
  while (i > 0 && std::isdigit(static_cast<unsigned char>(s[i - 1]))) --i;
  if (i == s.size()) throw InvalidInput("cannot map '" + s + "' to a DOF");
  return std::stoll(s.substr(i));
}

std::vector<Channel> layout_channels(const Run& r, const ModalModel& modal) {
  const json& s = section(r.cfg, "sensors");
  SensorLayout layout;
  for (const auto& v : s.value("accel", json::array())) layout.accel_dofs.push_back(resolve_dof(v, modal));
  for (const auto& v : s.value("vel", json::array())) layout.vel_dofs.push_back(resolve_dof(v, modal));
  for (const auto& v : s.value("disp", json::array())) layout.disp_dofs.push_back(resolve_dof(v, modal));
  if (layout.empty()) throw UsageError("config: [sensors] lists no accel, vel or disp DOFs");
  layout.validate(modal.n_dof());
  return layout.channels();
}

ImpactScenario load_scenario(const Run& r) {
  ImpactScenario sc;
  const json& f = section(r.cfg, "force");
  sc.force.peak = get_or(f, "peak", sc.force.peak);
  sc.force.rise = get_or(f, "rise", sc.force.rise);
  sc.force.fall = get_or(f, "fall", sc.force.fall);
  sc.force.onset = get_or(f, "onset", sc.force.onset);
  const json dofs = f.value("dofs", json::array());
  const json dirs = f.value("directions", json::array());
  if (!dirs.empty() && dirs.size() != dofs.size()) throw UsageError("config: force.directions must match force.dofs");
  for (std::size_t i = 0; i < dofs.size(); ++i)
    sc.loads.push_back({dofs[i].get<Index>(), dirs.empty() ? 1.0 : dirs[i].get<double>()});
  const json& s = section(r.cfg, "simulation");
  sc.fs = get_or(s, "fs", sc.fs);
  sc.duration = get_or(s, "duration", sc.duration);
  if (s.contains("noise_accel")) sc.noise.accel = s["noise_accel"].get<double>();
  sc.noise.vel = get_or(s, "noise_vel", 0.0);
  sc.noise.disp = get_or(s, "noise_disp", 0.0);
  sc.seed = r.seed;
  return sc;
}

// Simulates; with simulation.snr_db the accelerometer noise RMS is set from the clean RMS.
SimulationResult run_simulation(const Run& r, ImpactScenario& sc, const ModalModel& modal,
                                const std::vector<Channel>& ch) {
  const json& s = section(r.cfg, "simulation");
  if (s.contains("snr_db")) {
    ImpactScenario quiet = sc;
    quiet.noise.accel = 0.0;
    const SimulationResult clean = simulate(quiet, modal, ch);
    double ss = 0.0;
    std::size_t n = 0;
    for (const auto& c : clean.clean.channels)
      if (c.quantity == Quantity::Acceleration)
        for (double v : c.values) {
          ss += v * v;
          ++n;
        }
    sc.noise.accel = n ? std::sqrt(ss / static_cast<double>(n)) * std::pow(10.0, -s["snr_db"].get<double>() / 20.0) : 0.0;
  }
  return simulate(sc, modal, ch);
}

// --- data ---------------------------------------------------------------------

struct Dataset {
  TimeSeriesSet data;
  std::vector<Channel> channels;
  std::optional<SimulationResult> sim;  // when the data was simulated in memory
};

TimeSeriesSet preprocess(const Run& r, TimeSeriesSet ts) {
  const json& p = section(r.cfg, "preprocess");
  if (p.contains("highpass")) {
    const double hz = p["highpass"].get<double>();
    if (hz > 0.0) ts = highpass(ts, hz, get_or(p, "highpass_displacement", false));
  }
  if (p.contains("decimate")) {
    const int k = p["decimate"].get<int>();
    if (k > 1) ts = decimate(ts, k);
  }
  return ts;
}

Dataset load_data(const Run& r, const ModalModel& modal) {
  Dataset d;
  const json& dj = section(r.cfg, "data");
  if (dj.contains("file")) {
    CsvOptions opts;
    if (dj.contains("fs")) opts.fs = dj["fs"].get<double>();
    d.data = load_csv(resolve(r, dj["file"].get<std::string>()), opts);
    const json& map = section(section(r.cfg, "sensors"), "dofs");
    for (const auto& c : d.data.channels) {
      const Index dof = map.contains(c.name) ? resolve_dof(map[c.name], modal) : resolve_dof(json(c.name), modal);
      if (dof < 0 || dof >= modal.n_dof()) throw InvalidInput("channel " + c.name + " maps outside the model");
      d.channels.push_back({c.name, c.quantity, dof});
    }
    r.log("loaded " + std::to_string(d.data.channels.size()) + " channels from " + dj["file"].get<std::string>());
  } else {
    d.channels = layout_channels(r, modal);
    ImpactScenario sc = load_scenario(r);
    d.sim = run_simulation(r, sc, modal, d.channels);
    d.data = d.sim->measured;
    r.log("simulated " + std::to_string(d.data.length()) + " samples");
  }
  d.data.validate();
  d.data = preprocess(r, d.data);
  return d;
}

LogBounds bounds(const json& b, const json& fixed, const char* key, LogBounds def) {
  if (b.contains(key)) {
    const json& v = b[key];
    if (!v.is_array() || v.size() != 2) throw UsageError(std::string("config: tuning.bounds.") + key + " must be [lower, upper]");
    def.lower = v[0].get<double>();
    def.upper = v[1].get<double>();
  }
  if (fixed.contains(key)) {
    const double x = fixed[key].get<double>();
    if (!(x > 0.0)) throw UsageError(std::string("config: tuning.fixed.") + key + " must be positive");
    def.fixed = std::log10(x);
  }
  return def;
}

EstimationConfig estimation_config(const Run& r) {
  EstimationConfig e;
  const json& t = section(r.cfg, "tuning");
  const json& b = section(t, "bounds");
  const json& fx = section(t, "fixed");
  e.tune_prior = get_or(t, "prior", true);
  e.tune_noise = get_or(t, "noise", true);
  e.prior.alpha = bounds(b, fx, "alpha", e.prior.alpha);
  e.prior.ell = bounds(b, fx, "ell", e.prior.ell);
  e.prior.q_x = bounds(b, fx, "q_x", e.prior.q_x);
  e.prior.restarts = get_or(t, "restarts", e.prior.restarts);
  e.prior.max_iterations = get_or(t, "max_iterations", e.prior.max_iterations);
  e.prior.tolerance = get_or(t, "tolerance", e.prior.tolerance);
  e.prior.detrend = get_or(t, "detrend", e.prior.detrend);
  e.prior.seed = get_or<std::uint64_t>(t, "seed", r.seed);
  if (t.contains("window")) e.prior.window = std::make_pair(t["window"][0].get<Index>(), t["window"][1].get<Index>());
  e.noise.accel = bounds(b, fx, "accel", e.noise.accel);
  e.noise.vel = bounds(b, fx, "vel", e.noise.vel);
  e.noise.disp = bounds(b, fx, "disp", e.noise.disp);
  e.noise.grid_points = get_or(t, "grid_points", e.noise.grid_points);
  e.noise.max_iterations = get_or(t, "noise_iterations", e.noise.max_iterations);
  const std::string res = get_or<std::string>(t, "residual", "predicted");
  if (res == "predicted")
    e.noise.residual = ResidualKind::Predicted;
  else if (res == "smoothed")
    e.noise.residual = ResidualKind::Smoothed;
  else
    throw UsageError("config: tuning.residual must be \"predicted\" or \"smoothed\"");

  const json& m = section(r.cfg, "model");
  e.hyper.alpha = get_or(m, "alpha", e.hyper.alpha);
  e.hyper.ell = get_or(m, "ell", e.hyper.ell);
  e.hyper.q_x = get_or(m, "q_x", e.hyper.q_x);
  e.noise_fixed.accel = get_or(m, "noise_accel", e.noise_fixed.accel);
  e.noise_fixed.vel = get_or(m, "noise_vel", e.noise_fixed.vel);
  e.noise_fixed.disp = get_or(m, "noise_disp", e.noise_fixed.disp);
  e.threads = r.threads;
  e.prior.threads = r.threads;
  e.prior.validate();
  e.noise.validate();
  return e;
}

// "a3" names a data channel; "<quantity>:<dof>" is a virtual channel.
Channel parse_target(const std::string& spec, const Dataset& d, const ModalModel& modal) {
  const auto colon = spec.find(':');
  if (colon == std::string::npos) {
    for (const auto& c : d.channels)
      if (c.name == spec) return c;
    throw InvalidInput("target '" + spec + "' is not a data channel; use <quantity>:<dof> for a virtual one");
  }
  const Quantity q = parse_quantity(spec.substr(0, colon));
  const std::string where = spec.substr(colon + 1);
  const bool numeric = !where.empty() && std::all_of(where.begin(), where.end(), [](char ch) { return std::isdigit(static_cast<unsigned char>(ch)); });
  const Index dof = numeric ? std::stoll(where) : resolve_dof(json(where), modal);
  if (dof < 0 || dof >= modal.n_dof()) throw InvalidInput("target '" + spec + "' is outside the model");
  const char letter = q == Quantity::Acceleration ? 'a' : q == Quantity::Velocity ? 'v' : 'd';
  return {std::string("virtual_") + letter + std::to_string(dof), q, dof};
}

json tuned_json(const TunedModel& t) {
  json j = {{"alpha", t.hyper.alpha}, {"ell", t.hyper.ell}, {"q_x", t.hyper.q_x},
            {"noise", {{"accel", t.noise.accel}, {"vel", t.noise.vel}, {"disp", t.noise.disp}}},
            {"noise_flat", t.noise_flat}};
  if (t.prior_objective) j["prior_objective"] = *t.prior_objective;
  if (t.noise_objective) j["noise_objective"] = *t.noise_objective;
  return j;
}

json bounds_json(const LogBounds& b) {
  json j = {{"log10_lower", b.lower}, {"log10_upper", b.upper}};
  if (b.fixed) j["log10_fixed"] = *b.fixed;
  return j;
}

// --- subcommands -------------------------------------------------------------

int cmd_simulate(const Run& r) {
  const ModalModel modal = load_structure(r);
  const std::vector<Channel> ch = layout_channels(r, modal);
  ImpactScenario sc = load_scenario(r);
  const SimulationResult sim = run_simulation(r, sc, modal, ch);
  write_csv(r.out / "measured.csv", preprocess(r, sim.measured), r.header);
  write_csv(r.out / "clean.csv", preprocess(r, sim.clean), r.header);
  const std::size_t n = sim.clean.length();
  const auto t = time_axis(sim.clean.t0, sim.clean.fs, n);
  auto per_dof = [&](const Matrix& m, const char* prefix) {
    std::vector<std::string> names = {"time"};
    std::vector<std::vector<double>> cols = {t};
    for (Index i = 0; i < m.rows(); ++i) {
      names.push_back(prefix + modal.dof_labels[static_cast<std::size_t>(i)]);
      std::vector<double> c(n);
      for (std::size_t k = 0; k < n; ++k) c[k] = m(i, static_cast<Index>(k));
      cols.push_back(std::move(c));
    }
    return std::make_pair(names, cols);
  };
  for (const auto& [file, m, prefix] : {std::tuple{"truth_displacement.csv", &sim.displacement, "d_"},
                                        std::tuple{"truth_velocity.csv", &sim.velocity, "v_"},
                                        std::tuple{"truth_acceleration.csv", &sim.acceleration, "a_"}}) {
    const auto [names, cols] = per_dof(*m, prefix);
    write_table(r, r.out / file, names, cols);
  }
  {
    std::vector<std::string> names = {"time"};
    std::vector<std::vector<double>> cols = {t};
    for (Index j = 0; j < sim.modal_forces.rows(); ++j) names.push_back("f" + std::to_string(j + 1));
    for (Index j = 0; j < sim.modal_forces.rows(); ++j) {
      std::vector<double> c(n);
      for (std::size_t k = 0; k < n; ++k) c[k] = sim.modal_forces(j, static_cast<Index>(k));
      cols.push_back(std::move(c));
    }
    names.push_back("load");
    cols.emplace_back(sim.load.data(), sim.load.data() + sim.load.size());
    write_table(r, r.out / "truth_forces.csv", names, cols);
  }
  save_modal(r.out / "modal.json", modal);
  json noise = {{"accel_rms", sc.noise.accel_or_default(sc.fs)}, {"vel_rms", sc.noise.vel}, {"disp_rms", sc.noise.disp}};
  write_json(r, "scenario.json", {{"config", r.echo}, {"noise", noise}, {"samples", n}});
  std::cout << "simulated " << ch.size() << " channels, " << n << " samples at " << sc.fs << " Hz -> " << r.out.string()
            << "\n";
  return 0;
}

int cmd_tune(const Run& r) {
  const ModalModel modal = load_structure(r);
  const Dataset d = load_data(r, modal);
  const EstimationConfig e = estimation_config(r);
  const TunedModel t = tune_model(modal, d.channels, d.data.dt(), d.data.matrix(), e);
  json b = {{"alpha", bounds_json(e.prior.alpha)}, {"ell", bounds_json(e.prior.ell)}, {"q_x", bounds_json(e.prior.q_x)},
            {"accel", bounds_json(e.noise.accel)}, {"vel", bounds_json(e.noise.vel)}, {"disp", bounds_json(e.noise.disp)}};
  write_json(r, "tuning.json", {{"tuned", tuned_json(t)}, {"bounds", b}, {"restarts", e.prior.restarts},
                                {"fs", d.data.fs}, {"channels", d.data.channels.size()}});
  std::printf("alpha %.6g  ell %.6g  q_x %.6g\nR accel %.6g  vel %.6g  disp %.6g%s\n", t.hyper.alpha, t.hyper.ell,
              t.hyper.q_x, t.noise.accel, t.noise.vel, t.noise.disp, t.noise_flat ? "  (flat noise objective)" : "");
  return 0;
}

int cmd_estimate(const Run& r) {
  const ModalModel modal = load_structure(r);
  const Dataset d = load_data(r, modal);
  const EstimationConfig e = estimation_config(r);
  const json& ej = section(r.cfg, "estimate");
  std::vector<Channel> targets;
  for (const auto& s : ej.value("targets", json::array())) targets.push_back(parse_target(s.get<std::string>(), d, modal));
  if (targets.empty()) throw UsageError("config: estimate.targets is empty");
  const TargetResult res = run_target(d.data, modal, d.channels, targets, e);

  const std::size_t n = d.data.length();
  std::vector<std::string> names = {"time"};
  std::vector<std::vector<double>> cols = {time_axis(d.data.t0, d.data.fs, n)};
  json tj = json::array();
  for (const auto& t : res.targets) {
    names.push_back(t.channel.name + "_mean");
    cols.push_back(t.mean);
    names.push_back(t.channel.name + "_std");
    cols.push_back(stddev(t.variance));
    json item = {{"name", t.channel.name}, {"quantity", std::string(to_string(t.channel.quantity))}, {"dof", t.channel.dof}};
    if (t.rmse) {
      names.push_back(t.channel.name + "_measured");
      cols.push_back(d.data.at(t.channel.name).values);
      item["rmse"] = *t.rmse;
      item["trac"] = *t.trac;
    }
    tj.push_back(item);
  }
  write_table(r, r.out / "estimate_series.csv", names, cols);

  std::vector<std::string> fnames = {"time"};
  std::vector<std::vector<double>> fcols = {cols.front()};
  for (Index j = 0; j < res.estimation.forces.mean.rows(); ++j) {
    std::vector<double> m(n), s(n);
    for (std::size_t k = 0; k < n; ++k) {
      m[k] = res.estimation.forces.mean(j, static_cast<Index>(k));
      s[k] = std::sqrt(std::max(res.estimation.forces.var(j, static_cast<Index>(k)), 0.0));
    }
    fnames.push_back("f" + std::to_string(j + 1) + "_mean");
    fcols.push_back(std::move(m));
    fnames.push_back("f" + std::to_string(j + 1) + "_std");
    fcols.push_back(std::move(s));
  }
  write_table(r, r.out / "estimate_forces.csv", fnames, fcols);
  write_json(r, "estimate.json", {{"observed", res.observed}, {"tuned", tuned_json(res.tuning)}, {"targets", tj},
                                  {"loglik", res.estimation.loglik}});
  for (const auto& t : res.targets) {
    if (t.rmse)
      std::printf("%-16s rmse %.6g  trac %.2f%%\n", t.channel.name.c_str(), *t.rmse, *t.trac);
    else
      std::printf("%-16s reconstructed (no measurement to score against)\n", t.channel.name.c_str());
  }
  return 0;
}

int cmd_loo(const Run& r) {
  const ModalModel modal = load_structure(r);
  const Dataset d = load_data(r, modal);
  LooConfig cfg;
  cfg.estimation = estimation_config(r);
  cfg.shared_tuning = get_or(section(r.cfg, "loo"), "shared_tuning", false);
  const LooReport rep = run_loo(d.data, modal, d.channels, cfg);

  fs::create_directories(r.out / "loo_folds");
  json folds = json::array();
  std::vector<std::string> sum_names = {"channel_index", "rmse", "trac", "failed"};
  std::vector<std::vector<double>> sum_cols(4);
  const auto t = time_axis(d.data.t0, d.data.fs, d.data.length());
  for (std::size_t i = 0; i < rep.folds.size(); ++i) {
    const LooFold& f = rep.folds[i];
    json fj = {{"channel", f.channel.name}, {"failed", f.failed}};
    if (f.failed) {
      fj["error"] = f.error;
    } else {
      fj["rmse"] = f.rmse;
      fj["trac"] = f.trac;
      fj["tuned"] = tuned_json(f.tuning);
      write_table(r, r.out / "loo_folds" / (f.channel.name + ".csv"), {"time", "measured", "reconstructed", "std"},
                  {t, f.measured, f.reconstructed, stddev(f.variance)});
    }
    folds.push_back(fj);
    sum_cols[0].push_back(static_cast<double>(i));
    sum_cols[1].push_back(f.failed ? std::nan("") : f.rmse);
    sum_cols[2].push_back(f.failed ? std::nan("") : f.trac);
    sum_cols[3].push_back(f.failed ? 1.0 : 0.0);
  }
  write_table(r, r.out / "loo_summary.csv", sum_names, sum_cols);
  json body = {{"folds", folds}, {"ranking", rep.ranking}, {"failed", rep.failed()}, {"shared_tuning", cfg.shared_tuning}};
  if (rep.shared) body["shared"] = tuned_json(*rep.shared);
  write_json(r, "loo.json", body);

  std::printf("%-4s %-16s %14s %9s\n", "#", "channel", "rmse", "trac%");
  for (std::size_t i = 0; i < rep.folds.size(); ++i) {
    const LooFold& f = rep.folds[i];
    if (f.failed)
      std::printf("%-4zu %-16s %14s %9s  %s\n", i, f.channel.name.c_str(), "-", "-", f.error.c_str());
    else
      std::printf("%-4zu %-16s %14.6g %9.2f\n", i, f.channel.name.c_str(), f.rmse, f.trac);
  }
  return rep.failed() == 0 ? 0 : kExitPartial;
}

int cmd_bssp(const Run& r) {
  const ModalModel modal = load_structure(r);
  const Dataset d = load_data(r, modal);
  const json& bj = section(r.cfg, "bssp");
  if (!bj.contains("target")) throw UsageError("config: bssp.target is required");
  const Channel target = parse_target(bj["target"].get<std::string>(), d, modal);
  BsspConfig cfg;
  cfg.estimation = estimation_config(r);
  cfg.min_sensors = get_or<std::size_t>(bj, "min_sensors", 3);
  cfg.retune = get_or(bj, "retune", false);
  const std::string rule = get_or<std::string>(bj, "rule", "least-critical");
  if (rule == "least-critical")
    cfg.rule = RemovalRule::LeastCritical;
  else if (rule == "highest-rmse")
    cfg.rule = RemovalRule::HighestRmse;
  else
    throw UsageError("config: bssp.rule must be \"least-critical\" or \"highest-rmse\"");

  // score against the noise-free response when the data was simulated, after the same preprocessing
  std::optional<std::vector<double>> truth;
  if (d.sim && get_or(bj, "use_truth", true)) {
    TimeSeriesSet ts;
    ts.t0 = d.sim->clean.t0;
    ts.fs = d.sim->clean.fs;
    const Matrix& m = target.quantity == Quantity::Acceleration ? d.sim->acceleration
                      : target.quantity == Quantity::Velocity   ? d.sim->velocity
                                                                : d.sim->displacement;
    std::vector<double> row(static_cast<std::size_t>(m.cols()));
    for (Index k = 0; k < m.cols(); ++k) row[static_cast<std::size_t>(k)] = m(target.dof, k);
    ts.channels.push_back({target.name, target.quantity, std::move(row)});
    truth = preprocess(r, ts).channels.front().values;
  }
  const BsspResult res = run_bssp(d.data, modal, d.channels, target, truth, cfg);

  json steps = json::array();
  std::vector<std::vector<double>> curve(3);
  for (const auto& s : res.steps) {
    steps.push_back({{"count", s.retained.size()}, {"retained", s.retained}, {"rmse", s.rmse}, {"trac", s.trac}});
    curve[0].push_back(static_cast<double>(s.retained.size()));
    curve[1].push_back(s.rmse);
    curve[2].push_back(s.trac);
  }
  write_table(r, r.out / "bssp_curve.csv", {"count", "rmse", "trac"}, curve);
  json its = json::array();
  for (const auto& it : res.iterations) {
    json ev = json::array();
    for (const auto& e : it.evaluations) {
      json x = {{"removed", e.removed}, {"failed", e.failed}};
      if (e.failed)
        x["error"] = e.error;
      else
        x.update({{"rmse", e.rmse}, {"trac", e.trac}});
      ev.push_back(x);
    }
    its.push_back({{"removed", it.removed}, {"evaluations", ev}});
  }
  write_json(r, "bssp.json",
             {{"target", res.target}, {"scored_against", truth ? "noise-free response" : "measurement"},
              {"rule", rule}, {"removal_order", res.removal_order}, {"steps", steps}, {"iterations", its},
              {"stopping_cardinality", res.stopping_cardinality}, {"aborted", res.aborted},
              {"failed_evaluations", res.failed_evaluations}, {"tuned", tuned_json(res.tuning)}});

  std::printf("%-6s %14s %9s  %s\n", "count", "rmse", "trac%", "removed next");
  for (std::size_t i = 0; i < res.steps.size(); ++i)
    std::printf("%-6zu %14.6g %9.2f  %s\n", res.steps[i].retained.size(), res.steps[i].rmse, res.steps[i].trac,
                i < res.removal_order.size() ? res.removal_order[i].c_str() : "");
  if (res.aborted) std::fprintf(stderr, "aborted: every candidate of an iteration failed\n");
  return res.aborted || res.failed_evaluations > 0 ? kExitPartial : 0;
}

int cmd_metrics(const Run& r, const Flags& f) {
  if (f.reference.empty() || f.estimate.empty()) throw UsageError("metrics needs --reference and --estimate");
  const TimeSeriesSet ref = preprocess(r, load_csv(f.reference));
  const TimeSeriesSet est = preprocess(r, load_csv(f.estimate));
  json rows = json::array();
  for (const auto& c : ref.channels) {
    if (est.find(c.name) < 0) continue;
    const auto& e = est.at(c.name).values;
    const double rm = rmse(c.values, e), tr = trac(c.values, e);
    rows.push_back({{"channel", c.name}, {"rmse", rm}, {"trac", tr}});
    std::printf("%-16s rmse %.6g  trac %.2f%%\n", c.name.c_str(), rm, tr);
    if (f.psd) {
      const Spectrum a = psd(c.values, ref.fs), b = psd(e, est.fs);
      write_table(r, r.out / ("psd_" + c.name + ".csv"), {"frequency", "reference", "estimate"},
                  {a.frequency, a.power, b.power});
    }
  }
  if (rows.empty()) throw InvalidInput("no channel name is common to both files");
  write_json(r, "metrics.json", {{"reference", f.reference}, {"estimate", f.estimate}, {"channels", rows}});
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Gaussian-process latent force virtual sensing"};
  app.set_version_flag("--version", std::string("gplfm ") + GPLFM_VERSION);
  app.require_subcommand(1);
  Flags f;
  app.add_option("--config", f.config, "TOML (or .json) run configuration")->check(CLI::ExistingFile);
  app.add_option("--seed", f.seed, "RNG seed for simulation noise and tuning starts");
  app.add_option("--out", f.out, "output directory");
  app.add_option("--threads", f.threads, "worker threads");
  app.add_option("--fs", f.fs, "sampling rate in Hz (simulation, or CSV files without a time column)");
  app.add_option("--highpass", f.highpass, "high-pass cutoff in Hz applied to the data");
  app.add_option("--decimate", f.decimate, "integer decimation factor applied to the data");
  app.add_flag("-v,--verbose", f.verbose, "progress on stderr");
  app.fallthrough();

  auto* sim = app.add_subcommand("simulate", "simulate an impact scenario and write data plus ground truth");
  auto* tune = app.add_subcommand("tune", "tune the force prior and measurement noise");
  auto* est = app.add_subcommand("estimate", "reconstruct target channels");
  auto* loo = app.add_subcommand("loo", "leave-one-out virtual sensing over every channel");
  auto* bssp = app.add_subcommand("bssp", "backward sequential sensor placement for one target");
  auto* met = app.add_subcommand("metrics", "RMSE/TRAC (and optional PSD) between two CSV files");
  met->add_option("--reference", f.reference, "measured or true series")->check(CLI::ExistingFile);
  met->add_option("--estimate", f.estimate, "reconstructed series")->check(CLI::ExistingFile);
  met->add_flag("--psd", f.psd, "also write Welch spectra per channel");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    const Run r = make_run(f);
    if (*sim) return cmd_simulate(r);
    if (*tune) return cmd_tune(r);
    if (*est) return cmd_estimate(r);
    if (*loo) return cmd_loo(r);
    if (*bssp) return cmd_bssp(r);
    if (*met) return cmd_metrics(r, f);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const json::exception& e) {
    std::cerr << "error: config: " << e.what() << "\n";
    return kExitUsage;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return static_cast<int>(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUnknown;
  }
  return kExitUsage;
}

#include "commands.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <numbers>
#include <optional>
#include <ostream>
#include <sstream>

#include "csv.hpp"
#include "sta/constants.hpp"
#include "sta/dynamics.hpp"
#include "sta/errors.hpp"
#include "sta/gaussian.hpp"
#include "sta/ionsim.hpp"
#include "sta/optimizer.hpp"
#include "sta/parallel.hpp"

namespace sta::cli {

namespace {

constexpr double kFidelityThreshold = 0.999;

void note(const CommandOptions& options, CommandResult& result, const std::string& message) {
  result.messages.push_back(message);
  if (options.log) *options.log << message << '\n';
}

void fail(const CommandOptions& options, CommandResult& result, int code, const std::string& message) {
  note(options, result, "assertion failed: " + message);
  if (result.exit_code == kExitOk) result.exit_code = code;
}

std::filesystem::path prepare_dir(const CommandOptions& options) {
  std::filesystem::create_directories(options.out_dir);
  return options.out_dir;
}

void write_json(const std::filesystem::path& path, const nlohmann::json& doc) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << doc.dump(2) << '\n';
}

/// Pair for a protocol kind; constant protocols stay at f0.
TrapPair effective_pair(const RunConfig& config, ProtocolKind kind, double tf) {
  TrapPair pair = config.pair(tf);
  if (kind == ProtocolKind::Constant) pair.omegaf = pair.omega0;
  return pair;
}

GaussianState initial_state(const RunConfig& config, const TrapPair& pair) {
  switch (config.state) {
    case StateKind::Thermal:
      return thermal_state(pair.omega0, config.temperature_K, pair.mass);
    case StateKind::Coherent:
      return coherent_state(pair.omega0, config.alpha, pair.mass);
    case StateKind::None:
      break;
  }
  throw ConfigError("invalid configuration:\n  $.state: required for this command");
}

struct Propagation {
  MomentTrajectory moments;
  GaussianState target;
  double fidelity = 0.0;
  double phase_integral = 0.0;
  double dt = 0.0;
};

Propagation propagate(const RunConfig& config, const Protocol& protocol, const TrapPair& pair, double dt_scale) {
  Propagation out;
  out.dt = default_step(protocol) * dt_scale;
  const GaussianState s0 = initial_state(config, pair);
  out.moments = propagate_moments(s0, protocol, out.dt);
  if (config.state == StateKind::Thermal) {
    out.target = target_thermal(pair, config.temperature_K);
  } else {
    out.phase_integral = phase_integral(solve_ermakov(protocol, pair, out.dt));
    out.target = target_coherent(pair, config.alpha, out.phase_integral);
  }
  out.fidelity = fidelity(out.moments.final_state(), out.target);
  return out;
}

nlohmann::json moments_json(const GaussianState& s) {
  return {{"X1_mean_q", s.mean_q}, {"X2_mean_p", s.mean_p}, {"X3_q_sq", s.q_sq},
          {"X4_p_sq", s.p_sq},     {"X5_qp_sym", s.qp_sym}, {"mass_kg", s.mass}};
}

nlohmann::json complex_json(std::complex<double> z) { return {{"re", z.real()}, {"im", z.imag()}}; }

std::vector<double> uniform_times(double tf, std::size_t points) {
  std::vector<double> t(points);
  for (std::size_t i = 0; i < points; ++i) t[i] = tf * static_cast<double>(i) / static_cast<double>(points - 1);
  return t;
}

// Indices 0, stride, 2 stride, ..., always including the last.
std::vector<std::size_t> thinned(std::size_t size, std::size_t max_rows) {
  const std::size_t stride = std::max<std::size_t>(1, (size + max_rows - 2) / std::max<std::size_t>(1, max_rows - 1));
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < size; i += stride) idx.push_back(i);
  if (idx.back() != size - 1) idx.push_back(size - 1);
  return idx;
}

nlohmann::json extra_json(const std::vector<ExtraCoefficient>& extra) {
  auto arr = nlohmann::json::array();
  for (const auto& e : extra) arr.push_back({{"index", e.index}, {"value", e.value}});
  return arr;
}

}  // namespace

unsigned resolve_thread_request(int flag_value) {
  if (flag_value > 0) return static_cast<unsigned>(flag_value);
  if (const char* env = std::getenv("STA_TRAPKIT_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) return static_cast<unsigned>(v);
    throw ConfigError(std::string("STA_TRAPKIT_THREADS must be a positive integer (got '") + env + "')");
  }
  return 0;
}

CommandResult cmd_design(const RunConfig& config, const CommandOptions& options) {
  CommandResult result;
  const auto dir = prepare_dir(options);
  const TrapPair pair = effective_pair(config, config.kind, config.tf_s);
  const Protocol protocol = make_protocol(config);
  const std::size_t n = config.output_grid_points;
  const auto t = uniform_times(protocol.tf(), n);

  CsvTable w2{{"t_s", "omega_sq"}, {t, protocol.grid_values(n)}};
  CsvTable adiab{{"t_s", "adiabaticity"}, {t, std::vector<double>(n)}};
  double max_adiabaticity = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    adiab.columns[1][i] = adiabaticity_parameter(protocol, t[i]);
    max_adiabaticity = std::max(max_adiabaticity, std::abs(adiab.columns[1][i]));
  }

  CsvTable bt{{"t_s", "b", "bdot", "bddot"}, {}};
  nlohmann::json boundary = nullptr;
  if (protocol.scaling()) {
    const auto& b = *protocol.scaling();
    bt.columns = {t, std::vector<double>(n), std::vector<double>(n), std::vector<double>(n)};
    for (std::size_t i = 0; i < n; ++i) {
      const auto d = b.at(t[i]);
      bt.columns[1][i] = d.b;
      bt.columns[2][i] = d.db;
      bt.columns[3][i] = d.d2b;
    }
    const auto res = verify_boundary(b, pair);
    boundary = {{"residuals", res.values}, {"max", res.max()}};
    if (options.assert_mode && !(res.max() < 1e-12)) {
      fail(options, result, kExitNumerical, "boundary residual " + format_number(res.max()) + " >= 1e-12");
    }
  } else {
    const auto traj = solve_ermakov(protocol, pair, default_step(protocol) * options.dt_scale);
    bt.columns.assign(4, {});
    for (std::size_t i : thinned(traj.size(), n)) {
      bt.columns[0].push_back(traj.grid[i]);
      bt.columns[1].push_back(traj.b[i]);
      bt.columns[2].push_back(traj.bdot[i]);
      bt.columns[3].push_back(traj.bddot[i]);
    }
  }

  write_csv(dir / "omega_sq.csv", w2);
  write_csv(dir / "b.csv", bt);
  write_csv(dir / "adiabaticity.csv", adiab);
  result.files = {dir / "omega_sq.csv", dir / "b.csv", dir / "adiabaticity.csv"};

  const double min_w2 = min_omega_sq(protocol, std::max<std::size_t>(n, 4001));
  result.report = {
      {"kind", to_string(protocol.kind())},
      {"tf_s", protocol.tf()},
      {"omega_sq_start", protocol.omega_sq(0.0)},
      {"omega_sq_end", protocol.omega_sq(protocol.tf())},
      {"omega_sq_target_start", pair.omega0 * pair.omega0},
      {"omega_sq_target_end", pair.omegaf * pair.omegaf},
      {"endpoint_tolerance", protocol.metadata().endpoint_tolerance},
      {"min_omega_sq", min_w2},
      {"anti_confinement", min_w2 < 0.0},
      {"max_abs_omega_sq", max_abs_omega_sq(protocol)},
      {"max_slew", max_slew(protocol)},
      {"slew_lower_bound", slew_lower_bound(pair)},
      {"max_abs_adiabaticity", max_adiabaticity},
      {"dc_axial_curvature_at_min", dc_axial_curvature(min_w2)},
      {"boundary", boundary},
      {"extra_coeffs", extra_json(protocol.metadata().extra)},
  };
  write_json(dir / "design_report.json", result.report);
  result.files.push_back(dir / "design_report.json");
  return result;
}

CommandResult cmd_propagate(const RunConfig& config, const CommandOptions& options) {
  CommandResult result;
  const auto dir = prepare_dir(options);
  const TrapPair pair = effective_pair(config, config.kind, config.tf_s);
  const Protocol protocol = make_protocol(config);
  const auto run = propagate(config, protocol, pair, options.dt_scale);

  CsvTable table{{"t_s", "X1", "X2", "X3", "X4", "X5"}, std::vector<std::vector<double>>(6)};
  for (std::size_t i : thinned(run.moments.states.size(), config.output_grid_points)) {
    const auto& s = run.moments.states[i];
    table.columns[0].push_back(run.moments.grid[i]);
    table.columns[1].push_back(s.mean_q);
    table.columns[2].push_back(s.mean_p);
    table.columns[3].push_back(s.q_sq);
    table.columns[4].push_back(s.p_sq);
    table.columns[5].push_back(s.qp_sym);
  }
  write_csv(dir / "moments.csv", table);

  const auto& final_state = run.moments.final_state();
  nlohmann::json report = {
      {"kind", to_string(protocol.kind())},
      {"tf_s", protocol.tf()},
      {"dt_s", run.dt},
      {"steps", run.moments.states.size() - 1},
      {"final_moments", moments_json(final_state)},
      {"target_moments", moments_json(run.target)},
      {"fidelity", run.fidelity},
      {"uncertainty_product_ratio", final_state.uncertainty_product() / (0.25 * kHbar * kHbar)},
      {"mean_energy_final_J", mean_energy(final_state, pair.omegaf)},
  };
  if (config.state == StateKind::Thermal) {
    report["initial_temperature_K"] = config.temperature_K;
    report["expected_temperature_K"] = config.temperature_K * pair.omegaf / pair.omega0;
    try {
      const auto te = effective_temperature(final_state, pair.omegaf);
      report["effective_temperature_K"] = te.kelvin;
      report["below_resolution"] = te.below_resolution;
    } catch (const PhysicsError& e) {
      report["effective_temperature_K"] = nullptr;
      report["effective_temperature_note"] = e.what();
    }
  } else {
    report["alpha0"] = complex_json(config.alpha);
    report["phase_integral_s"] = run.phase_integral;
    report["alpha_target"] = complex_json(target_amplitude(pair, config.alpha, run.phase_integral));
    report["alpha_final"] = complex_json(coherent_amplitude(final_state, pair.omegaf));
  }
  result.report = report;
  write_json(dir / "report.json", report);
  result.files = {dir / "moments.csv", dir / "report.json"};
  if (options.assert_mode && !(run.fidelity >= kFidelityThreshold)) {
    fail(options, result, kExitPhysics, "fidelity " + format_number(run.fidelity) + " < 0.999");
  }
  return result;
}

CommandResult cmd_fidelity_sweep(const RunConfig& config, const CommandOptions& options) {
  CommandResult result;
  if (config.tf_list.empty()) throw ConfigError("invalid configuration:\n  $.sweep.tf_list: required for fidelity-sweep");
  (void)initial_state(config, config.pair());
  const auto dir = prepare_dir(options);

  struct Row {
    ProtocolKind kind;
    double tf;
    double fidelity = std::numeric_limits<double>::quiet_NaN();
    std::string status = "ok";
  };
  std::vector<Row> rows;
  for (auto kind : config.sweep_protocols)
    for (double tf : config.tf_list) rows.push_back({kind, tf});

  parallel_for(rows.size(), options.threads, [&](std::size_t i) {
    Row& row = rows[i];
    try {
      const Protocol protocol = make_protocol(config, row.kind, row.tf);
      row.fidelity = propagate(config, protocol, effective_pair(config, row.kind, row.tf), options.dt_scale).fidelity;
    } catch (const std::exception& e) {
      row.status = e.what();
      std::replace(row.status.begin(), row.status.end(), ',', ';');
      std::replace(row.status.begin(), row.status.end(), '\n', ' ');
    }
  });

  const auto path = dir / "fidelity_vs_tf.csv";
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << "protocol,tf_s,fidelity,status\n";
  auto arr = nlohmann::json::array();
  for (const auto& row : rows) {
    out << to_string(row.kind) << ',' << format_number(row.tf) << ',' << format_number(row.fidelity) << ','
        << row.status << '\n';
    arr.push_back({{"protocol", to_string(row.kind)},
                   {"tf_s", row.tf},
                   {"fidelity", std::isnan(row.fidelity) ? nlohmann::json(nullptr) : nlohmann::json(row.fidelity)},
                   {"status", row.status}});
    if (row.status != "ok") note(options, result, "row " + std::string(to_string(row.kind)) + " tf=" +
                                                      format_number(row.tf) + " failed: " + row.status);
    if (options.assert_mode && row.kind == ProtocolKind::Shortcut && !(row.fidelity >= kFidelityThreshold)) {
      fail(options, result, kExitPhysics,
           "shortcut fidelity at tf=" + format_number(row.tf) + " is " + format_number(row.fidelity));
    }
  }
  result.report = {{"rows", arr}};
  result.files = {path};
  return result;
}

CommandResult cmd_optimize(const RunConfig& config, const CommandOptions& options) {
  CommandResult result;
  const auto dir = prepare_dir(options);
  const TrapPair pair = config.pair();
  SlewObjective objective;
  objective.pair = pair;
  objective.grid_points = config.optimize.grid_points;
  objective.final_points = config.optimize.final_points;
  objective.softmax_power = config.optimize.softmax_power;
  objective.max_iterations = config.optimize.max_iterations;
  objective.threads = options.threads;
  const auto opt = optimize_extra_coeffs(objective, config.optimize.n_extra);

  const Protocol improved = Protocol::shortcut(pair, b_extended(pair, opt.coefficients));
  const auto boundary = verify_boundary(*improved.scaling(), pair);

  // Check the improved design still performs the transfer.
  RunConfig probe = config;
  probe.kind = ProtocolKind::Shortcut;
  probe.extra = opt.coefficients;
  probe.protocol_grid_points = 0;
  if (probe.state == StateKind::None) {
    probe.state = StateKind::Thermal;
    probe.temperature_K = 2e-3;
  }
  const double fid = propagate(probe, improved, pair, options.dt_scale).fidelity;

  const std::size_t n = config.output_grid_points;
  write_csv(dir / "omega_sq.csv", CsvTable{{"t_s", "omega_sq"}, {uniform_times(pair.tf, n), improved.grid_values(n)}});

  result.report = {
      {"n_extra", config.optimize.n_extra},
      {"coefficients", extra_json(opt.coefficients)},
      {"ratio", opt.ratio},
      {"baseline_max_slew", opt.baseline_slew},
      {"optimized_max_slew", opt.optimized_slew},
      {"slew_lower_bound", opt.lower_bound},
      {"max_slew_above_bound", opt.optimized_slew >= opt.lower_bound},
      {"baseline_max_abs_omega_sq", opt.baseline_max_omega_sq},
      {"optimized_max_abs_omega_sq", opt.optimized_max_omega_sq},
      {"boundary_max_residual", boundary.max()},
      {"fidelity", fid},
      {"fidelity_state", probe.state == StateKind::Thermal ? "thermal" : "coherent"},
      {"iterations", opt.iterations},
      {"converged", opt.converged},
      {"warning", opt.warning},
  };
  write_json(dir / "optimize_report.json", result.report);
  result.files = {dir / "optimize_report.json", dir / "omega_sq.csv"};

  if (opt.warning) note(options, result, "warning: optimizer stopped at the iteration limit; best-so-far reported");
  if (options.assert_mode) {
    if (!(opt.optimized_slew >= opt.lower_bound)) fail(options, result, kExitPhysics, "max slew below the lower bound");
    if (!(fid >= kFidelityThreshold)) fail(options, result, kExitPhysics, "fidelity " + format_number(fid) + " < 0.999");
    if (!(boundary.max() < 1e-12)) fail(options, result, kExitNumerical, "boundary residual >= 1e-12");
    if (opt.warning) fail(options, result, kExitNumerical, "optimizer did not converge");
  }
  return result;
}

CommandResult cmd_simulate(const RunConfig& config, const CommandOptions& options) {
  CommandResult result;
  const auto dir = prepare_dir(options);
  const TrapPair pair = config.pair();
  SequenceSpec spec{make_protocol(config),
                    angular_from_hz(config.sim.rf_hz),
                    angular_from_hz(config.sim.fz_hz),
                    pair.mass,
                    config.sim.settle_before_s,
                    config.sim.settle_after_s,
                    SwitchSettings{config.sim.switch_phase, config.sim.ramp_cycles},
                    config.sim.keep_static_axial};
  EnsembleOptions eo;
  eo.members = config.sim.ensemble;
  eo.amplitude = config.sim.amplitude_m;
  eo.ellipticity = config.sim.ellipticity;
  eo.z0 = config.sim.z0_m;
  eo.threads = options.threads;
  eo.sim.dt_scale = config.sim.dt_scale * options.dt_scale;
  eo.sim.escape_radius = config.sim.escape_radius;
  eo.sim.sample_stride = config.sim.sample_stride;
  const auto ens = run_ensemble(spec, eo);
  for (const auto& w : ens.warnings) note(options, result, "warning: " + w);

  if (ens.first_trajectory) {
    CsvTable table{{"t", "x", "y", "z", "vx", "vy", "vz"}, std::vector<std::vector<double>>(7)};
    for (const auto& s : ens.first_trajectory->samples) {
      table.columns[0].push_back(s.t);
      for (int d = 0; d < 3; ++d) {
        table.columns[1 + d].push_back(s.r[d]);
        table.columns[4 + d].push_back(s.v[d]);
      }
    }
    write_csv(dir / "trajectory.csv", table);
    result.files.push_back(dir / "trajectory.csv");
  }

  auto members = nlohmann::json::array();
  for (std::size_t k = 0; k < ens.members.size(); ++k) {
    const auto& m = ens.members[k];
    members.push_back({{"secular_phase_rad", std::numbers::pi * static_cast<double>(k) /
                                                 static_cast<double>(ens.members.size())},
                       {"lost", m.lost},
                       {"invariant_before_Js", m.invariant_before},
                       {"invariant_after_Js", m.invariant_after},
                       {"invariant_ratio", m.invariant_ratio},
                       {"tilt_deg", m.tilt_deg}});
  }
  const RfPhase probe{1.0, spec.protocol.metadata().omega0, spec.rf, spec.axial};
  result.report = {
      {"kind", to_string(spec.protocol.kind())},
      {"tf_s", spec.protocol.tf()},
      {"rf_hz", config.sim.rf_hz},
      {"fz_hz", config.sim.fz_hz},
      {"mathieu_q_initial", probe.mathieu_q()},
      {"lost", ens.any_lost},
      {"invariant_ratio_mean", ens.mean_ratio},
      {"tilt_deg_rms", ens.rms_tilt_deg},
      {"tilt_deg_max", ens.max_tilt_deg},
      {"ensemble", members},
      {"warnings", ens.warnings},
  };
  write_json(dir / "sim_report.json", result.report);
  result.files.push_back(dir / "sim_report.json");

  if (ens.any_lost) {
    note(options, result, "ion lost: |r| exceeded the escape radius");
    result.exit_code = kExitPhysics;
  }
  if (options.assert_mode && spec.protocol.kind() == ProtocolKind::Shortcut && !ens.any_lost) {
    if (!(std::abs(ens.mean_ratio - 1.0) <= 0.05)) {
      fail(options, result, kExitPhysics, "invariant ratio " + format_number(ens.mean_ratio) + " outside 1 +/- 0.05");
    }
    if (!(ens.rms_tilt_deg < 5.0)) {
      fail(options, result, kExitPhysics, "ellipse tilt " + format_number(ens.rms_tilt_deg) + " deg >= 5 deg");
    }
  }
  return result;
}

CommandResult cmd_cycle_report(const RunConfig& config, const CommandOptions& options) {
  CommandResult result;
  if (config.state != StateKind::Thermal) {
    throw ConfigError("invalid configuration:\n  $.state.thermal: cycle-report needs a thermal initial state");
  }
  if (!config.cold_temperature_K) throw ConfigError("invalid configuration:\n  $.cycle.T_cold_K: required for cycle-report");
  const auto dir = prepare_dir(options);
  const TrapPair pair = config.pair();
  const double t_hot = config.temperature_K;
  const double t_cold = *config.cold_temperature_K;
  const double t_after_expansion = t_hot * pair.omegaf / pair.omega0;
  const double t_after_compression = t_cold * pair.omega0 / pair.omegaf;

  // Two radial modes per stroke.
  auto energy = [&pair](double omega, double temperature) {
    return 2.0 * mean_energy(thermal_state(omega, temperature, pair.mass), omega);
  };
  const double e1 = energy(pair.omega0, t_hot);
  const double e2 = energy(pair.omegaf, t_after_expansion);
  const double e3 = energy(pair.omegaf, t_cold);
  const double e4 = energy(pair.omega0, t_after_compression);
  const double w_expansion = e2 - e1;
  const double q_cold = e3 - e2;
  const double w_compression = e4 - e3;
  const double q_hot = e1 - e4;
  const double w_net = w_expansion + w_compression;

  result.report = {
      {"modes", 2},
      {"T_hot_K", t_hot},
      {"T_cold_K", t_cold},
      {"T_after_expansion_K", t_after_expansion},
      {"T_after_compression_K", t_after_compression},
      {"occupancy_initial", thermal_occupancy(pair.omega0, t_hot)},
      {"strokes",
       {{{"name", "hot thermal state"}, {"omega_rad_s", pair.omega0}, {"energy_J", e1}},
        {{"name", "after expansion shortcut"}, {"omega_rad_s", pair.omegaf}, {"energy_J", e2}},
        {{"name", "after cold contact"}, {"omega_rad_s", pair.omegaf}, {"energy_J", e3}},
        {{"name", "after compression shortcut"}, {"omega_rad_s", pair.omega0}, {"energy_J", e4}}}},
      {"work_expansion_J", w_expansion},
      {"work_compression_J", w_compression},
      {"work_net_J", w_net},
      {"Q_cold_J", q_cold},
      {"Q_hot_J", q_hot},
      {"first_law_residual_J", w_net + q_cold + q_hot},
      {"cop_cooling", w_net > 0.0 ? nlohmann::json(q_cold / w_net) : nlohmann::json(nullptr)},
  };
  write_json(dir / "cycle.json", result.report);
  result.files = {dir / "cycle.json"};
  return result;
}

const std::vector<std::string>& command_names() {
  static const std::vector<std::string> names{"design",   "propagate", "fidelity-sweep",
                                              "optimize", "simulate",  "cycle-report"};
  return names;
}

CommandResult run_command(std::string_view name, const RunConfig& config, const CommandOptions& options) {
  if (name == "design") return cmd_design(config, options);
  if (name == "propagate") return cmd_propagate(config, options);
  if (name == "fidelity-sweep") return cmd_fidelity_sweep(config, options);
  if (name == "optimize") return cmd_optimize(config, options);
  if (name == "simulate") return cmd_simulate(config, options);
  if (name == "cycle-report") return cmd_cycle_report(config, options);
  throw ConfigError("unknown command '" + std::string(name) + "'");
}

}  // namespace sta::cli

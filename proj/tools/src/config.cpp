#include "config.hpp"

#include <fstream>
#include <sstream>

#include "schema.hpp"
#include "sta/errors.hpp"

namespace sta::cli {

namespace {

template <typename T>
void read_if(const nlohmann::json& obj, const char* key, T& target) {
  if (obj.contains(key)) target = obj.at(key).get<T>();
}

}  // namespace

TrapPair RunConfig::pair(double tf) const { return TrapPair::from_hz(f0_hz, ff_hz, tf, mass_amu); }

RunConfig parse_config(const nlohmann::json& doc) {
  const auto issues = validate_schema(run_config_schema(), doc);
  if (!issues.empty()) {
    std::ostringstream msg;
    msg << "invalid configuration:";
    for (const auto& issue : issues) msg << "\n  " << issue.path << ": " << issue.message;
    throw ConfigError(msg.str());
  }

  RunConfig c;
  const auto& trap = doc.at("trap");
  c.f0_hz = trap.at("f0_hz").get<double>();
  c.ff_hz = trap.at("ff_hz").get<double>();
  c.tf_s = trap.at("tf_s").get<double>();
  c.mass_amu = trap.at("mass_amu").get<double>();

  if (doc.contains("protocol")) {
    const auto& p = doc.at("protocol");
    if (p.contains("kind")) c.kind = protocol_kind_from_string(p.at("kind").get<std::string>());
    if (p.contains("smooth")) {
      const auto& s = p.at("smooth");
      if (s.contains("gamma_rate")) c.smooth_rate = s.at("gamma_rate").get<double>();
      if (s.contains("t0")) c.smooth_t0 = s.at("t0").get<double>();
    }
    if (p.contains("extra_coeffs")) {
      for (const auto& e : p.at("extra_coeffs")) {
        c.extra.push_back({static_cast<int>(e.at("index").get<double>()), e.at("value").get<double>()});
      }
    }
    if (p.contains("grid_points")) c.protocol_grid_points = p.at("grid_points").get<std::size_t>();
  }

  if (doc.contains("state")) {
    const auto& s = doc.at("state");
    if (s.contains("thermal")) {
      c.state = StateKind::Thermal;
      c.temperature_K = s.at("thermal").at("T_K").get<double>();
    } else {
      c.state = StateKind::Coherent;
      c.alpha = {s.at("coherent").at("re").get<double>(), s.at("coherent").at("im").get<double>()};
    }
  }

  if (doc.contains("sim")) {
    const auto& s = doc.at("sim");
    read_if(s, "rf_hz", c.sim.rf_hz);
    read_if(s, "fz_hz", c.sim.fz_hz);
    if (s.contains("dt")) read_if(s.at("dt"), "scale", c.sim.dt_scale);
    read_if(s, "escape_radius", c.sim.escape_radius);
    read_if(s, "ramp_cycles", c.sim.ramp_cycles);
    read_if(s, "switch_phase", c.sim.switch_phase);
    read_if(s, "keep_static_axial", c.sim.keep_static_axial);
    read_if(s, "settle_before_s", c.sim.settle_before_s);
    read_if(s, "settle_after_s", c.sim.settle_after_s);
    read_if(s, "amplitude_m", c.sim.amplitude_m);
    read_if(s, "ellipticity", c.sim.ellipticity);
    read_if(s, "z0_m", c.sim.z0_m);
    read_if(s, "ensemble", c.sim.ensemble);
    read_if(s, "sample_stride", c.sim.sample_stride);
  }

  if (doc.contains("sweep")) {
    const auto& s = doc.at("sweep");
    c.tf_list = s.at("tf_list").get<std::vector<double>>();
    if (s.contains("protocols")) {
      c.sweep_protocols.clear();
      for (const auto& name : s.at("protocols")) c.sweep_protocols.push_back(protocol_kind_from_string(name.get<std::string>()));
    }
  }

  if (doc.contains("optimize")) {
    const auto& o = doc.at("optimize");
    read_if(o, "n_extra", c.optimize.n_extra);
    read_if(o, "grid_points", c.optimize.grid_points);
    read_if(o, "final_points", c.optimize.final_points);
    read_if(o, "softmax_power", c.optimize.softmax_power);
    read_if(o, "max_iterations", c.optimize.max_iterations);
  }

  if (doc.contains("cycle")) c.cold_temperature_K = doc.at("cycle").at("T_cold_K").get<double>();

  if (doc.contains("output")) {
    const auto& o = doc.at("output");
    read_if(o, "dir", c.output_dir);
    read_if(o, "grid_points", c.output_grid_points);
  }

  // Semantic checks the schema cannot express.
  (void)c.pair();
  for (std::size_t i = 0; i < c.extra.size(); ++i) {
    for (std::size_t j = i + 1; j < c.extra.size(); ++j) {
      if (c.extra[i].index == c.extra[j].index) {
        throw ConfigError("invalid configuration:\n  $.protocol.extra_coeffs: duplicate index " +
                          std::to_string(c.extra[i].index));
      }
    }
  }
  if (!c.extra.empty() && c.kind != ProtocolKind::Shortcut) {
    throw ConfigError("invalid configuration:\n  $.protocol.extra_coeffs: only valid for kind \"shortcut\"");
  }
  return c;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("config file " + path.string() + " is not valid JSON: " + e.what());
  }
  return parse_config(doc);
}

Protocol make_protocol(const RunConfig& config, ProtocolKind kind, double tf) {
  const TrapPair pair = config.pair(tf);
  std::optional<Protocol> p;
  switch (kind) {
    case ProtocolKind::Shortcut:
      p = config.extra.empty() ? minimal_shortcut(pair) : Protocol::shortcut(pair, b_extended(pair, config.extra));
      break;
    case ProtocolKind::Linear:
      p = Protocol::linear(pair);
      break;
    case ProtocolKind::Smooth: {
      SmoothRamp ramp = SmoothRamp::defaults(pair);
      // Explicit values are absolute; the defaults track tf.
      if (config.smooth_rate) ramp.rate = *config.smooth_rate;
      if (config.smooth_t0) ramp.t0 = *config.smooth_t0;
      p = Protocol::smooth(pair, ramp);
      break;
    }
    case ProtocolKind::Constant:
      p = Protocol::constant(pair.omega0, tf);
      break;
  }
  if (config.protocol_grid_points > 0) return p->resampled(config.protocol_grid_points);
  return *p;
}

Protocol make_protocol(const RunConfig& config) { return make_protocol(config, config.kind, config.tf_s); }

}  // namespace sta::cli

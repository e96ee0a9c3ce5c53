#pragma once

#include <complex>
#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "sta/protocol.hpp"

namespace sta::cli {

enum class StateKind { None, Thermal, Coherent };

struct SimSettings {
  double rf_hz = 100e6;
  double fz_hz = 100e3;
  double dt_scale = 1.0;
  double escape_radius = 100e-6;
  double ramp_cycles = 0.0;
  double switch_phase = 0.0;
  bool keep_static_axial = false;
  double settle_before_s = 2e-6;
  double settle_after_s = 6e-6;
  double amplitude_m = 0.0;  // 0: thermal rms radius at 2 mK and f0
  double ellipticity = 0.5;
  double z0_m = 0.0;
  std::size_t ensemble = 8;
  std::size_t sample_stride = 16;
};

struct OptimizeSettings {
  std::size_t n_extra = 1;
  std::size_t grid_points = 4001;
  std::size_t final_points = 16001;
  double softmax_power = 16.0;
  int max_iterations = 400;
};

/// Parsed and validated run configuration. Frequencies stay in Hz here and
/// are converted to angular units when protocols are built.
struct RunConfig {
  double f0_hz = 0.0;
  double ff_hz = 0.0;
  double tf_s = 0.0;
  double mass_amu = 0.0;

  ProtocolKind kind = ProtocolKind::Shortcut;
  std::optional<double> smooth_rate;
  std::optional<double> smooth_t0;
  std::vector<ExtraCoefficient> extra;
  /// > 0: resample the schedule on this many points.
  std::size_t protocol_grid_points = 0;

  StateKind state = StateKind::None;
  double temperature_K = 0.0;
  std::complex<double> alpha{};

  SimSettings sim;
  std::vector<double> tf_list;
  std::vector<ProtocolKind> sweep_protocols{ProtocolKind::Shortcut, ProtocolKind::Linear, ProtocolKind::Smooth};
  OptimizeSettings optimize;
  std::optional<double> cold_temperature_K;

  std::string output_dir = ".";
  std::size_t output_grid_points = 4001;

  /// Trap pair for this configuration with a different duration.
  TrapPair pair(double tf) const;
  TrapPair pair() const { return pair(tf_s); }
};

/// Validates against the embedded schema, then converts. Throws ConfigError
/// listing every violation with its field path.
RunConfig parse_config(const nlohmann::json& document);
RunConfig load_config(const std::filesystem::path& path);

/// Protocol of the given kind for duration tf. Constant protocols hold f0.
Protocol make_protocol(const RunConfig& config, ProtocolKind kind, double tf);
Protocol make_protocol(const RunConfig& config);

}  // namespace sta::cli

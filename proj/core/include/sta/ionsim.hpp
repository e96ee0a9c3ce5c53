#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "sta/protocol.hpp"

namespace sta {

using Vec3 = std::array<double, 3>;

/// Classical point charge: position (m), velocity (m/s), time (s).
struct IonState {
  Vec3 r{};
  Vec3 v{};
  double t = 0.0;
};

/// RF drive on. Radial secular frequency from the lowest-order Mathieu relation
/// q = 2 sqrt(2) secular / rf; static end caps supply the axial frequency.
struct RfPhase {
  double duration = 0.0;  // s
  double secular = 0.0;   // rad/s
  double rf = 0.0;        // rad/s
  double axial = 0.0;     // rad/s

  double mathieu_q() const;
  double rf_period() const;
};

/// RF drive off; DC electrodes supply the radial curvature omega^2(t) of the
/// protocol and, through Laplace's equation, the axial curvature -2 omega^2(t).
struct ShortcutPhase {
  Protocol protocol;
  /// Static end-cap frequency kept energized on top of the control when set.
  double axial = 0.0;
  bool keep_static_axial = false;
};

/// Curvature coefficients k_i of a_i = -k_i x_i (1/s^2).
struct Curvatures {
  Vec3 total{};
  /// DC part only; its components sum to zero (Laplace).
  Vec3 dc{};
};

struct SwitchSettings {
  /// RF phase at every switch instant (0: cos = +1).
  double rf_phase = 0.0;
  /// Length of the linear RF amplitude ramp at each switch, in RF periods.
  /// While the amplitude is scaled by lambda, a DC radial curvature
  /// (1 - lambda^2) secular^2 keeps the mean confinement. 0: instantaneous.
  double ramp_cycles = 0.0;
};

class ControlSequence {
 public:
  using Phase = std::variant<RfPhase, ShortcutPhase>;

  /// Validates phase durations and frequencies and the curvature handoffs
  /// between RF phases and shortcut phases (relative mismatch of omega^2
  /// within max(1e-6, protocol endpoint tolerance)); throws ConfigError.
  ControlSequence(std::vector<Phase> phases, SwitchSettings switching = {});

  const std::vector<Phase>& phases() const { return phases_; }
  const SwitchSettings& switching() const { return switching_; }
  std::size_t size() const { return phases_.size(); }
  double start(std::size_t i) const { return starts_[i]; }
  double end(std::size_t i) const { return starts_[i + 1]; }
  double duration() const { return starts_.back(); }
  /// Phase containing t; boundaries belong to the later phase, except the final time.
  std::size_t phase_index(double t) const;
  /// Shortest RF period over all RF phases (0 if there are none).
  double min_rf_period() const;

  /// Curvatures of phase i at time t (t is clamped to the phase's span).
  Curvatures curvatures(std::size_t i, double t) const;
  Vec3 acceleration(std::size_t i, const Vec3& r, double t) const;

  /// Soft problems: shortcut phases not longer than a neighbouring RF period.
  std::vector<std::string> warnings() const;

 private:
  std::vector<Phase> phases_;
  SwitchSettings switching_;
  std::vector<double> starts_;
};

/// Acceleration at the state's time and position.
Vec3 acceleration(const IonState& state, const ControlSequence& sequence);

/// One velocity-Verlet step inside phase `phase` (forces at t and t + dt).
IonState velocity_verlet_step(const IonState& state, const ControlSequence& sequence, std::size_t phase, double dt);
/// Same, with the phase taken from state.t.
IonState velocity_verlet_step(const IonState& state, const ControlSequence& sequence, double dt);

struct SimulationOptions {
  /// Multiplies the default steps: T_RF / 256 in RF phases and
  /// min(T_RF / 256, duration / 4000) in shortcut phases.
  double dt_scale = 1.0;
  double escape_radius = 100e-6;  // m
  /// Keep every n-th step (phase boundaries are always kept).
  std::size_t sample_stride = 1;
};

struct Trajectory {
  std::vector<IonState> samples;
  bool lost = false;
  double lost_at = 0.0;
  /// Steps actually used in each phase.
  std::vector<double> phase_steps;
};

/// Integrates the whole sequence phase by phase with an exact landing on every
/// phase boundary. Stops early with lost = true once |r| > escape radius.
Trajectory simulate(const ControlSequence& sequence, const IonState& initial, const SimulationOptions& options = {});

/// Mean secular energy over [t_begin, t_end] divided by omega (J s), using the
/// x and y motion after a one-RF-period moving average. The average's
/// attenuation of the secular motion, sinc(omega T_RF / 2), is divided out.
/// Needs >= 3 secular periods plus one RF period of uniformly spaced samples;
/// throws ConfigError otherwise.
double secular_invariant(const Trajectory& trajectory, double t_begin, double t_end, double omega,
                         double rf_period, double mass);

struct EllipseFit {
  double semi_major = 0.0;
  double semi_minor = 0.0;
  /// Angle of the major axis from the first coordinate axis, in (-pi/2, pi/2].
  /// Reported as 0 when the axes agree to 1e-3 relative.
  double angle = 0.0;
  std::array<double, 2> centre{};
};

/// Least-squares conic A u^2 + B u w + C w^2 + D u + E w = 1. Throws
/// NumericalError for degenerate (collinear or non-elliptic) samples.
EllipseFit ellipse_fit(std::span<const double> u, std::span<const double> w);

/// Secular (RF-averaged) x and y samples over a window, as used for the fits.
struct SecularSamples {
  std::vector<double> t, x, y, vx, vy;
};
SecularSamples secular_samples(const Trajectory& trajectory, double t_begin, double t_end, double rf_period);

/// RF-on / shortcut / RF-on experiment with its derived metrics.
struct SequenceSpec {
  Protocol protocol;
  double rf = 0.0;     // rad/s
  double axial = 0.0;  // rad/s
  double mass = 0.0;   // kg
  double settle_before = 0.0;  // s, rounded up to whole RF periods
  double settle_after = 0.0;   // s, rounded up to whole RF periods
  SwitchSettings switching{};
  bool keep_static_axial = false;
};

ControlSequence build_sequence(const SequenceSpec& spec);

/// Ion start state for secular phase phi: x = A cos phi, y = e A sin phi with
/// the matching secular velocities at omega0, dressed with the lowest-order
/// micromotion of the RF phase at t = 0. Axial offset z0 at rest.
IonState secular_initial_state(const SequenceSpec& spec, double amplitude, double ellipticity, double z0,
                               double phi);

struct RunMetrics {
  bool lost = false;
  double invariant_before = 0.0;  // E / omega0 (J s)
  double invariant_after = 0.0;   // E / omegaf (J s)
  double invariant_ratio = 0.0;
  /// Rotation of the x-y secular ellipse's major axis, folded into [0, 90] degrees.
  double tilt_deg = 0.0;
  EllipseFit ellipse_before;
  EllipseFit ellipse_after;
};

RunMetrics analyze_run(const Trajectory& trajectory, const ControlSequence& sequence, const SequenceSpec& spec);

struct EnsembleOptions {
  std::size_t members = 8;      // secular phases k pi / members
  double amplitude = 0.0;       // m; 0: thermal rms radius at 2 mK
  double ellipticity = 0.5;     // y / x secular amplitude
  double z0 = 0.0;              // m
  unsigned threads = 1;
  SimulationOptions sim{};
  /// Keep the full trajectory of member 0.
  bool keep_first_trajectory = true;
};

struct EnsembleResult {
  std::vector<RunMetrics> members;
  bool any_lost = false;
  double mean_ratio = 0.0;
  double rms_tilt_deg = 0.0;
  double max_tilt_deg = 0.0;
  std::optional<Trajectory> first_trajectory;
  std::vector<std::string> warnings;
};

EnsembleResult run_ensemble(const SequenceSpec& spec, const EnsembleOptions& options);

/// Thermal rms radius sqrt(k_B T / (m omega^2)).
double thermal_rms_radius(double omega, double temperature, double mass);

}  // namespace sta

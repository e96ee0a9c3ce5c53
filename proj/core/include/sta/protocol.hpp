#pragma once

#include <array>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

namespace sta {

/// Initial and final trap frequencies of one radial mode, the protocol
/// duration and the particle mass. All quantities SI, frequencies angular.
struct TrapPair {
  double omega0 = 0.0;  // rad/s
  double omegaf = 0.0;  // rad/s
  double tf = 0.0;      // s
  double mass = 0.0;    // kg

  /// Validating constructor; throws ConfigError unless every field is > 0.
  static TrapPair make(double omega0, double omegaf, double tf, double mass);
  /// Same, from ordinary frequencies in Hz and a mass in atomic mass units.
  static TrapPair from_hz(double f0_hz, double ff_hz, double tf_s, double mass_amu);

  /// Expansion ratio (omega0 / omegaf)^(1/2).
  double gamma() const;
  /// The pair with omega0 and omegaf exchanged (compression <-> expansion).
  TrapPair reversed() const;
};

double gamma(const TrapPair& pair);

/// Polynomial scaling function b(t) = sum_i a_i s^i in the reduced time
/// s = t / tf, with exact derivatives in physical time.
class ScalingFunction {
 public:
  struct Derivatives {
    double b = 0.0;
    double db = 0.0;   // 1/s
    double d2b = 0.0;  // 1/s^2
    double d3b = 0.0;  // 1/s^3
  };

  /// Throws NumericalError when b(t) <= 0 somewhere on a dense grid over [0, tf].
  ScalingFunction(std::vector<double> coefficients, double tf);

  Derivatives at(double t) const;
  double value(double t) const { return at(t).b; }

  std::span<const double> coefficients() const { return coefficients_; }
  double tf() const { return tf_; }

 private:
  std::vector<double> coefficients_;
  double tf_;
};

/// Fixed higher-order term a_k s^k (k >= 6) of an extended scaling function.
struct ExtraCoefficient {
  int index = 6;
  double value = 0.0;
};

/// Degree-5 polynomial satisfying the six frictionless boundary conditions.
ScalingFunction b_minimal(const TrapPair& pair);

/// Polynomial with caller-fixed terms a_k s^k; a_0..a_5 are re-solved so the
/// six boundary conditions still hold. Throws ConfigError on bad indices.
ScalingFunction b_extended(const TrapPair& pair, std::span<const ExtraCoefficient> extra);

/// Normalized residuals of the six boundary conditions, in the order
/// b(0)-1, b'(0), b''(0), b(tf)-gamma, b'(tf), b''(tf). Derivatives are
/// scaled by gamma/tf and gamma/tf^2, the end value by gamma.
struct BoundaryResiduals {
  std::array<double, 6> values{};
  double max() const;
};

BoundaryResiduals verify_boundary(const ScalingFunction& b, const TrapPair& pair);

/// omega^2(t) = omega0^2 / b^4 - b'' / b. May be negative. Throws
/// NumericalError if b(t) <= 0.
double omega_sq_shortcut(const ScalingFunction& b, const TrapPair& pair, double t);

/// Analytic time derivative of omega_sq_shortcut:
/// -4 omega0^2 b' / b^5 - b''' / b + b'' b' / b^2.
double omega_sq_shortcut_rate(const ScalingFunction& b, const TrapPair& pair, double t);

/// Straight-line interpolation of omega^2 between omega0^2 and omegaf^2.
double omega_linear(const TrapPair& pair, double t);

/// Default smooth-ramp shape: centre at tf/2 and a rate that puts 99 % of the
/// swing inside [0, tf].
struct SmoothRamp {
  double rate = 0.0;  // 1/s
  double t0 = 0.0;    // s

  static SmoothRamp defaults(const TrapPair& pair);
};

/// Square of the logistic interpolation
/// omega(t) = (omega0 e^{rate t0} + omegaf e^{rate t}) / (e^{rate t0} + e^{rate t}),
/// evaluated without overflow for large rate * t.
double omega_smooth(const TrapPair& pair, double rate, double t0, double t);

/// Axial DC curvature that the end caps must supply so that Laplace's
/// equation yields the requested radial curvature: -2 * omega_sq_radial.
constexpr double dc_axial_curvature(double omega_sq_radial) { return -2.0 * omega_sq_radial; }
constexpr double radial_from_axial_curvature(double axial) { return -0.5 * axial; }

enum class ProtocolKind { Shortcut, Linear, Smooth, Constant };

std::string_view to_string(ProtocolKind kind);
/// Throws ConfigError for unknown names.
ProtocolKind protocol_kind_from_string(std::string_view name);

/// Parameters a protocol was built from; carried along for reports.
struct ProtocolMetadata {
  double omega0 = 0.0;
  double omegaf = 0.0;
  double tf = 0.0;
  /// Relative endpoint tolerance of omega^2 (smooth ramps miss their
  /// endpoints by design; see SmoothRamp::defaults).
  double endpoint_tolerance = 1e-9;
  std::optional<SmoothRamp> smooth;
  std::vector<ExtraCoefficient> extra;
  bool sampled = false;
};

/// A curvature schedule omega^2(t) on [0, tf], closed-form or sampled.
/// Immutable and cheap to copy.
class Protocol {
 public:
  using Schedule = std::function<double(double)>;

  static Protocol shortcut(const TrapPair& pair, const ScalingFunction& b);
  static Protocol linear(const TrapPair& pair);
  static Protocol smooth(const TrapPair& pair);
  static Protocol smooth(const TrapPair& pair, const SmoothRamp& ramp);
  static Protocol constant(double omega, double duration);

  /// Uniformly sampled schedule (samples at t_i = i tf / (n-1)) with cubic
  /// interpolation between grid points. Needs at least 4 samples.
  static Protocol sampled(ProtocolKind kind, std::vector<double> omega_sq_samples, double tf,
                          ProtocolMetadata metadata = {});

  ProtocolKind kind() const { return kind_; }
  double tf() const { return tf_; }
  const ProtocolMetadata& metadata() const { return metadata_; }
  /// Scaling function of a shortcut protocol; empty for the other kinds.
  const std::optional<ScalingFunction>& scaling() const { return scaling_; }

  double omega_sq(double t) const { return omega_sq_(t); }
  /// d(omega^2)/dt; analytic where a closed form exists.
  double omega_sq_rate(double t) const { return rate_(t); }

  /// Sampled copy of this protocol on a uniform grid (default 4001 points).
  Protocol resampled(std::size_t points = 4001) const;

  /// Values of omega^2 on a uniform grid of `points` points over [0, tf].
  std::vector<double> grid_values(std::size_t points) const;

 private:
  Protocol(ProtocolKind kind, double tf, Schedule omega_sq, Schedule rate, ProtocolMetadata metadata,
           std::optional<ScalingFunction> scaling);

  ProtocolKind kind_;
  double tf_;
  Schedule omega_sq_;
  Schedule rate_;
  ProtocolMetadata metadata_;
  std::optional<ScalingFunction> scaling_;
};

/// Convenience: shortcut protocol from b_minimal.
Protocol minimal_shortcut(const TrapPair& pair);

/// sqrt(2) * d(omega)/dt / (8 omega^2) with omega the sign-preserving square
/// root of omega^2 and d(omega)/dt from centred finite differences of the
/// schedule. Returns +/- infinity exactly at a zero of omega^2.
double adiabaticity_parameter(const Protocol& protocol, double t);

/// Smallest value of omega^2 on a uniform grid over [0, tf].
double min_omega_sq(const Protocol& protocol, std::size_t points = 4001);

}  // namespace sta

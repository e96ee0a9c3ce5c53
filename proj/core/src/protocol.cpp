#include "sta/protocol.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>
#include <string>

#include "sta/constants.hpp"
#include "sta/errors.hpp"

namespace sta {

namespace {

constexpr std::size_t kPositivityGrid = 4001;

void require_positive(double value, const char* name) {
  if (!(value > 0.0) || !std::isfinite(value)) {
    std::ostringstream msg;
    msg << "trap parameter '" << name << "' must be finite and > 0 (got " << value << ")";
    throw ConfigError(msg.str());
  }
}

// Derivatives of sum_i c_i s^i with respect to s, up to third order.
std::array<double, 4> poly_derivatives(std::span<const double> c, double s) {
  double p0 = 0.0, p1 = 0.0, p2 = 0.0, p3 = 0.0;
  // Horner on each derivative polynomial.
  for (std::size_t k = c.size(); k-- > 0;) {
    const double i = static_cast<double>(k);
    p0 = p0 * s + c[k];
    if (k >= 1) p1 = p1 * s + i * c[k];
    if (k >= 2) p2 = p2 * s + i * (i - 1.0) * c[k];
    if (k >= 3) p3 = p3 * s + i * (i - 1.0) * (i - 2.0) * c[k];
  }
  return {p0, p1, p2, p3};
}

double logistic_weight(double x) {
  // 1 / (1 + e^x) without overflow.
  if (x > 0.0) {
    const double e = std::exp(-x);
    return e / (1.0 + e);
  }
  return 1.0 / (1.0 + std::exp(x));
}

// Catmull-Rom cubic on a uniform grid; ghost points extrapolated linearly.
struct CubicGrid {
  std::vector<double> y;
  double tf;

  double step() const { return tf / static_cast<double>(y.size() - 1); }

  double sample(std::ptrdiff_t i) const {
    const auto n = static_cast<std::ptrdiff_t>(y.size());
    if (i < 0) return 2.0 * y[0] - y[1];
    if (i >= n) return 2.0 * y[n - 1] - y[n - 2];
    return y[static_cast<std::size_t>(i)];
  }

  // Returns (value, d/dt).
  std::pair<double, double> eval(double t) const {
    const double h = step();
    const auto last = static_cast<std::ptrdiff_t>(y.size()) - 2;
    const double u = std::clamp(t, 0.0, tf) / h;
    const auto i = std::clamp(static_cast<std::ptrdiff_t>(std::floor(u)), std::ptrdiff_t{0}, last);
    const double x = u - static_cast<double>(i);
    const double p0 = sample(i - 1), p1 = sample(i), p2 = sample(i + 1), p3 = sample(i + 2);
    const double a = -0.5 * p0 + 1.5 * p1 - 1.5 * p2 + 0.5 * p3;
    const double b = p0 - 2.5 * p1 + 2.0 * p2 - 0.5 * p3;
    const double c = -0.5 * p0 + 0.5 * p2;
    const double value = ((a * x + b) * x + c) * x + p1;
    const double slope = ((3.0 * a * x + 2.0 * b) * x + c) / h;
    return {value, slope};
  }
};

}  // namespace

// ---------------------------------------------------------------------------
// TrapPair

TrapPair TrapPair::make(double omega0, double omegaf, double tf, double mass) {
  require_positive(omega0, "omega0");
  require_positive(omegaf, "omegaf");
  require_positive(tf, "tf");
  require_positive(mass, "mass");
  return TrapPair{omega0, omegaf, tf, mass};
}

TrapPair TrapPair::from_hz(double f0_hz, double ff_hz, double tf_s, double mass_amu) {
  return make(angular_from_hz(f0_hz), angular_from_hz(ff_hz), tf_s, kg_from_amu(mass_amu));
}

double TrapPair::gamma() const { return std::sqrt(omega0 / omegaf); }

TrapPair TrapPair::reversed() const { return TrapPair{omegaf, omega0, tf, mass}; }

double gamma(const TrapPair& pair) { return pair.gamma(); }

// ---------------------------------------------------------------------------
// ScalingFunction

ScalingFunction::ScalingFunction(std::vector<double> coefficients, double tf)
    : coefficients_(std::move(coefficients)), tf_(tf) {
  if (coefficients_.empty()) throw ConfigError("scaling function needs at least one coefficient");
  require_positive(tf_, "tf");
  for (std::size_t i = 0; i < kPositivityGrid; ++i) {
    const double s = static_cast<double>(i) / static_cast<double>(kPositivityGrid - 1);
    const double b = poly_derivatives(coefficients_, s)[0];
    if (!(b > 0.0)) {
      std::ostringstream msg;
      msg << "degenerate ansatz: b(t) = " << b << " <= 0 at s = " << s;
      throw NumericalError(msg.str());
    }
  }
}

ScalingFunction::Derivatives ScalingFunction::at(double t) const {
  const auto d = poly_derivatives(coefficients_, t / tf_);
  const double inv = 1.0 / tf_;
  return {d[0], d[1] * inv, d[2] * inv * inv, d[3] * inv * inv * inv};
}

ScalingFunction b_minimal(const TrapPair& pair) {
  const double g1 = pair.gamma() - 1.0;
  return ScalingFunction({1.0, 0.0, 0.0, 10.0 * g1, -15.0 * g1, 6.0 * g1}, pair.tf);
}

ScalingFunction b_extended(const TrapPair& pair, std::span<const ExtraCoefficient> extra) {
  std::set<int> seen;
  int degree = 5;
  for (const auto& e : extra) {
    if (e.index < 6) throw ConfigError("extra coefficient index must be >= 6");
    if (!seen.insert(e.index).second) throw ConfigError("extra coefficient indices must be distinct");
    if (!std::isfinite(e.value)) throw ConfigError("extra coefficient must be finite");
    degree = std::max(degree, e.index);
  }

  // Rows: b(0), b'(0), b''(0), b(1), b'(1), b''(1) in reduced time.
  Eigen::Matrix<double, 6, 6> A = Eigen::Matrix<double, 6, 6>::Zero();
  Eigen::Matrix<double, 6, 1> rhs;
  rhs << 1.0, 0.0, 0.0, pair.gamma(), 0.0, 0.0;
  A(0, 0) = 1.0;
  A(1, 1) = 1.0;
  A(2, 2) = 2.0;
  for (int i = 0; i < 6; ++i) {
    A(3, i) = 1.0;
    A(4, i) = i;
    A(5, i) = i * (i - 1.0);
  }
  for (const auto& e : extra) {
    const double k = e.index;
    rhs(3) -= e.value;
    rhs(4) -= k * e.value;
    rhs(5) -= k * (k - 1.0) * e.value;
  }
  const Eigen::FullPivLU<Eigen::Matrix<double, 6, 6>> lu(A);
  if (!lu.isInvertible()) throw NumericalError("boundary-condition system is singular");
  const Eigen::Matrix<double, 6, 1> a = lu.solve(rhs);

  std::vector<double> coefficients(static_cast<std::size_t>(degree) + 1, 0.0);
  for (int i = 0; i < 6; ++i) coefficients[static_cast<std::size_t>(i)] = a(i);
  for (const auto& e : extra) coefficients[static_cast<std::size_t>(e.index)] += e.value;
  return ScalingFunction(std::move(coefficients), pair.tf);
}

double BoundaryResiduals::max() const { return *std::max_element(values.begin(), values.end()); }

BoundaryResiduals verify_boundary(const ScalingFunction& b, const TrapPair& pair) {
  const double g = pair.gamma();
  const auto start = poly_derivatives(b.coefficients(), 0.0);
  const auto end = poly_derivatives(b.coefficients(), 1.0);
  // Reduced-time derivatives divided by gamma equal physical ones scaled by gamma/tf^k.
  return BoundaryResiduals{{std::abs(start[0] - 1.0), std::abs(start[1]) / g, std::abs(start[2]) / g,
                            std::abs(end[0] - g) / g, std::abs(end[1]) / g, std::abs(end[2]) / g}};
}

double omega_sq_shortcut(const ScalingFunction& b, const TrapPair& pair, double t) {
  const auto d = b.at(t);
  if (!(d.b > 0.0)) throw NumericalError("degenerate ansatz: b(t) <= 0");
  const double b2 = d.b * d.b;
  return pair.omega0 * pair.omega0 / (b2 * b2) - d.d2b / d.b;
}

double omega_sq_shortcut_rate(const ScalingFunction& b, const TrapPair& pair, double t) {
  const auto d = b.at(t);
  if (!(d.b > 0.0)) throw NumericalError("degenerate ansatz: b(t) <= 0");
  const double b2 = d.b * d.b;
  const double b5 = b2 * b2 * d.b;
  return -4.0 * pair.omega0 * pair.omega0 * d.db / b5 - d.d3b / d.b + d.d2b * d.db / b2;
}

double omega_linear(const TrapPair& pair, double t) {
  const double w0 = pair.omega0 * pair.omega0;
  const double wf = pair.omegaf * pair.omegaf;
  return w0 + (wf - w0) * t / pair.tf;
}

SmoothRamp SmoothRamp::defaults(const TrapPair& pair) {
  return SmoothRamp{2.0 * std::log(199.0) / pair.tf, 0.5 * pair.tf};
}

double omega_smooth(const TrapPair& pair, double rate, double t0, double t) {
  if (!(rate > 0.0)) throw ConfigError("smooth ramp rate must be > 0");
  const double w = logistic_weight(rate * (t - t0));
  const double omega = pair.omegaf + (pair.omega0 - pair.omegaf) * w;
  return omega * omega;
}

std::string_view to_string(ProtocolKind kind) {
  switch (kind) {
    case ProtocolKind::Shortcut: return "shortcut";
    case ProtocolKind::Linear: return "linear";
    case ProtocolKind::Smooth: return "smooth";
    case ProtocolKind::Constant: return "constant";
  }
  return "unknown";
}

ProtocolKind protocol_kind_from_string(std::string_view name) {
  if (name == "shortcut") return ProtocolKind::Shortcut;
  if (name == "linear") return ProtocolKind::Linear;
  if (name == "smooth") return ProtocolKind::Smooth;
  if (name == "constant") return ProtocolKind::Constant;
  throw ConfigError("unknown protocol kind '" + std::string(name) + "'");
}

// ---------------------------------------------------------------------------
// Protocol

Protocol::Protocol(ProtocolKind kind, double tf, Schedule omega_sq, Schedule rate, ProtocolMetadata metadata,
                   std::optional<ScalingFunction> scaling)
    : kind_(kind),
      tf_(tf),
      omega_sq_(std::move(omega_sq)),
      rate_(std::move(rate)),
      metadata_(std::move(metadata)),
      scaling_(std::move(scaling)) {}

Protocol Protocol::shortcut(const TrapPair& pair, const ScalingFunction& b) {
  ProtocolMetadata meta{pair.omega0, pair.omegaf, pair.tf, 1e-9, std::nullopt, {}, false};
  const auto coeffs = b.coefficients();
  for (std::size_t k = 6; k < coeffs.size(); ++k) {
    if (coeffs[k] != 0.0) meta.extra.push_back({static_cast<int>(k), coeffs[k]});
  }
  return Protocol(
      ProtocolKind::Shortcut, pair.tf, [b, pair](double t) { return omega_sq_shortcut(b, pair, t); },
      [b, pair](double t) { return omega_sq_shortcut_rate(b, pair, t); }, std::move(meta), b);
}

Protocol Protocol::linear(const TrapPair& pair) {
  const double slope = (pair.omegaf * pair.omegaf - pair.omega0 * pair.omega0) / pair.tf;
  return Protocol(
      ProtocolKind::Linear, pair.tf, [pair](double t) { return omega_linear(pair, t); },
      [slope](double) { return slope; }, ProtocolMetadata{pair.omega0, pair.omegaf, pair.tf, 1e-9, {}, {}, false},
      std::nullopt);
}

Protocol Protocol::smooth(const TrapPair& pair) { return smooth(pair, SmoothRamp::defaults(pair)); }

Protocol Protocol::smooth(const TrapPair& pair, const SmoothRamp& ramp) {
  if (!(ramp.rate > 0.0)) throw ConfigError("smooth ramp rate must be > 0");
  const double w0 = pair.omega0 * pair.omega0;
  const double wf = pair.omegaf * pair.omegaf;
  const double tolerance =
      std::max(std::abs(omega_smooth(pair, ramp.rate, ramp.t0, 0.0) / w0 - 1.0),
               std::abs(omega_smooth(pair, ramp.rate, ramp.t0, pair.tf) / wf - 1.0)) *
          (1.0 + 1e-9) +
      1e-12;
  auto rate = [pair, ramp](double t) {
    const double w = logistic_weight(ramp.rate * (t - ramp.t0));
    const double omega = pair.omegaf + (pair.omega0 - pair.omegaf) * w;
    const double domega = -(pair.omega0 - pair.omegaf) * ramp.rate * w * (1.0 - w);
    return 2.0 * omega * domega;
  };
  return Protocol(
      ProtocolKind::Smooth, pair.tf, [pair, ramp](double t) { return omega_smooth(pair, ramp.rate, ramp.t0, t); },
      rate, ProtocolMetadata{pair.omega0, pair.omegaf, pair.tf, tolerance, ramp, {}, false}, std::nullopt);
}

Protocol Protocol::constant(double omega, double duration) {
  require_positive(omega, "omega");
  require_positive(duration, "duration");
  const double w2 = omega * omega;
  return Protocol(
      ProtocolKind::Constant, duration, [w2](double) { return w2; }, [](double) { return 0.0; },
      ProtocolMetadata{omega, omega, duration, 1e-9, {}, {}, false}, std::nullopt);
}

Protocol Protocol::sampled(ProtocolKind kind, std::vector<double> omega_sq_samples, double tf,
                           ProtocolMetadata metadata) {
  if (omega_sq_samples.size() < 4) throw ConfigError("sampled protocol needs at least 4 samples");
  require_positive(tf, "tf");
  metadata.sampled = true;
  metadata.tf = tf;
  auto grid = std::make_shared<const CubicGrid>(CubicGrid{std::move(omega_sq_samples), tf});
  return Protocol(
      kind, tf, [grid](double t) { return grid->eval(t).first; }, [grid](double t) { return grid->eval(t).second; },
      std::move(metadata), std::nullopt);
}

Protocol Protocol::resampled(std::size_t points) const {
  return sampled(kind_, grid_values(points), tf_, metadata_);
}

std::vector<double> Protocol::grid_values(std::size_t points) const {
  if (points < 2) throw ConfigError("grid needs at least 2 points");
  std::vector<double> values(points);
  for (std::size_t i = 0; i < points; ++i) {
    values[i] = omega_sq(tf_ * static_cast<double>(i) / static_cast<double>(points - 1));
  }
  return values;
}

Protocol minimal_shortcut(const TrapPair& pair) { return Protocol::shortcut(pair, b_minimal(pair)); }

double adiabaticity_parameter(const Protocol& protocol, double t) {
  const double w2 = protocol.omega_sq(t);
  auto omega = [&protocol](double tau) {
    const double v = protocol.omega_sq(tau);
    return std::copysign(std::sqrt(std::abs(v)), v);
  };
  const double tf = protocol.tf();
  const double h = 1e-6 * tf;
  double domega = 0.0;
  if (t - h < 0.0) {
    domega = (-3.0 * omega(t) + 4.0 * omega(t + h) - omega(t + 2.0 * h)) / (2.0 * h);
  } else if (t + h > tf) {
    domega = (3.0 * omega(t) - 4.0 * omega(t - h) + omega(t - 2.0 * h)) / (2.0 * h);
  } else {
    domega = (omega(t + h) - omega(t - h)) / (2.0 * h);
  }
  if (w2 == 0.0) {
    return std::copysign(std::numeric_limits<double>::infinity(), domega == 0.0 ? 1.0 : domega);
  }
  return std::numbers::sqrt2 * domega / (8.0 * w2);
}

double min_omega_sq(const Protocol& protocol, std::size_t points) {
  const auto values = protocol.grid_values(points);
  return *std::min_element(values.begin(), values.end());
}

}  // namespace sta

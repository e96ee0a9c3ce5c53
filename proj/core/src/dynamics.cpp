#include "sta/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "sta/constants.hpp"
#include "sta/errors.hpp"
#include "sta/rk4.hpp"

namespace sta {

namespace {

using Vec3 = StateVector<3>;
using Vec4 = StateVector<4>;

double reference_omega(const Protocol& protocol) {
  if (protocol.metadata().omega0 > 0.0) return protocol.metadata().omega0;
  const double w2 = std::abs(protocol.omega_sq(0.0));
  if (w2 > 0.0) return std::sqrt(w2);
  throw ConfigError("moment propagation needs a non-zero initial trap frequency");
}

// Fundamental matrix (row-major m11 m12 m21 m22) of
//   d/dt (y1, y2) = (omega0 y2, -(omega^2 / omega0) y1)
// in ground-state units at omega0.
std::vector<Vec4> propagators(const Protocol& protocol, double omega0, const TimeGrid& grid, bool project) {
  auto field = [&protocol, omega0](double t, const Vec4& m) {
    const double k = protocol.omega_sq(t) / omega0;
    return Vec4{{omega0 * m[2], omega0 * m[3], -k * m[0], -k * m[1]}};
  };
  std::vector<Vec4> out;
  out.reserve(grid.steps + 1);
  Vec4 m{{1.0, 0.0, 0.0, 1.0}};
  out.push_back(m);
  for (std::size_t i = 0; i < grid.steps; ++i) {
    m = rk4_step(m, field, grid.at(i), grid.step);
    if (project) {
      const double det = m[0] * m[3] - m[1] * m[2];
      if (!(det > 0.0) || !std::isfinite(det)) throw NumericalError("moment propagator lost orientation; reduce dt");
      m = (1.0 / std::sqrt(det)) * m;
    }
    out.push_back(m);
  }
  return out;
}

MomentTrajectory map_moments(const GaussianState& initial, const Protocol& protocol, const TimeGrid& grid,
                             bool project) {
  const double omega0 = reference_omega(protocol);
  const double l0 = length_scale(omega0, initial.mass);
  const double k0 = momentum_scale(omega0, initial.mass);
  const double y1 = initial.mean_q / l0;
  const double y2 = initial.mean_p / k0;
  const double s11 = initial.var_q() / (l0 * l0);
  const double s22 = initial.var_p() / (k0 * k0);
  const double s12 = initial.cov() / (l0 * k0);

  const auto props = propagators(protocol, omega0, grid, project);
  MomentTrajectory out;
  out.grid.reserve(props.size());
  out.states.reserve(props.size());
  for (std::size_t i = 0; i < props.size(); ++i) {
    const auto& m = props[i];
    const double z1 = m[0] * y1 + m[1] * y2;
    const double z2 = m[2] * y1 + m[3] * y2;
    // M S M^T
    const double a11 = m[0] * s11 + m[1] * s12;
    const double a12 = m[0] * s12 + m[1] * s22;
    const double a21 = m[2] * s11 + m[3] * s12;
    const double a22 = m[2] * s12 + m[3] * s22;
    const double c11 = a11 * m[0] + a12 * m[1];
    const double c12 = a11 * m[2] + a12 * m[3];
    const double c22 = a21 * m[2] + a22 * m[3];

    GaussianState s;
    s.mass = initial.mass;
    s.mean_q = l0 * z1;
    s.mean_p = k0 * z2;
    s.q_sq = l0 * l0 * c11 + s.mean_q * s.mean_q;
    s.p_sq = k0 * k0 * c22 + s.mean_p * s.mean_p;
    s.qp_sym = 2.0 * (l0 * k0 * c12 + s.mean_q * s.mean_p);
    out.grid.push_back(grid.at(i));
    out.states.push_back(s);
  }
  return out;
}

double simpson(const std::vector<double>& f, double h) {
  const std::size_t n = f.size() - 1;  // intervals
  if (n == 0) return 0.0;
  if (n == 1) return 0.5 * h * (f[0] + f[1]);
  std::size_t simpson_end = (n % 2 == 0) ? n : n - 3;
  double sum = 0.0;
  if (simpson_end > 0) {
    double acc = f[0] + f[simpson_end];
    for (std::size_t i = 1; i < simpson_end; ++i) acc += (i % 2 == 1 ? 4.0 : 2.0) * f[i];
    sum = acc * h / 3.0;
  }
  if (n % 2 == 1) {
    const std::size_t j = simpson_end;
    sum += 3.0 * h / 8.0 * (f[j] + 3.0 * f[j + 1] + 3.0 * f[j + 2] + f[j + 3]);
  }
  return sum;
}

}  // namespace

TimeGrid TimeGrid::covering(double tf, double max_step) {
  if (!(tf > 0.0) || !(max_step > 0.0)) throw ConfigError("time grid needs tf > 0 and step > 0");
  const double ratio = tf / max_step;
  if (ratio > 1e9) throw ConfigError("time step too small for the protocol duration (more than 1e9 steps)");
  auto steps = static_cast<std::size_t>(std::ceil(ratio * (1.0 - 1e-12)));
  steps = std::max<std::size_t>(steps, 2);
  if (steps % 2 == 1) ++steps;
  return TimeGrid{steps, tf / static_cast<double>(steps)};
}

double default_step(const Protocol& protocol) {
  const auto values = protocol.grid_values(4001);
  double peak = 0.0;
  for (double v : values) peak = std::max(peak, std::abs(v));
  const double by_duration = protocol.tf() / 2000.0;
  if (peak == 0.0) return by_duration;
  const double period = kTwoPi / std::sqrt(peak);
  return std::min(period / 200.0, by_duration);
}

std::size_t ErmakovTrajectory::index_of(double t) const {
  if (grid.size() < 2) throw ConfigError("empty trajectory");
  const double h = grid[1] - grid[0];
  const double pos = t / h;
  const auto i = static_cast<long long>(std::llround(pos));
  if (i < 0 || static_cast<std::size_t>(i) >= grid.size() || std::abs(pos - static_cast<double>(i)) > 1e-6) {
    std::ostringstream msg;
    msg << "time " << t << " s is not on the trajectory grid";
    throw ConfigError(msg.str());
  }
  return static_cast<std::size_t>(i);
}

ErmakovTrajectory solve_ermakov(const Protocol& protocol, const TrapPair& pair, double dt) {
  const TimeGrid grid = TimeGrid::covering(protocol.tf(), dt);
  const double w0sq = pair.omega0 * pair.omega0;
  auto accel = [&protocol, w0sq](double t, double b) {
    const double b2 = b * b;
    return -protocol.omega_sq(t) * b + w0sq / (b2 * b);
  };
  auto field = [&accel](double t, const Vec3& y) {
    if (!(y[0] > 0.0)) throw PhysicsError("Ermakov trajectory collapsed (b <= 0): anti-confinement held too long");
    return Vec3{{y[1], accel(t, y[0]), 1.0 / (y[0] * y[0])}};
  };

  ErmakovTrajectory out;
  out.omega0 = pair.omega0;
  const std::size_t n = grid.steps + 1;
  out.grid.reserve(n);
  out.b.reserve(n);
  out.bdot.reserve(n);
  out.bddot.reserve(n);
  out.g.reserve(n);

  Vec3 y{{1.0, 0.0, 0.0}};
  for (std::size_t i = 0;; ++i) {
    const double t = grid.at(i);
    if (!(y[0] > 0.0) || !std::isfinite(y[0])) {
      std::ostringstream msg;
      msg << "Ermakov trajectory collapsed (b = " << y[0] << " at t = " << t << " s)";
      throw PhysicsError(msg.str());
    }
    out.grid.push_back(t);
    out.b.push_back(y[0]);
    out.bdot.push_back(y[1]);
    out.bddot.push_back(accel(t, y[0]));
    out.g.push_back(y[2]);
    if (i == grid.steps) break;
    y = rk4_step(y, field, t, grid.step);
  }
  return out;
}

ErmakovTrajectory solve_ermakov(const Protocol& protocol, const TrapPair& pair) {
  return solve_ermakov(protocol, pair, default_step(protocol));
}

double phase_integral(const ErmakovTrajectory& trajectory) {
  if (trajectory.size() < 2) return 0.0;
  std::vector<double> f(trajectory.size());
  for (std::size_t i = 0; i < f.size(); ++i) f[i] = 1.0 / (trajectory.b[i] * trajectory.b[i]);
  return simpson(f, trajectory.grid[1] - trajectory.grid[0]);
}

MomentTrajectory propagate_moments(const GaussianState& initial, const Protocol& protocol, double dt) {
  initial.validate();
  auto out = map_moments(initial, protocol, TimeGrid::covering(protocol.tf(), dt), true);
  const double bound = 0.25 * kHbar * kHbar * (1.0 - 1e-9);
  for (std::size_t i = 0; i < out.states.size(); ++i) {
    const auto& s = out.states[i];
    if (!(s.var_q() > 0.0) || !(s.var_p() > 0.0) || s.uncertainty_product() < bound) {
      std::ostringstream msg;
      msg << "uncertainty bound violated at t = " << out.grid[i] << " s; reduce dt";
      throw NumericalError(msg.str());
    }
  }
  return out;
}

MomentTrajectory propagate_moments(const GaussianState& initial, const Protocol& protocol) {
  return propagate_moments(initial, protocol, default_step(protocol));
}

MomentTrajectory propagate_moments_unprojected(const GaussianState& initial, const Protocol& protocol, double dt) {
  initial.validate();
  return map_moments(initial, protocol, TimeGrid::covering(protocol.tf(), dt), false);
}

PhasePoint classical_mode(double q0, double p0, const ErmakovTrajectory& trajectory, const TrapPair& pair,
                          double t) {
  const std::size_t i = trajectory.index_of(t);
  const double w0 = pair.omega0;
  const double m = pair.mass;
  const double phase = w0 * trajectory.g[i];
  const double c = std::cos(phase);
  const double s = std::sin(phase);
  const double b = trajectory.b[i];
  const double u = q0 * c + p0 / (m * w0) * s;
  // dg/dt = 1/b^2, so du/dt = (-q0 w0 s + p0 c / m) / b^2.
  const double du = (-q0 * w0 * s + p0 * c / m) / (b * b);
  return PhasePoint{b * u, m * (trajectory.bdot[i] * u + b * du)};
}

}  // namespace sta

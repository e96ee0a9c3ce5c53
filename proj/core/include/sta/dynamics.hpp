#pragma once

#include <cstddef>
#include <vector>

#include "sta/gaussian.hpp"
#include "sta/protocol.hpp"

namespace sta {

/// Uniform time grid t_i = i * step, i = 0..steps, ending exactly at tf.
struct TimeGrid {
  std::size_t steps = 0;
  double step = 0.0;

  double at(std::size_t i) const { return static_cast<double>(i) * step; }
  /// Grid with an even number of steps no coarser than max_step.
  static TimeGrid covering(double tf, double max_step);
};

/// Default RK4 step min(T_min / 200, tf / 2000), where T_min = 2 pi / sqrt(max |omega^2|)
/// over a dense grid of the schedule.
double default_step(const Protocol& protocol);

/// Numerical solution of b'' + omega^2(t) b = omega0^2 / b^3 from b(0) = 1,
/// b'(0) = 0, together with the running integral g(t) of 1 / b^2.
struct ErmakovTrajectory {
  std::vector<double> grid;
  std::vector<double> b;
  std::vector<double> bdot;   // 1/s
  std::vector<double> bddot;  // 1/s^2, from the equation of motion
  std::vector<double> g;      // s
  double omega0 = 0.0;

  std::size_t size() const { return grid.size(); }
  /// Index of a grid time; throws ConfigError if t is not on the grid.
  std::size_t index_of(double t) const;
};

/// Fixed-step RK4. Throws PhysicsError if b reaches zero (the trap stayed
/// anti-confining for too long). dt is rounded down so the grid ends at tf
/// with an even step count.
ErmakovTrajectory solve_ermakov(const Protocol& protocol, const TrapPair& pair, double dt);
ErmakovTrajectory solve_ermakov(const Protocol& protocol, const TrapPair& pair);

/// g(tf) = integral of dt / b^2 by composite Simpson on the trajectory grid
/// (3/8 rule on the last three intervals when the step count is odd).
double phase_integral(const ErmakovTrajectory& trajectory);

/// Moments of a Gaussian state on a uniform grid.
struct MomentTrajectory {
  std::vector<double> grid;
  std::vector<GaussianState> states;

  const GaussianState& final_state() const { return states.back(); }
};

/// Integrates the closed Heisenberg equations for the five moments under
/// H = p^2 / 2m + m omega^2(t) q^2 / 2.
///
/// Internally the 2x2 phase-space propagator is advanced with RK4 in units of
/// the ground-state widths at the protocol's initial frequency and projected
/// back to unit determinant after every step, which is exact for the true
/// (area-preserving) flow. Means and covariance are mapped through it, so
/// the uncertainty product is conserved to rounding. Throws NumericalError if
/// it nevertheless drops below hbar^2/4 (1 - 1e-9) at any grid point.
MomentTrajectory propagate_moments(const GaussianState& initial, const Protocol& protocol, double dt);
MomentTrajectory propagate_moments(const GaussianState& initial, const Protocol& protocol);

/// Same integration with the raw (unprojected) RK4 propagator. Exposed for
/// convergence studies; no uncertainty check is made.
MomentTrajectory propagate_moments_unprojected(const GaussianState& initial, const Protocol& protocol, double dt);

struct PhasePoint {
  double q = 0.0;  // m
  double p = 0.0;  // kg m / s
};

/// Scaling solution of the classical oscillator
///   q = b [q0 cos(omega0 g) + p0 / (m omega0) sin(omega0 g)],  p = m dq/dt,
/// evaluated at a grid time of the trajectory.
PhasePoint classical_mode(double q0, double p0, const ErmakovTrajectory& trajectory, const TrapPair& pair,
                          double t);

}  // namespace sta

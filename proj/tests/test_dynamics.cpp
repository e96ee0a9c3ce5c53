#include <gtest/gtest.h>

#include <cmath>

#include "oracles.hpp"
#include "sta/dynamics.hpp"
#include "sta/errors.hpp"
#include "sta/gaussian.hpp"
#include "sta/rk4.hpp"

namespace {

sta::TrapPair expansion(double tf = 20e-9) { return sta::TrapPair::from_hz(3e6, 1e6, tf, 40.0); }

TEST(Rk4, IntegratesExponentialToFourthOrder) {
  auto field = [](double, const sta::StateVector<1>& y) { return y; };
  auto run = [&](int steps) {
    sta::StateVector<1> y{{1.0}};
    const double h = 1.0 / steps;
    for (int i = 0; i < steps; ++i) y = sta::rk4_step(y, field, i * h, h);
    return std::abs(y[0] - std::exp(1.0));
  };
  EXPECT_NEAR(std::log2(run(10) / run(20)), 4.0, 0.1);
}

TEST(TimeGrid, CoversDurationWithEvenSteps) {
  const auto grid = sta::TimeGrid::covering(1.0, 0.3);
  EXPECT_EQ(grid.steps % 2, 0u);
  EXPECT_LE(grid.step, 0.3);
  EXPECT_DOUBLE_EQ(grid.at(grid.steps), 1.0);
  EXPECT_THROW(sta::TimeGrid::covering(1.0, 1e-12), sta::ConfigError);
}

TEST(DefaultStep, ResolvesFastestPeriodAndDuration) {
  const auto protocol = sta::minimal_shortcut(expansion());
  const double dt = sta::default_step(protocol);
  EXPECT_LE(dt, protocol.tf() / 2000.0 * (1 + 1e-12));
  double peak = 0.0;
  for (double v : protocol.grid_values(4001)) peak = std::max(peak, std::abs(v));
  EXPECT_LE(dt, oracle::two_pi / std::sqrt(peak) / 200.0 * (1 + 1e-12));
}

TEST(Ermakov, ReproducesDesignedScalingFunction) {
  for (double tf : {10e-9, 20e-9, 100e-9}) {
    const auto pair = expansion(tf);
    const auto traj = sta::solve_ermakov(sta::minimal_shortcut(pair), pair);
    double worst = 0.0;
    for (std::size_t i = 0; i < traj.size(); i += 37) {
      const auto want = oracle::minimal_b(traj.grid[i], tf, pair.gamma());
      worst = std::max(worst, std::abs(traj.b[i] - want.b));
      EXPECT_NEAR(traj.bdot[i] * tf, want.db * tf, 1e-7);
    }
    EXPECT_LT(worst, 1e-8) << tf;
    EXPECT_NEAR(traj.b.back(), pair.gamma(), 1e-8);
  }
}

TEST(Ermakov, ConstantTrapKeepsUnitWidthAndLinearPhase) {
  const double omega = oracle::two_pi * 1e6;
  const auto pair = sta::TrapPair::make(omega, omega, 5e-6, 40 * oracle::amu);
  const auto traj = sta::solve_ermakov(sta::Protocol::constant(omega, 5e-6), pair);
  for (std::size_t i = 0; i < traj.size(); i += 101) EXPECT_NEAR(traj.b[i], 1.0, 1e-12);
  EXPECT_NEAR(sta::phase_integral(traj) / 5e-6, 1.0, 1e-12);
}

TEST(Ermakov, PhaseIntegralMatchesQuadratureOfDesign) {
  const auto pair = expansion();
  const auto traj = sta::solve_ermakov(sta::minimal_shortcut(pair), pair);
  // Independent composite Gauss-Legendre (5 nodes) on 200 panels of 1/b^2.
  const double x[5] = {-0.9061798459386640, -0.5384693101056831, 0.0, 0.5384693101056831, 0.9061798459386640};
  const double w[5] = {0.2369268850561891, 0.4786286704993665, 0.5688888888888889, 0.4786286704993665,
                       0.2369268850561891};
  double g = 0.0;
  const int panels = 200;
  const double h = pair.tf / panels;
  for (int p = 0; p < panels; ++p) {
    for (int k = 0; k < 5; ++k) {
      const double t = (p + 0.5) * h + 0.5 * h * x[k];
      const double b = oracle::minimal_b(t, pair.tf, pair.gamma()).b;
      g += 0.5 * h * w[k] / (b * b);
    }
  }
  EXPECT_NEAR(sta::phase_integral(traj) / g, 1.0, 1e-9);
  EXPECT_NEAR(traj.g.back() / g, 1.0, 1e-9);
}

TEST(Ermakov, IndexOfRejectsOffGridTimes) {
  const auto pair = expansion();
  const auto traj = sta::solve_ermakov(sta::minimal_shortcut(pair), pair);
  EXPECT_EQ(traj.index_of(traj.grid[17]), 17u);
  EXPECT_THROW(traj.index_of(traj.grid[17] + 0.5 * (traj.grid[1] - traj.grid[0])), sta::ConfigError);
}

TEST(Ermakov, RunawayAntiConfinementIsReported) {
  const auto pair = expansion(1e-6);
  const auto protocol = sta::Protocol::sampled(sta::ProtocolKind::Linear, {-4e18, -4e18, -4e18, -4e18}, 1e-6);
  EXPECT_THROW(sta::solve_ermakov(protocol, pair), sta::PhysicsError);
}

TEST(Moments, PositionVarianceScalesWithWidthSquared) {
  const auto pair = expansion();
  const auto protocol = sta::minimal_shortcut(pair);
  const auto s0 = sta::thermal_state(pair.omega0, 2e-3, pair.mass);
  const auto moments = sta::propagate_moments(s0, protocol);
  for (std::size_t i = 0; i < moments.states.size(); i += 50) {
    const double b = oracle::minimal_b(moments.grid[i], pair.tf, pair.gamma()).b;
    EXPECT_NEAR(moments.states[i].q_sq / (b * b * s0.q_sq), 1.0, 1e-6);
  }
}

TEST(Moments, MeanEnergyFollowsScalingFormula) {
  const auto pair = expansion();
  const auto protocol = sta::minimal_shortcut(pair);
  const auto s0 = sta::thermal_state(pair.omega0, 2e-3, pair.mass);
  const double e0 = oracle::thermal_energy(pair.omega0, 2e-3);
  const auto moments = sta::propagate_moments(s0, protocol);
  for (std::size_t i = 0; i < moments.states.size(); i += 40) {
    const double t = moments.grid[i];
    const auto b = oracle::minimal_b(t, pair.tf, pair.gamma());
    const double w2 = oracle::omega_sq_from_b(b, pair.omega0);
    const double want = oracle::scaled_energy(e0, pair.omega0, b.b, b.db, w2);
    EXPECT_NEAR(sta::mean_energy_at_curvature(moments.states[i], w2) / want, 1.0, 1e-6);
  }
}

TEST(Moments, AgreesWithDirectHeisenbergIntegration) {
  const auto pair = expansion(50e-9);
  const auto protocol = sta::Protocol::linear(pair);
  const auto s0 = sta::coherent_state(pair.omega0, {1.0, -0.5}, pair.mass);
  const auto final_state = sta::propagate_moments(s0, protocol).final_state();
  const auto ref = oracle::integrate_moments({s0.mean_q, s0.mean_p, s0.q_sq, s0.p_sq, s0.qp_sym}, pair.mass,
                                             [&](double t) { return protocol.omega_sq(t); }, pair.tf, 40000);
  EXPECT_NEAR(final_state.mean_q / ref[0], 1.0, 1e-8);
  EXPECT_NEAR(final_state.mean_p / ref[1], 1.0, 1e-8);
  EXPECT_NEAR(final_state.q_sq / ref[2], 1.0, 1e-8);
  EXPECT_NEAR(final_state.p_sq / ref[3], 1.0, 1e-8);
  const double scale = std::sqrt(ref[2] * ref[3]);
  EXPECT_NEAR(final_state.qp_sym / scale, ref[4] / scale, 1e-8);
}

TEST(Moments, ConservesUncertaintyProduct) {
  const auto pair = expansion(10e-6);
  const auto s0 = sta::thermal_state(pair.omega0, 0.1e-3, pair.mass);
  const auto moments = sta::propagate_moments(s0, sta::Protocol::linear(pair));
  const double u0 = s0.uncertainty_product();
  for (const auto& s : moments.states) ASSERT_NEAR(s.uncertainty_product() / u0, 1.0, 1e-9);
}

TEST(Moments, UnprojectedRk4ConvergesAtFourthOrder) {
  const auto pair = expansion(50e-9);
  const auto protocol = sta::Protocol::linear(pair);
  const auto s0 = sta::coherent_state(pair.omega0, {1.0, 0.0}, pair.mass);
  const double dt = pair.tf / 200.0;
  const double ref = sta::propagate_moments_unprojected(s0, protocol, dt / 16).final_state().mean_q;
  const double e1 = std::abs(sta::propagate_moments_unprojected(s0, protocol, dt).final_state().mean_q - ref);
  const double e2 = std::abs(sta::propagate_moments_unprojected(s0, protocol, dt / 2).final_state().mean_q - ref);
  EXPECT_NEAR(std::log2(e1 / e2), 4.0, 0.3);
}

TEST(Moments, RejectsUnphysicalInitialState) {
  // Half the vacuum position variance breaks the uncertainty relation.
  auto s0 = sta::coherent_state(oracle::two_pi * 1e6, {}, 40 * oracle::amu);
  s0.q_sq *= 0.5;
  EXPECT_THROW(sta::propagate_moments(s0, sta::Protocol::constant(oracle::two_pi * 1e6, 1e-6)), sta::ConfigError);
}

TEST(ClassicalMode, ConstantTrapIsHarmonic) {
  const double omega = oracle::two_pi * 1e6;
  const double m = 40 * oracle::amu;
  const auto pair = sta::TrapPair::make(omega, omega, 1e-6, m);
  const auto traj = sta::solve_ermakov(sta::Protocol::constant(omega, 1e-6), pair);
  const double q0 = 1e-7, p0 = 4e-26;
  for (std::size_t i = 0; i < traj.size(); i += 123) {
    const double t = traj.grid[i];
    const auto pt = sta::classical_mode(q0, p0, traj, pair, t);
    const double q = q0 * std::cos(omega * t) + p0 / (m * omega) * std::sin(omega * t);
    const double p = -m * omega * q0 * std::sin(omega * t) + p0 * std::cos(omega * t);
    EXPECT_NEAR(pt.q / 1e-7, q / 1e-7, 1e-9);
    EXPECT_NEAR(pt.p / p0, p / p0, 1e-9);
  }
}

TEST(ClassicalMode, EndsAtRescaledOrbit) {
  // After a shortcut the invariant E / omega is conserved.
  const auto pair = expansion();
  const auto traj = sta::solve_ermakov(sta::minimal_shortcut(pair), pair);
  const double q0 = 1e-7, p0 = 6e-26;
  const auto end = sta::classical_mode(q0, p0, traj, pair, pair.tf);
  auto energy = [&](double q, double p, double w) { return p * p / (2 * pair.mass) + 0.5 * pair.mass * w * w * q * q; };
  EXPECT_NEAR(energy(end.q, end.p, pair.omegaf) / pair.omegaf / (energy(q0, p0, pair.omega0) / pair.omega0), 1.0,
              1e-8);
}

}  // namespace

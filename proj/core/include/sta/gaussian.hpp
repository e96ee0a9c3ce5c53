#pragma once

#include <array>
#include <complex>

#include "sta/protocol.hpp"

namespace sta {

/// Symplectic excess det V / hbar^2 - 1/4 (equivalently nbar) below which a
/// state is treated as pure by the fidelity routines.
inline constexpr double kPurityFloor = 1e-14;

/// Single-mode Gaussian state described by the five moments
/// <q>, <p>, <q^2>, <p^2>, <qp + pq> (SI units) and the particle mass.
struct GaussianState {
  double mean_q = 0.0;  // m
  double mean_p = 0.0;  // kg m / s
  double q_sq = 0.0;    // m^2
  double p_sq = 0.0;    // kg^2 m^2 / s^2
  double qp_sym = 0.0;  // J s, <qp + pq>
  double mass = 0.0;    // kg

  double var_q() const { return q_sq - mean_q * mean_q; }
  double var_p() const { return p_sq - mean_p * mean_p; }
  /// Symmetrized covariance <qp + pq>/2 - <q><p>.
  double cov() const { return 0.5 * qp_sym - mean_q * mean_p; }
  /// var_q var_p - cov^2; at least hbar^2/4 for a physical state.
  double uncertainty_product() const;

  /// Throws ConfigError if the variances are not positive or the state
  /// violates the uncertainty bound by more than the relative tolerance.
  void validate(double tolerance = 1e-9) const;
};

/// Mean vector and symmetric covariance matrix of a Gaussian state.
struct CovarianceForm {
  std::array<double, 2> mean{};                  // (q, p)
  std::array<std::array<double, 2>, 2> matrix{};  // V

  double det() const { return matrix[0][0] * matrix[1][1] - matrix[0][1] * matrix[1][0]; }
};

/// Ground-state position and momentum widths sqrt(hbar / 2 m omega) and
/// sqrt(m hbar omega / 2).
double length_scale(double omega, double mass);
double momentum_scale(double omega, double mass);

/// Bose-Einstein occupation 1 / (exp(hbar omega / k_B T) - 1).
double thermal_occupancy(double omega, double temperature);

GaussianState thermal_state(double omega, double temperature, double mass);
GaussianState coherent_state(double omega, std::complex<double> alpha, double mass);

/// Throws NumericalError if V is not positive definite.
CovarianceForm covariance(const GaussianState& state);

/// Wigner function W(q, p) = exp(-(x - m)^T V^{-1} (x - m) / 2) / (2 pi sqrt(det V)).
double wigner_at(const GaussianState& state, double q, double p);

/// Uhlmann fidelity Tr sqrt(sqrt(rho1) rho2 sqrt(rho1)) of two single-mode
/// Gaussian states, in closed form. Throws NumericalError if V1 + V2 is
/// near-singular and ConfigError if the masses differ.
double fidelity(const GaussianState& a, const GaussianState& b);

/// Thermal state at omegaf with the same occupation as T0 at omega0
/// (inverse temperature scaled by gamma^2).
GaussianState target_thermal(const TrapPair& pair, double initial_temperature);

/// Coherent state at omegaf with amplitude alpha0 exp(-i g omega0), where g is
/// the phase integral of the protocol.
GaussianState target_coherent(const TrapPair& pair, std::complex<double> alpha0, double phase_integral);
std::complex<double> target_amplitude(const TrapPair& pair, std::complex<double> alpha0, double phase_integral);

/// Mean energy <p^2>/2m + m omega^2 <q^2>/2.
double mean_energy(const GaussianState& state, double omega);
/// Same with the curvature given directly; valid for negative omega^2.
double mean_energy_at_curvature(const GaussianState& state, double omega_sq);

/// Result of inverting the thermal-state moments.
struct EffectiveTemperature {
  double kelvin = 0.0;
  /// True when the state is indistinguishable from the ground state
  /// (coth argument beyond double resolution); kelvin is then 0.
  bool below_resolution = false;
};

/// Temperature T such that thermal_state(omega, T, m) reproduces the state.
/// Throws PhysicsError if the state is not thermal-shaped (non-zero mean or
/// q and p widths inconsistent with omega to 1e-6).
EffectiveTemperature effective_temperature(const GaussianState& state, double omega);

/// Coherent amplitude (dimensionless) of the state's mean at frequency omega.
std::complex<double> coherent_amplitude(const GaussianState& state, double omega);

}  // namespace sta

#include "sta/gaussian.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "sta/constants.hpp"
#include "sta/errors.hpp"

namespace sta {

namespace {

void require_positive(double value, const char* name) {
  if (!(value > 0.0) || !std::isfinite(value)) {
    std::ostringstream msg;
    msg << name << " must be finite and > 0 (got " << value << ")";
    throw ConfigError(msg.str());
  }
}

}  // namespace

double GaussianState::uncertainty_product() const {
  const double c = cov();
  return var_q() * var_p() - c * c;
}

void GaussianState::validate(double tolerance) const {
  require_positive(mass, "state mass");
  if (!(var_q() > 0.0) || !(var_p() > 0.0)) throw ConfigError("Gaussian state must have positive variances");
  const double bound = 0.25 * kHbar * kHbar * (1.0 - tolerance);
  if (uncertainty_product() < bound) {
    std::ostringstream msg;
    msg << "Gaussian state violates the uncertainty bound: product/(hbar^2/4) = "
        << uncertainty_product() / (0.25 * kHbar * kHbar);
    throw ConfigError(msg.str());
  }
}

double length_scale(double omega, double mass) { return std::sqrt(kHbar / (2.0 * mass * omega)); }

double momentum_scale(double omega, double mass) { return std::sqrt(mass * kHbar * omega / 2.0); }

double thermal_occupancy(double omega, double temperature) {
  require_positive(omega, "omega");
  require_positive(temperature, "temperature");
  return 1.0 / std::expm1(kHbar * omega / (kBoltzmann * temperature));
}

GaussianState thermal_state(double omega, double temperature, double mass) {
  require_positive(omega, "omega");
  require_positive(temperature, "temperature");
  require_positive(mass, "mass");
  const double coth = 1.0 / std::tanh(kHbar * omega / (2.0 * kBoltzmann * temperature));
  const double l0 = length_scale(omega, mass);
  const double k0 = momentum_scale(omega, mass);
  return GaussianState{0.0, 0.0, l0 * l0 * coth, k0 * k0 * coth, 0.0, mass};
}

GaussianState coherent_state(double omega, std::complex<double> alpha, double mass) {
  require_positive(omega, "omega");
  require_positive(mass, "mass");
  const double l0 = length_scale(omega, mass);
  const double k0 = momentum_scale(omega, mass);
  const double x1 = 2.0 * l0 * alpha.real();
  const double x2 = 2.0 * k0 * alpha.imag();
  return GaussianState{x1, x2, x1 * x1 + l0 * l0, x2 * x2 + k0 * k0, 4.0 * kHbar * alpha.real() * alpha.imag(), mass};
}

CovarianceForm covariance(const GaussianState& state) {
  CovarianceForm form;
  form.mean = {state.mean_q, state.mean_p};
  const double c = state.cov();
  form.matrix = {{{state.var_q(), c}, {c, state.var_p()}}};
  if (!(form.matrix[0][0] > 0.0) || !(form.det() > 0.0)) {
    throw NumericalError("invalid Gaussian state: covariance matrix is not positive definite");
  }
  return form;
}

double wigner_at(const GaussianState& state, double q, double p) {
  const auto form = covariance(state);
  const double det = form.det();
  const double dq = q - form.mean[0];
  const double dp = p - form.mean[1];
  const auto& V = form.matrix;
  // x^T V^{-1} x with the 2x2 inverse written out.
  const double quad = (V[1][1] * dq * dq - 2.0 * V[0][1] * dq * dp + V[0][0] * dp * dp) / det;
  return std::exp(-0.5 * quad) / (kTwoPi * std::sqrt(det));
}

double fidelity(const GaussianState& a, const GaussianState& b) {
  if (std::abs(a.mass - b.mass) > 1e-12 * std::max(a.mass, b.mass)) {
    throw ConfigError("fidelity needs two states of the same particle mass");
  }
  const auto va = covariance(a);
  const auto vb = covariance(b);
  std::array<std::array<double, 2>, 2> sum{};
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) sum[i][j] = va.matrix[i][j] + vb.matrix[i][j];
  const double det_sum = sum[0][0] * sum[1][1] - sum[0][1] * sum[1][0];
  const double diag_product = sum[0][0] * sum[1][1];
  if (!(det_sum > 1e-14 * diag_product)) throw NumericalError("fidelity: V1 + V2 is near-singular");

  // Symplectic invariants in units of hbar (vacuum det = 1/4).
  const double hbar2 = kHbar * kHbar;
  const double delta = det_sum / hbar2;
  // F depends on the mixedness through sqrt(lambda), so rounding noise of a
  // pure state (det V = hbar^2/4 up to ~1e-15) would show up at the 1e-8 level.
  // Excess below kPurityFloor counts as exactly pure.
  auto excess = [hbar2](double det) {
    const double e = det / hbar2 - 0.25;
    return e < kPurityFloor ? 0.0 : e;
  };
  const double lambda = 4.0 * excess(va.det()) * excess(vb.det());
  const double f0_sq = (std::sqrt(delta + lambda) + std::sqrt(lambda)) / delta;

  const double dq = b.mean_q - a.mean_q;
  const double dp = b.mean_p - a.mean_p;
  const double quad = (sum[1][1] * dq * dq - 2.0 * sum[0][1] * dq * dp + sum[0][0] * dp * dp) / det_sum;
  const double f = std::sqrt(f0_sq) * std::exp(-0.25 * quad);
  return std::clamp(f, 0.0, 1.0);
}

GaussianState target_thermal(const TrapPair& pair, double initial_temperature) {
  require_positive(initial_temperature, "initial temperature");
  // beta_f = gamma^2 beta_0  <=>  T_f = T_0 omega_f / omega_0.
  const double g = pair.gamma();
  return thermal_state(pair.omegaf, initial_temperature / (g * g), pair.mass);
}

std::complex<double> target_amplitude(const TrapPair& pair, std::complex<double> alpha0, double phase_integral) {
  return alpha0 * std::polar(1.0, -phase_integral * pair.omega0);
}

GaussianState target_coherent(const TrapPair& pair, std::complex<double> alpha0, double phase_integral) {
  return coherent_state(pair.omegaf, target_amplitude(pair, alpha0, phase_integral), pair.mass);
}

double mean_energy_at_curvature(const GaussianState& state, double omega_sq) {
  return state.p_sq / (2.0 * state.mass) + 0.5 * state.mass * omega_sq * state.q_sq;
}

double mean_energy(const GaussianState& state, double omega) {
  return mean_energy_at_curvature(state, omega * omega);
}

EffectiveTemperature effective_temperature(const GaussianState& state, double omega) {
  require_positive(omega, "omega");
  const double l0 = length_scale(omega, state.mass);
  const double k0 = momentum_scale(omega, state.mass);
  const double cq = state.q_sq / (l0 * l0);
  const double cp = state.p_sq / (k0 * k0);
  const double spread = std::sqrt(state.q_sq * state.p_sq);
  const bool centred = std::abs(state.mean_q) <= 1e-6 * std::sqrt(state.q_sq) &&
                       std::abs(state.mean_p) <= 1e-6 * std::sqrt(state.p_sq) &&
                       std::abs(0.5 * state.qp_sym) <= 1e-6 * spread;
  if (!centred || std::abs(cq / cp - 1.0) > 1e-6) {
    std::ostringstream msg;
    msg << "state is not thermal-shaped at this frequency (X3/l0^2 = " << cq << ", X4/k0^2 = " << cp << ")";
    throw PhysicsError(msg.str());
  }
  if (cq < 1.0 - 1e-9) throw PhysicsError("state is narrower than the ground state at this frequency");
  if (cq - 1.0 <= 1e-12) return EffectiveTemperature{0.0, true};
  // coth(x) = cq with x = hbar omega / (2 k_B T).
  const double x = 0.5 * std::log1p(2.0 / (cq - 1.0));
  return EffectiveTemperature{kHbar * omega / (2.0 * kBoltzmann * x), false};
}

std::complex<double> coherent_amplitude(const GaussianState& state, double omega) {
  return {state.mean_q / (2.0 * length_scale(omega, state.mass)),
          state.mean_p / (2.0 * momentum_scale(omega, state.mass))};
}

}  // namespace sta

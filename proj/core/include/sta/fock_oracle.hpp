#pragma once

#include <complex>
#include <cstddef>
#include <vector>

#include "sta/gaussian.hpp"

namespace sta {

/// Williamson-type decomposition rho = D(alpha) S(zeta) rho_th(nbar) S^dag D^dag
/// of a single-mode Gaussian state with respect to a reference oscillator of
/// angular frequency omega_ref. S(zeta) = exp((zeta^* a^2 - zeta a^dag^2) / 2).
struct FockDecomposition {
  double omega_ref = 0.0;
  double nbar = 0.0;
  std::complex<double> alpha{};
  double squeeze_r = 0.0;
  double squeeze_phi = 0.0;
};

FockDecomposition fock_decompose(const GaussianState& state, double omega_ref);

/// Reference frequency shared by a pair of states: the geometric mean of
/// their natural frequencies sqrt(var_p / var_q) / m.
double fock_reference_omega(const GaussianState& a, const GaussianState& b);

/// Truncation max(50, ceil(20 (nbar + |alpha|^2 + 1))) over both states.
std::size_t default_fock_dimension(const GaussianState& a, const GaussianState& b);

/// A truncation large enough for a 1e-10 tail in both states. The default
/// rule alone is too small for hot or strongly squeezed states.
std::size_t fock_dimension_for_tail(const GaussianState& a, const GaussianState& b);

/// Root Uhlmann fidelity Tr sqrt(sqrt(rho1) rho2 sqrt(rho1)) computed in the
/// number basis {|0>, ..., |n_max>} of the shared reference oscillator.
///
/// Each state is expanded in its own eigenvectors psi_k = D S |k> with
/// thermal weights p_k, and the fidelity is the sum of singular values of
/// diag(sqrt p1) Psi1^dag Psi2 diag(sqrt p2). Throws NumericalError if
/// either state keeps more than 1e-10 of its trace above n_max.
double fidelity_fock_oracle(const GaussianState& a, const GaussianState& b, std::size_t n_max);
double fidelity_fock_oracle(const GaussianState& a, const GaussianState& b);

/// Dense density matrix (row-major, (n_max + 1)^2 entries) of the state in the
/// number basis at omega_ref. Same tail check as the oracle.
std::vector<std::complex<double>> fock_density_matrix(const GaussianState& state, double omega_ref,
                                                      std::size_t n_max);

}  // namespace sta

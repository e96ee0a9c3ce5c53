#pragma once

#include <cstddef>
#include <vector>

#include "sta/protocol.hpp"

namespace sta {

/// Largest |d(omega^2)/dt| on a uniform grid over [0, tf].
double max_slew(const Protocol& protocol, std::size_t points = 4001);

/// Mean-value-theorem bound |omega0^2 - omegaf^2| / tf on any protocol's peak slew.
double slew_lower_bound(const TrapPair& pair);

/// Largest |omega^2| on a uniform grid over [0, tf].
double max_abs_omega_sq(const Protocol& protocol, std::size_t points = 4001);

/// Peak-slew minimization over the extra coefficients of b_extended.
struct SlewObjective {
  TrapPair pair;
  /// Grid for the search objective (>= 1001).
  std::size_t grid_points = 4001;
  /// Grid on which final answers are re-evaluated.
  std::size_t final_points = 16001;
  /// Polynomial orders of the free coefficients; empty means 6, 7, ...
  std::vector<int> indices;
  /// Exponent of the smoothed maximum (mean of |rate|^p)^(1/p) used for gradients.
  double softmax_power = 16.0;
  /// Multi-start offsets +/- spread * (gamma - 1) along each coordinate.
  double spread = 3.0;
  int max_iterations = 400;
  /// Stop when the relative objective decrease over an iteration drops below this.
  double tolerance = 1e-10;
  /// Worker threads for the multi-start (0: hardware concurrency).
  unsigned threads = 1;

  /// Throws ConfigError for grids below 1001 points or indices below 6.
  void validate() const;
  std::vector<int> resolved_indices(std::size_t n_extra) const;
};

struct SlewOptimization {
  std::vector<ExtraCoefficient> coefficients;
  /// max_slew(optimized) / max_slew(minimal), both on final_points.
  double ratio = 1.0;
  double baseline_slew = 0.0;
  double optimized_slew = 0.0;
  double baseline_max_omega_sq = 0.0;
  double optimized_max_omega_sq = 0.0;
  double lower_bound = 0.0;
  int iterations = 0;
  bool converged = true;
  /// Set when the iteration limit was hit; coefficients are then the best so far.
  bool warning = false;
};

/// Smoothed objective value (normalized by the minimal design's peak slew) and
/// the true normalized peak slew for a set of coefficient values.
struct SlewScore {
  double smooth = 0.0;
  double peak = 0.0;
};
SlewScore evaluate_slew(const SlewObjective& objective, std::span<const ExtraCoefficient> extra, double baseline);

/// Gradient descent with central finite-difference gradients and Armijo
/// backtracking on the smoothed objective, started from 0 and +/- spread along
/// each axis (and, for n_extra >= 2, from the optimum with one fewer
/// coefficient). The candidate with the lowest true peak slew wins, so the
/// ratio never exceeds 1 and never grows with n_extra. Deterministic.
SlewOptimization optimize_extra_coeffs(const SlewObjective& objective, std::size_t n_extra);

}  // namespace sta

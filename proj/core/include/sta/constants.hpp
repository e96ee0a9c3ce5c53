#pragma once

#include <numbers>

namespace sta {

// CODATA 2018 exact / recommended values, SI units.
inline constexpr double kHbar = 1.054571817e-34;       // J s
inline constexpr double kBoltzmann = 1.380649e-23;     // J / K
inline constexpr double kAtomicMassUnit = 1.66053906660e-27;  // kg

inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

constexpr double angular_from_hz(double hz) { return kTwoPi * hz; }
constexpr double hz_from_angular(double omega) { return omega / kTwoPi; }
constexpr double kg_from_amu(double amu) { return amu * kAtomicMassUnit; }

}  // namespace sta

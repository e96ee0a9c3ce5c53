#pragma once

#include <array>
#include <concepts>
#include <cstddef>

namespace sta {

/// Anything closed under addition and scaling by a double.
template <typename T>
concept VectorSpace = requires(T a, T b, double s) {
  { a + b } -> std::convertible_to<T>;
  { s * a } -> std::convertible_to<T>;
};

/// Fixed-size real state vector for the ODE integrators.
template <std::size_t N>
struct StateVector {
  std::array<double, N> v{};

  constexpr double& operator[](std::size_t i) { return v[i]; }
  constexpr const double& operator[](std::size_t i) const { return v[i]; }

  friend constexpr StateVector operator+(StateVector a, const StateVector& b) {
    for (std::size_t i = 0; i < N; ++i) a.v[i] += b.v[i];
    return a;
  }
  friend constexpr StateVector operator-(StateVector a, const StateVector& b) {
    for (std::size_t i = 0; i < N; ++i) a.v[i] -= b.v[i];
    return a;
  }
  friend constexpr StateVector operator*(double s, StateVector a) {
    for (auto& x : a.v) x *= s;
    return a;
  }
};

/// One classical fourth-order Runge-Kutta step of dy/dt = field(t, y).
template <VectorSpace State, typename Field>
  requires std::invocable<Field&, double, const State&>
State rk4_step(const State& y, Field&& field, double t, double dt) {
  const double half = 0.5 * dt;
  const State k1 = field(t, y);
  const State k2 = field(t + half, y + half * k1);
  const State k3 = field(t + half, y + half * k2);
  const State k4 = field(t + dt, y + dt * k3);
  return y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

}  // namespace sta

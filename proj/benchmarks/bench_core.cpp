#include <benchmark/benchmark.h>

#include <complex>

#include "sta/dynamics.hpp"
#include "sta/fock_oracle.hpp"
#include "sta/gaussian.hpp"
#include "sta/ionsim.hpp"
#include "sta/optimizer.hpp"
#include "sta/protocol.hpp"

namespace {

sta::TrapPair expansion() { return sta::TrapPair::from_hz(3e6, 1e6, 20e-9, 40.0); }

void BM_MinimalShortcutDesign(benchmark::State& state) {
  const auto pair = expansion();
  for (auto _ : state) {
    const auto protocol = sta::minimal_shortcut(pair);
    benchmark::DoNotOptimize(protocol.omega_sq(0.5 * pair.tf));
  }
}
BENCHMARK(BM_MinimalShortcutDesign);

void BM_PropagateMoments(benchmark::State& state) {
  const auto pair = expansion();
  const auto protocol = sta::minimal_shortcut(pair);
  const auto s0 = sta::thermal_state(pair.omega0, 2e-3, pair.mass);
  for (auto _ : state) {
    benchmark::DoNotOptimize(sta::propagate_moments(s0, protocol).final_state().q_sq);
  }
}
BENCHMARK(BM_PropagateMoments)->Unit(benchmark::kMicrosecond);

void BM_SolveErmakov(benchmark::State& state) {
  const auto pair = expansion();
  const auto protocol = sta::minimal_shortcut(pair);
  for (auto _ : state) {
    benchmark::DoNotOptimize(sta::phase_integral(sta::solve_ermakov(protocol, pair)));
  }
}
BENCHMARK(BM_SolveErmakov)->Unit(benchmark::kMicrosecond);

void BM_ClosedFormFidelity(benchmark::State& state) {
  const auto a = sta::thermal_state(2e7, 1e-3, 6.6e-26);
  const auto b = sta::coherent_state(1.5e7, {0.8, -0.3}, 6.6e-26);
  for (auto _ : state) benchmark::DoNotOptimize(sta::fidelity(a, b));
}
BENCHMARK(BM_ClosedFormFidelity);

// Fock oracle cost grows with the temperature of the mixed state.
void BM_FockOracle(benchmark::State& state) {
  const double kelvin = 1e-3 * static_cast<double>(state.range(0));
  const auto a = sta::thermal_state(2e7, kelvin, 6.6e-26);
  const auto b = sta::coherent_state(1.5e7, {0.8, -0.3}, 6.6e-26);
  const auto n = sta::fock_dimension_for_tail(a, b);
  for (auto _ : state) benchmark::DoNotOptimize(sta::fidelity_fock_oracle(a, b, n));
  state.counters["n_max"] = static_cast<double>(n);
}
BENCHMARK(BM_FockOracle)->Arg(1)->Arg(3)->Unit(benchmark::kMillisecond);

void BM_EvaluateSlew(benchmark::State& state) {
  sta::SlewObjective objective;
  objective.pair = expansion();
  const double base = sta::max_slew(sta::minimal_shortcut(objective.pair), objective.grid_points);
  const std::vector<sta::ExtraCoefficient> extra{{6, 2.2}};
  for (auto _ : state) benchmark::DoNotOptimize(sta::evaluate_slew(objective, extra, base).peak);
}
BENCHMARK(BM_EvaluateSlew)->Unit(benchmark::kMicrosecond);

void BM_OptimizeOneCoefficient(benchmark::State& state) {
  sta::SlewObjective objective;
  objective.pair = expansion();
  for (auto _ : state) benchmark::DoNotOptimize(sta::optimize_extra_coeffs(objective, 1).ratio);
}
BENCHMARK(BM_OptimizeOneCoefficient)->Unit(benchmark::kMillisecond);

void BM_SimulateRfShortcutRf(benchmark::State& state) {
  const auto pair = expansion();
  const sta::SequenceSpec spec{sta::minimal_shortcut(pair), 2 * 3.141592653589793 * 100e6,
                               2 * 3.141592653589793 * 100e3, pair.mass, 2e-6, 6e-6, {}, false};
  const auto sequence = sta::build_sequence(spec);
  const auto s0 = sta::secular_initial_state(spec, 1e-7, 0.5, 0.0, 0.3);
  sta::SimulationOptions options;
  options.sample_stride = 64;
  for (auto _ : state) benchmark::DoNotOptimize(sta::simulate(sequence, s0, options).samples.size());
}
BENCHMARK(BM_SimulateRfShortcutRf)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();

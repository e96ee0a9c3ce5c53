#include <gtest/gtest.h>

#include <cmath>

#include "oracles.hpp"
#include "sta/errors.hpp"
#include "sta/optimizer.hpp"

namespace {

sta::TrapPair expansion() { return sta::TrapPair::from_hz(3e6, 1e6, 20e-9, 40.0); }

sta::SlewObjective objective() {
  sta::SlewObjective obj;
  obj.pair = expansion();
  return obj;
}

TEST(Slew, MaxSlewMatchesFiniteDifferencePeak) {
  const auto pair = expansion();
  const auto protocol = sta::minimal_shortcut(pair);
  double peak = 0.0;
  const int n = 4000;
  const double h = pair.tf / n;
  for (int i = 0; i < n; ++i) {
    const double t0 = i * h, t1 = (i + 1) * h;
    const double w0 = oracle::omega_sq_from_b(oracle::minimal_b(t0, pair.tf, pair.gamma()), pair.omega0);
    const double w1 = oracle::omega_sq_from_b(oracle::minimal_b(t1, pair.tf, pair.gamma()), pair.omega0);
    peak = std::max(peak, std::abs(w1 - w0) / h);
  }
  EXPECT_NEAR(sta::max_slew(protocol, 16001) / peak, 1.0, 2e-3);
}

TEST(Slew, LowerBoundFromMeanValueTheorem) {
  const auto pair = expansion();
  EXPECT_DOUBLE_EQ(sta::slew_lower_bound(pair),
                   (pair.omega0 * pair.omega0 - pair.omegaf * pair.omegaf) / pair.tf);
  for (const auto& p : {sta::minimal_shortcut(pair), sta::Protocol::linear(pair), sta::Protocol::smooth(pair)}) {
    EXPECT_GE(sta::max_slew(p) * (1 + 1e-9), sta::slew_lower_bound(pair)) << sta::to_string(p.kind());
  }
  EXPECT_NEAR(sta::max_slew(sta::Protocol::linear(pair)) / sta::slew_lower_bound(pair), 1.0, 1e-12);
}

TEST(Slew, ObjectiveOfZeroExtraEqualsOne) {
  const auto obj = objective();
  const double base = sta::max_slew(sta::minimal_shortcut(obj.pair), obj.grid_points);
  const std::vector<sta::ExtraCoefficient> zero{{6, 0.0}};
  const auto score = sta::evaluate_slew(obj, zero, base);
  EXPECT_NEAR(score.peak, 1.0, 1e-12);
  EXPECT_LE(score.smooth, score.peak);
}

TEST(Optimizer, OneExtraCoefficientReducesPeakSlew) {
  const auto result = sta::optimize_extra_coeffs(objective(), 1);
  ASSERT_EQ(result.coefficients.size(), 1u);
  EXPECT_EQ(result.coefficients[0].index, 6);
  EXPECT_NEAR(result.ratio, 0.78, 0.05);
  EXPECT_TRUE(result.converged);
  EXPECT_FALSE(result.warning);
  EXPECT_GE(result.optimized_slew, result.lower_bound);
  const auto b = sta::b_extended(expansion(), result.coefficients);
  EXPECT_LT(sta::verify_boundary(b, expansion()).max(), 1e-12);
  EXPECT_NEAR(sta::max_slew(sta::Protocol::shortcut(expansion(), b), 16001), result.optimized_slew,
              1e-12 * result.optimized_slew);
}

TEST(Optimizer, MoreCoefficientsNeverHurt) {
  const auto one = sta::optimize_extra_coeffs(objective(), 1);
  const auto two = sta::optimize_extra_coeffs(objective(), 2);
  EXPECT_LE(two.ratio, one.ratio + 1e-12);
  EXPECT_GE(two.optimized_slew, two.lower_bound);
}

TEST(Optimizer, ZeroExtraIsIdentity) {
  const auto r = sta::optimize_extra_coeffs(objective(), 0);
  EXPECT_DOUBLE_EQ(r.ratio, 1.0);
  EXPECT_TRUE(r.coefficients.empty());
}

TEST(Optimizer, IsDeterministicAcrossThreadCounts) {
  auto obj = objective();
  const auto serial = sta::optimize_extra_coeffs(obj, 1);
  obj.threads = 3;
  const auto parallel = sta::optimize_extra_coeffs(obj, 1);
  EXPECT_EQ(serial.coefficients[0].value, parallel.coefficients[0].value);
  EXPECT_EQ(serial.ratio, parallel.ratio);
}

TEST(Optimizer, IterationLimitRaisesWarning) {
  auto obj = objective();
  obj.max_iterations = 1;
  const auto r = sta::optimize_extra_coeffs(obj, 2);
  EXPECT_TRUE(r.warning);
  EXPECT_LE(r.ratio, 1.0);
}

TEST(Optimizer, RejectsBadSettings) {
  auto obj = objective();
  obj.grid_points = 10;
  EXPECT_THROW(sta::optimize_extra_coeffs(obj, 1), sta::ConfigError);
  obj = objective();
  obj.indices = {5};
  EXPECT_THROW(sta::optimize_extra_coeffs(obj, 1), sta::ConfigError);
}

}  // namespace

#include "sta/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <sstream>

#include "sta/errors.hpp"
#include "sta/parallel.hpp"

namespace sta {

namespace {

constexpr double kInfeasible = std::numeric_limits<double>::infinity();

std::vector<ExtraCoefficient> pack(const std::vector<int>& indices, const std::vector<double>& values) {
  std::vector<ExtraCoefficient> extra(indices.size());
  for (std::size_t i = 0; i < indices.size(); ++i) extra[i] = {indices[i], values[i]};
  return extra;
}

double peak_rate(const ScalingFunction& b, const TrapPair& pair, std::size_t points) {
  double peak = 0.0;
  for (std::size_t i = 0; i < points; ++i) {
    const double t = pair.tf * static_cast<double>(i) / static_cast<double>(points - 1);
    peak = std::max(peak, std::abs(omega_sq_shortcut_rate(b, pair, t)));
  }
  return peak;
}

struct Descent {
  std::vector<double> x;
  SlewScore score;
  int iterations = 0;
  bool converged = false;
};

std::vector<double> fd_gradient(const std::function<double(const std::vector<double>&)>& f,
                                const std::vector<double>& x) {
  std::vector<double> grad(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double h = 1e-5 * std::max(1.0, std::abs(x[i]));
    auto xp = x;
    auto xm = x;
    xp[i] += h;
    xm[i] -= h;
    const double fp = f(xp);
    const double fm = f(xm);
    grad[i] = (std::isfinite(fp) && std::isfinite(fm)) ? (fp - fm) / (2.0 * h) : 0.0;
  }
  return grad;
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

// Gradient descent along -H g, where H is a BFGS estimate of the inverse
// Hessian (plain steepest descent on the first iteration and after resets).
// The polynomial basis s^6, s^7, ... is strongly correlated, which makes the
// unpreconditioned descent crawl along a narrow valley.
Descent descend(const SlewObjective& obj, const std::vector<int>& indices, std::vector<double> x, double baseline) {
  auto score = [&](const std::vector<double>& v) { return evaluate_slew(obj, pack(indices, v), baseline); };
  std::function<double(const std::vector<double>&)> smooth = [&](const std::vector<double>& v) {
    return score(v).smooth;
  };
  const std::size_t n = x.size();
  Descent out;
  SlewScore current = score(x);
  if (!std::isfinite(current.smooth)) {
    out.x = std::move(x);
    out.score = current;
    out.converged = true;
    return out;
  }
  auto identity = [n](double scale) {
    std::vector<std::vector<double>> h(n, std::vector<double>(n, 0.0));
    for (std::size_t i = 0; i < n; ++i) h[i][i] = scale;
    return h;
  };
  auto hinv = identity(1.0);
  std::vector<double> grad = fd_gradient(smooth, x);
  int stalls = 0;
  int it = 0;
  for (; it < obj.max_iterations; ++it) {
    if (dot(grad, grad) < 1e-24) {
      out.converged = true;
      break;
    }
    std::vector<double> dir(n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) dir[i] -= hinv[i][j] * grad[j];
    double slope = dot(grad, dir);
    if (!(slope < 0.0)) {
      hinv = identity(1.0);
      for (std::size_t i = 0; i < n; ++i) dir[i] = -grad[i];
      slope = dot(grad, dir);
    }

    double step = 1.0;
    bool accepted = false;
    std::vector<double> trial(n);
    SlewScore next{};
    while (step > 1e-16) {
      for (std::size_t i = 0; i < n; ++i) trial[i] = x[i] + step * dir[i];
      next = score(trial);
      if (std::isfinite(next.smooth) && next.smooth <= current.smooth + 1e-4 * step * slope) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) {
      out.converged = true;
      break;
    }

    const auto grad_next = fd_gradient(smooth, trial);
    std::vector<double> sv(n), yv(n);
    for (std::size_t i = 0; i < n; ++i) {
      sv[i] = trial[i] - x[i];
      yv[i] = grad_next[i] - grad[i];
    }
    const double sy = dot(sv, yv);
    if (sy > 1e-12 * std::sqrt(dot(sv, sv) * dot(yv, yv))) {
      if (it == 0) hinv = identity(sy / dot(yv, yv));
      // H <- (I - rho s y^T) H (I - rho y s^T) + rho s s^T
      const double rho = 1.0 / sy;
      std::vector<double> hy(n, 0.0);
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) hy[i] += hinv[i][j] * yv[j];
      const double yhy = dot(yv, hy);
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
          hinv[i][j] += rho * ((1.0 + rho * yhy) * sv[i] * sv[j] - hy[i] * sv[j] - sv[i] * hy[j]);
    }

    const double decrease = (current.smooth - next.smooth) / current.smooth;
    x = trial;
    grad = grad_next;
    current = next;
    stalls = (decrease < obj.tolerance) ? stalls + 1 : 0;
    if (stalls >= 3) {
      out.converged = true;
      break;
    }
  }
  out.x = std::move(x);
  out.score = current;
  out.iterations = it;
  return out;
}

}  // namespace

double max_slew(const Protocol& protocol, std::size_t points) {
  if (points < 2) throw ConfigError("max_slew needs at least 2 grid points");
  double peak = 0.0;
  for (std::size_t i = 0; i < points; ++i) {
    const double t = protocol.tf() * static_cast<double>(i) / static_cast<double>(points - 1);
    peak = std::max(peak, std::abs(protocol.omega_sq_rate(t)));
  }
  return peak;
}

double slew_lower_bound(const TrapPair& pair) {
  return std::abs(pair.omega0 * pair.omega0 - pair.omegaf * pair.omegaf) / pair.tf;
}

double max_abs_omega_sq(const Protocol& protocol, std::size_t points) {
  const auto values = protocol.grid_values(points);
  double peak = 0.0;
  for (double v : values) peak = std::max(peak, std::abs(v));
  return peak;
}

void SlewObjective::validate() const {
  if (grid_points < 1001 || final_points < 1001) throw ConfigError("slew objective grids need >= 1001 points");
  for (int k : indices) {
    if (k < 6) throw ConfigError("extra coefficient indices must be >= 6");
  }
  if (!(softmax_power >= 1.0)) throw ConfigError("softmax power must be >= 1");
  if (max_iterations < 1) throw ConfigError("max_iterations must be >= 1");
}

std::vector<int> SlewObjective::resolved_indices(std::size_t n_extra) const {
  if (!indices.empty()) {
    if (indices.size() < n_extra) {
      std::ostringstream msg;
      msg << "slew objective lists " << indices.size() << " indices but n_extra = " << n_extra;
      throw ConfigError(msg.str());
    }
    return {indices.begin(), indices.begin() + static_cast<std::ptrdiff_t>(n_extra)};
  }
  std::vector<int> out(n_extra);
  for (std::size_t i = 0; i < n_extra; ++i) out[i] = 6 + static_cast<int>(i);
  return out;
}

SlewScore evaluate_slew(const SlewObjective& objective, std::span<const ExtraCoefficient> extra, double baseline) {
  std::optional<ScalingFunction> b;
  try {
    b.emplace(b_extended(objective.pair, extra));
  } catch (const NumericalError&) {
    return {kInfeasible, kInfeasible};
  }
  const std::size_t points = objective.grid_points;
  const double p = objective.softmax_power;
  double peak = 0.0;
  std::vector<double> rates(points);
  for (std::size_t i = 0; i < points; ++i) {
    const double t = objective.pair.tf * static_cast<double>(i) / static_cast<double>(points - 1);
    rates[i] = std::abs(omega_sq_shortcut_rate(*b, objective.pair, t)) / baseline;
    peak = std::max(peak, rates[i]);
  }
  // Factor the peak out of the p-mean to avoid overflow.
  double acc = 0.0;
  for (double r : rates) acc += std::pow(r / peak, p);
  const double smooth = peak * std::pow(acc / static_cast<double>(points), 1.0 / p);
  return {smooth, peak};
}

SlewOptimization optimize_extra_coeffs(const SlewObjective& objective, std::size_t n_extra) {
  objective.validate();
  const TrapPair& pair = objective.pair;
  const ScalingFunction minimal = b_minimal(pair);

  SlewOptimization result;
  result.lower_bound = slew_lower_bound(pair);
  result.baseline_slew = peak_rate(minimal, pair, objective.final_points);
  result.baseline_max_omega_sq = max_abs_omega_sq(Protocol::shortcut(pair, minimal), objective.final_points);
  result.optimized_slew = result.baseline_slew;
  result.optimized_max_omega_sq = result.baseline_max_omega_sq;
  if (n_extra == 0 || result.baseline_slew == 0.0) {
    result.ratio = 1.0;
    return result;
  }

  const auto indices = objective.resolved_indices(n_extra);
  const double search_baseline = peak_rate(minimal, pair, objective.grid_points);

  std::vector<std::vector<double>> starts;
  starts.emplace_back(n_extra, 0.0);
  const double spread = objective.spread * std::max(std::abs(pair.gamma() - 1.0), 1e-3);
  for (std::size_t i = 0; i < n_extra; ++i) {
    for (double sign : {1.0, -1.0}) {
      std::vector<double> s(n_extra, 0.0);
      s[i] = sign * spread;
      starts.push_back(std::move(s));
    }
  }
  if (n_extra >= 2) {
    SlewObjective sub = objective;
    sub.indices = {indices.begin(), indices.end() - 1};
    const auto smaller = optimize_extra_coeffs(sub, n_extra - 1);
    std::vector<double> s(n_extra, 0.0);
    for (std::size_t i = 0; i < smaller.coefficients.size(); ++i) s[i] = smaller.coefficients[i].value;
    starts.push_back(std::move(s));
  }

  std::vector<Descent> runs(starts.size());
  parallel_for(starts.size(), objective.threads,
               [&](std::size_t i) { runs[i] = descend(objective, indices, starts[i], search_baseline); });

  // Candidates: every start point and every descent end point, ranked by the
  // true peak on the final grid.
  auto final_peak = [&](const std::vector<double>& x) {
    try {
      return peak_rate(b_extended(pair, pack(indices, x)), pair, objective.final_points);
    } catch (const NumericalError&) {
      return kInfeasible;
    }
  };
  std::vector<double> best_x = starts.front();
  double best_peak = final_peak(best_x);
  for (std::size_t i = 0; i < starts.size(); ++i) {
    for (const auto* x : {&starts[i], &runs[i].x}) {
      const double peak = final_peak(*x);
      if (peak < best_peak) {
        best_peak = peak;
        best_x = *x;
      }
    }
  }

  result.converged = true;
  for (const auto& r : runs) {
    result.iterations += r.iterations;
    result.converged = result.converged && r.converged;
  }
  result.warning = !result.converged;
  result.coefficients = pack(indices, best_x);
  const ScalingFunction best = b_extended(pair, result.coefficients);
  result.optimized_slew = peak_rate(best, pair, objective.final_points);
  result.optimized_max_omega_sq = max_abs_omega_sq(Protocol::shortcut(pair, best), objective.final_points);
  result.ratio = result.optimized_slew / result.baseline_slew;
  return result;
}

}  // namespace sta

#include "sta/ionsim.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <sstream>

#include "sta/constants.hpp"
#include "sta/errors.hpp"
#include "sta/parallel.hpp"

namespace sta {

namespace {

double norm3(const Vec3& r) { return std::sqrt(r[0] * r[0] + r[1] * r[1] + r[2] * r[2]); }

double endpoint_omega(const Protocol& protocol, bool at_start) {
  const auto& meta = protocol.metadata();
  const double nominal = at_start ? meta.omega0 : meta.omegaf;
  if (nominal > 0.0) return nominal;
  const double w2 = protocol.omega_sq(at_start ? 0.0 : protocol.tf());
  if (!(w2 > 0.0)) throw ConfigError("shortcut protocol must start and end confining");
  return std::sqrt(w2);
}

void check_handoff(const RfPhase& rf, const ShortcutPhase& sc, bool rf_first) {
  const double w2 = sc.protocol.omega_sq(rf_first ? 0.0 : sc.protocol.tf());
  const double target = rf.secular * rf.secular;
  const double tolerance = std::max(1e-6, sc.protocol.metadata().endpoint_tolerance);
  if (std::abs(w2 / target - 1.0) > tolerance) {
    std::ostringstream msg;
    msg << "shortcut " << (rf_first ? "start" : "end") << " curvature " << w2
        << " rad^2/s^2 does not match the adjacent RF secular curvature " << target << " (relative tolerance "
        << tolerance << ")";
    throw ConfigError(msg.str());
  }
}

// Running trapezoid integral of f over the sample times.
std::vector<double> cumulative(const std::vector<double>& t, const std::vector<double>& f) {
  std::vector<double> c(t.size(), 0.0);
  for (std::size_t i = 1; i < t.size(); ++i) c[i] = c[i - 1] + 0.5 * (t[i] - t[i - 1]) * (f[i] + f[i - 1]);
  return c;
}

double interpolate(const std::vector<double>& t, const std::vector<double>& c, double at) {
  auto it = std::upper_bound(t.begin(), t.end(), at);
  if (it == t.begin()) return c.front();
  if (it == t.end()) return c.back();
  const auto j = static_cast<std::size_t>(it - t.begin());
  const double u = (at - t[j - 1]) / (t[j] - t[j - 1]);
  return c[j - 1] + u * (c[j] - c[j - 1]);
}

double fold_tilt_deg(double a, double b) {
  double d = std::fmod(std::abs(a - b), std::numbers::pi);
  if (d > 0.5 * std::numbers::pi) d = std::numbers::pi - d;
  return d * 180.0 / std::numbers::pi;
}

}  // namespace

double RfPhase::mathieu_q() const { return 2.0 * std::numbers::sqrt2 * secular / rf; }
double RfPhase::rf_period() const { return kTwoPi / rf; }

ControlSequence::ControlSequence(std::vector<Phase> phases, SwitchSettings switching)
    : phases_(std::move(phases)), switching_(switching) {
  if (phases_.empty()) throw ConfigError("control sequence needs at least one phase");
  if (!(switching_.ramp_cycles >= 0.0)) throw ConfigError("ramp_cycles must be >= 0");
  starts_.push_back(0.0);
  for (std::size_t i = 0; i < phases_.size(); ++i) {
    double duration = 0.0;
    if (const auto* rf = std::get_if<RfPhase>(&phases_[i])) {
      if (!(rf->duration > 0.0) || !(rf->secular > 0.0) || !(rf->rf > 0.0) || !(rf->axial >= 0.0)) {
        throw ConfigError("RF phase needs duration, secular and rf frequencies > 0 and axial >= 0");
      }
      if (rf->mathieu_q() >= 0.908) throw ConfigError("RF phase outside the first Mathieu stability region");
      if (switching_.ramp_cycles * rf->rf_period() * 2.0 > rf->duration) {
        throw ConfigError("RF phase is shorter than its switch ramps");
      }
      duration = rf->duration;
    } else {
      const auto& sc = std::get<ShortcutPhase>(phases_[i]);
      duration = sc.protocol.tf();
      if (sc.keep_static_axial && !(sc.axial > 0.0)) throw ConfigError("keep_static_axial needs axial > 0");
    }
    starts_.push_back(starts_.back() + duration);
  }
  for (std::size_t i = 0; i + 1 < phases_.size(); ++i) {
    const auto* rf_a = std::get_if<RfPhase>(&phases_[i]);
    const auto* rf_b = std::get_if<RfPhase>(&phases_[i + 1]);
    const auto* sc_a = std::get_if<ShortcutPhase>(&phases_[i]);
    const auto* sc_b = std::get_if<ShortcutPhase>(&phases_[i + 1]);
    if (rf_a && sc_b) check_handoff(*rf_a, *sc_b, true);
    if (sc_a && rf_b) check_handoff(*rf_b, *sc_a, false);
  }
}

std::size_t ControlSequence::phase_index(double t) const {
  const auto it = std::upper_bound(starts_.begin(), starts_.end() - 1, t);
  const auto idx = static_cast<std::size_t>(it - starts_.begin());
  return idx == 0 ? 0 : std::min(idx - 1, phases_.size() - 1);
}

double ControlSequence::min_rf_period() const {
  double period = 0.0;
  for (const auto& p : phases_) {
    if (const auto* rf = std::get_if<RfPhase>(&p)) {
      period = (period == 0.0) ? rf->rf_period() : std::min(period, rf->rf_period());
    }
  }
  return period;
}

Curvatures ControlSequence::curvatures(std::size_t i, double t) const {
  const double t0 = start(i);
  const double t1 = end(i);
  t = std::clamp(t, t0, t1);
  Curvatures k;
  if (const auto* rf = std::get_if<RfPhase>(&phases_[i])) {
    double lambda = 1.0;
    const double ramp = switching_.ramp_cycles * rf->rf_period();
    if (ramp > 0.0) {
      if (i > 0 && std::holds_alternative<ShortcutPhase>(phases_[i - 1])) lambda = std::min(lambda, (t - t0) / ramp);
      if (i + 1 < phases_.size() && std::holds_alternative<ShortcutPhase>(phases_[i + 1])) {
        lambda = std::min(lambda, (t1 - t) / ramp);
      }
    }
    const double w = lambda * lambda;
    const double sec2 = rf->secular * rf->secular;
    const double ax2 = rf->axial * rf->axial;
    const double theta = rf->rf * (t - t0) + switching_.rf_phase;
    const double drive = lambda * rf->mathieu_q() * 0.5 * rf->rf * rf->rf * std::cos(theta);
    const double radial_dc = -0.5 * ax2 + (1.0 - w) * sec2;
    k.dc = {radial_dc, radial_dc, ax2 - 2.0 * (1.0 - w) * sec2};
    k.total = {drive + radial_dc, drive + radial_dc, k.dc[2]};
  } else {
    const auto& sc = std::get<ShortcutPhase>(phases_[i]);
    const double w2 = sc.protocol.omega_sq(t - t0);
    double radial = w2;
    double axial = dc_axial_curvature(w2);
    if (sc.keep_static_axial) {
      radial -= 0.5 * sc.axial * sc.axial;
      axial += sc.axial * sc.axial;
    }
    k.dc = {radial, radial, axial};
    k.total = k.dc;
  }
  return k;
}

Vec3 ControlSequence::acceleration(std::size_t i, const Vec3& r, double t) const {
  const auto k = curvatures(i, t).total;
  return {-k[0] * r[0], -k[1] * r[1], -k[2] * r[2]};
}

std::vector<std::string> ControlSequence::warnings() const {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < phases_.size(); ++i) {
    const auto* sc = std::get_if<ShortcutPhase>(&phases_[i]);
    if (!sc) continue;
    for (std::size_t j : {i - 1, i + 1}) {
      if (j >= phases_.size()) continue;
      const auto* rf = std::get_if<RfPhase>(&phases_[j]);
      if (rf && sc->protocol.tf() <= rf->rf_period()) {
        std::ostringstream msg;
        msg << "shortcut duration " << sc->protocol.tf() << " s is not longer than the RF period "
            << rf->rf_period() << " s: violates the period constraint";
        out.push_back(msg.str());
        break;
      }
    }
  }
  return out;
}

Vec3 acceleration(const IonState& state, const ControlSequence& sequence) {
  return sequence.acceleration(sequence.phase_index(state.t), state.r, state.t);
}

IonState velocity_verlet_step(const IonState& state, const ControlSequence& sequence, std::size_t phase, double dt) {
  const Vec3 a0 = sequence.acceleration(phase, state.r, state.t);
  IonState next;
  next.t = state.t + dt;
  Vec3 half{};
  for (int d = 0; d < 3; ++d) {
    half[d] = state.v[d] + 0.5 * dt * a0[d];
    next.r[d] = state.r[d] + dt * half[d];
  }
  const Vec3 a1 = sequence.acceleration(phase, next.r, next.t);
  for (int d = 0; d < 3; ++d) next.v[d] = half[d] + 0.5 * dt * a1[d];
  return next;
}

IonState velocity_verlet_step(const IonState& state, const ControlSequence& sequence, double dt) {
  return velocity_verlet_step(state, sequence, sequence.phase_index(state.t), dt);
}

Trajectory simulate(const ControlSequence& sequence, const IonState& initial, const SimulationOptions& options) {
  if (!(options.dt_scale > 0.0)) throw ConfigError("dt_scale must be > 0");
  if (!(options.escape_radius > 0.0)) throw ConfigError("escape radius must be > 0");
  const std::size_t stride = std::max<std::size_t>(1, options.sample_stride);
  const double rf_period = sequence.min_rf_period();

  Trajectory out;
  IonState s = initial;
  s.t = 0.0;
  out.samples.push_back(s);
  for (std::size_t i = 0; i < sequence.size(); ++i) {
    const double t0 = sequence.start(i);
    const double duration = sequence.end(i) - t0;
    double dt = 0.0;
    if (const auto* rf = std::get_if<RfPhase>(&sequence.phases()[i])) {
      dt = rf->rf_period() / 256.0;
    } else {
      dt = duration / 4000.0;
      if (rf_period > 0.0) dt = std::min(dt, rf_period / 256.0);
    }
    dt *= options.dt_scale;
    const auto steps = static_cast<std::size_t>(std::ceil(duration / dt * (1.0 - 1e-12)));
    const double h = duration / static_cast<double>(steps);
    out.phase_steps.push_back(h);

    Vec3 a = sequence.acceleration(i, s.r, t0);
    for (std::size_t k = 0; k < steps; ++k) {
      const double t_next = (k + 1 == steps) ? sequence.end(i) : t0 + static_cast<double>(k + 1) * h;
      Vec3 half{};
      for (int d = 0; d < 3; ++d) {
        half[d] = s.v[d] + 0.5 * h * a[d];
        s.r[d] += h * half[d];
      }
      a = sequence.acceleration(i, s.r, t_next);
      for (int d = 0; d < 3; ++d) s.v[d] = half[d] + 0.5 * h * a[d];
      s.t = t_next;

      const double radius = norm3(s.r);
      if (!(radius <= options.escape_radius)) {
        out.samples.push_back(s);
        out.lost = true;
        out.lost_at = s.t;
        return out;
      }
      if ((k + 1) % stride == 0 || k + 1 == steps) out.samples.push_back(s);
    }
  }
  return out;
}

SecularSamples secular_samples(const Trajectory& trajectory, double t_begin, double t_end, double rf_period) {
  if (!(rf_period > 0.0)) throw ConfigError("RF period must be > 0");
  if (!(t_end - t_begin > rf_period)) throw ConfigError("averaging window shorter than one RF period");
  std::vector<double> t, x, y, vx, vy;
  for (const auto& s : trajectory.samples) {
    if (s.t < t_begin - 1e-15 || s.t > t_end + 1e-15) continue;
    // The sample list can hold the same boundary time twice only if a phase has zero length.
    if (!t.empty() && s.t <= t.back()) continue;
    t.push_back(s.t);
    x.push_back(s.r[0]);
    y.push_back(s.r[1]);
    vx.push_back(s.v[0]);
    vy.push_back(s.v[1]);
  }
  if (t.size() < 16) throw ConfigError("too few trajectory samples in the averaging window");
  const auto cx = cumulative(t, x);
  const auto cy = cumulative(t, y);
  const auto cvx = cumulative(t, vx);
  const auto cvy = cumulative(t, vy);

  SecularSamples out;
  const double half = 0.5 * rf_period;
  for (double tj : t) {
    if (tj - half < t.front() || tj + half > t.back()) continue;
    auto avg = [&](const std::vector<double>& c) {
      return (interpolate(t, c, tj + half) - interpolate(t, c, tj - half)) / rf_period;
    };
    out.t.push_back(tj);
    out.x.push_back(avg(cx));
    out.y.push_back(avg(cy));
    out.vx.push_back(avg(cvx));
    out.vy.push_back(avg(cvy));
  }
  return out;
}

double secular_invariant(const Trajectory& trajectory, double t_begin, double t_end, double omega, double rf_period,
                         double mass) {
  if (!(omega > 0.0) || !(mass > 0.0)) throw ConfigError("secular invariant needs omega > 0 and mass > 0");
  const double needed = 3.0 * kTwoPi / omega + rf_period;
  if (t_end - t_begin < needed) {
    std::ostringstream msg;
    msg << "window of " << (t_end - t_begin) << " s is too short: need 3 secular periods plus one RF period ("
        << needed << " s)";
    throw ConfigError(msg.str());
  }
  const auto s = secular_samples(trajectory, t_begin, t_end, rf_period);
  const double arg = 0.5 * omega * rf_period;
  const double sinc = std::sin(arg) / arg;
  double energy = 0.0;
  for (std::size_t j = 0; j < s.t.size(); ++j) {
    energy += 0.5 * mass * (s.vx[j] * s.vx[j] + s.vy[j] * s.vy[j]) +
              0.5 * mass * omega * omega * (s.x[j] * s.x[j] + s.y[j] * s.y[j]);
  }
  energy /= static_cast<double>(s.t.size());
  return energy / (sinc * sinc) / omega;
}

EllipseFit ellipse_fit(std::span<const double> u, std::span<const double> w) {
  if (u.size() != w.size() || u.size() < 5) throw NumericalError("ellipse fit needs at least 5 paired samples");
  double su = 0.0;
  double sw = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    su = std::max(su, std::abs(u[i]));
    sw = std::max(sw, std::abs(w[i]));
  }
  if (!(su > 0.0) || !(sw > 0.0)) throw NumericalError("ellipse fit: samples are collinear with an axis");

  const auto n = static_cast<Eigen::Index>(u.size());
  Eigen::MatrixXd design(n, 5);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double a = u[static_cast<std::size_t>(i)] / su;
    const double b = w[static_cast<std::size_t>(i)] / sw;
    design.row(i) << a * a, a * b, b * b, a, b;
  }
  const Eigen::VectorXd rhs = Eigen::VectorXd::Ones(n);
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
  if (qr.rank() < 5) throw NumericalError("ellipse fit: degenerate samples");
  const Eigen::VectorXd c = qr.solve(rhs);

  const double A = c(0) / (su * su);
  const double B = c(1) / (su * sw);
  const double C = c(2) / (sw * sw);
  const double D = c(3) / su;
  const double E = c(4) / sw;
  const double det = A * C - 0.25 * B * B;
  if (!(det > 0.0)) throw NumericalError("ellipse fit: samples do not trace an ellipse");

  EllipseFit fit;
  // Centre solves 2 Q c = -(D, E).
  fit.centre = {(-0.5 * D * C + 0.25 * B * E) / det, (-0.5 * E * A + 0.25 * B * D) / det};
  const double cu = fit.centre[0];
  const double cw = fit.centre[1];
  const double level = 1.0 + A * cu * cu + B * cu * cw + C * cw * cw;
  const double mean = 0.5 * (A + C);
  const double diff = std::hypot(0.5 * (A - C), 0.5 * B);
  const double l_small = mean - diff;
  const double l_large = mean + diff;
  if (!(level > 0.0) || !(l_small > 0.0)) throw NumericalError("ellipse fit: samples do not trace an ellipse");
  fit.semi_major = std::sqrt(level / l_small);
  fit.semi_minor = std::sqrt(level / l_large);

  if ((fit.semi_major - fit.semi_minor) / fit.semi_major < 1e-3) {
    fit.angle = 0.0;
  } else {
    // Eigenvector of the smaller eigenvalue of [[A, B/2], [B/2, C]].
    const Eigen::Vector2d v1(0.5 * B, l_small - A);
    const Eigen::Vector2d v2(l_small - C, 0.5 * B);
    const Eigen::Vector2d v = (v1.norm() >= v2.norm()) ? v1 : v2;
    double angle = std::atan2(v(1), v(0));
    if (angle > 0.5 * std::numbers::pi) angle -= std::numbers::pi;
    if (angle <= -0.5 * std::numbers::pi) angle += std::numbers::pi;
    fit.angle = angle;
  }
  return fit;
}

ControlSequence build_sequence(const SequenceSpec& spec) {
  if (!(spec.rf > 0.0)) throw ConfigError("rf frequency must be > 0");
  if (!(spec.settle_before > 0.0) || !(spec.settle_after > 0.0)) throw ConfigError("settle times must be > 0");
  const double period = kTwoPi / spec.rf;
  auto whole = [period](double t) { return std::ceil(t / period - 1e-9) * period; };
  const double w0 = endpoint_omega(spec.protocol, true);
  const double wf = endpoint_omega(spec.protocol, false);
  std::vector<ControlSequence::Phase> phases;
  phases.emplace_back(RfPhase{whole(spec.settle_before), w0, spec.rf, spec.axial});
  phases.emplace_back(ShortcutPhase{spec.protocol, spec.axial, spec.keep_static_axial});
  phases.emplace_back(RfPhase{whole(spec.settle_after), wf, spec.rf, spec.axial});
  return ControlSequence(std::move(phases), spec.switching);
}

IonState secular_initial_state(const SequenceSpec& spec, double amplitude, double ellipticity, double z0,
                               double phi) {
  const double w0 = endpoint_omega(spec.protocol, true);
  const double q = 2.0 * std::numbers::sqrt2 * w0 / spec.rf;
  const double theta = spec.switching.rf_phase;
  const double dress = 1.0 + 0.5 * q * std::cos(theta);
  const double dress_rate = -0.5 * q * spec.rf * std::sin(theta);
  const double X = amplitude * std::cos(phi);
  const double dX = -w0 * amplitude * std::sin(phi);
  const double Y = ellipticity * amplitude * std::sin(phi);
  const double dY = w0 * ellipticity * amplitude * std::cos(phi);
  // First-order Floquet solution x = X (1 + q/2 cos) - (q / rf) X' sin; the second
  // term carries an O(q) share of the velocity.
  const double shift = -q / spec.rf * std::sin(theta);
  const double vel = 1.0 - 0.5 * q * std::cos(theta);
  IonState s;
  s.r = {X * dress + dX * shift, Y * dress + dY * shift, z0};
  s.v = {dX * vel + X * dress_rate, dY * vel + Y * dress_rate, 0.0};
  return s;
}

RunMetrics analyze_run(const Trajectory& trajectory, const ControlSequence& sequence, const SequenceSpec& spec) {
  RunMetrics m;
  m.lost = trajectory.lost;
  if (m.lost) return m;
  const std::size_t last = sequence.size() - 1;
  const auto& pre = std::get<RfPhase>(sequence.phases().front());
  const auto& post = std::get<RfPhase>(sequence.phases().back());
  const double ramp_pre = sequence.switching().ramp_cycles * pre.rf_period();
  const double ramp_post = sequence.switching().ramp_cycles * post.rf_period();
  const double a0 = sequence.start(0);
  const double a1 = sequence.end(0) - ramp_pre;
  const double b0 = sequence.start(last) + ramp_post;
  const double b1 = sequence.end(last);

  m.invariant_before = secular_invariant(trajectory, a0, a1, pre.secular, pre.rf_period(), spec.mass);
  m.invariant_after = secular_invariant(trajectory, b0, b1, post.secular, post.rf_period(), spec.mass);
  m.invariant_ratio = m.invariant_after / m.invariant_before;

  const auto before = secular_samples(trajectory, a0, a1, pre.rf_period());
  const auto after = secular_samples(trajectory, b0, b1, post.rf_period());
  m.ellipse_before = ellipse_fit(before.x, before.y);
  m.ellipse_after = ellipse_fit(after.x, after.y);
  m.tilt_deg = fold_tilt_deg(m.ellipse_before.angle, m.ellipse_after.angle);
  return m;
}

double thermal_rms_radius(double omega, double temperature, double mass) {
  if (!(omega > 0.0) || !(temperature > 0.0) || !(mass > 0.0)) {
    throw ConfigError("thermal radius needs omega, temperature and mass > 0");
  }
  return std::sqrt(kBoltzmann * temperature / (mass * omega * omega));
}

EnsembleResult run_ensemble(const SequenceSpec& spec, const EnsembleOptions& options) {
  if (options.members == 0) throw ConfigError("ensemble needs at least one member");
  const ControlSequence sequence = build_sequence(spec);
  const double w0 = endpoint_omega(spec.protocol, true);
  const double amplitude = options.amplitude > 0.0 ? options.amplitude : thermal_rms_radius(w0, 2e-3, spec.mass);

  EnsembleResult out;
  out.warnings = sequence.warnings();
  out.members.resize(options.members);
  std::vector<std::optional<Trajectory>> kept(options.members);
  parallel_for(options.members, options.threads, [&](std::size_t k) {
    const double phi = std::numbers::pi * static_cast<double>(k) / static_cast<double>(options.members);
    const IonState s0 = secular_initial_state(spec, amplitude, options.ellipticity, options.z0, phi);
    Trajectory traj = simulate(sequence, s0, options.sim);
    out.members[k] = analyze_run(traj, sequence, spec);
    if (k == 0 && options.keep_first_trajectory) kept[0] = std::move(traj);
  });
  out.first_trajectory = std::move(kept[0]);

  double ratio_sum = 0.0;
  double tilt_sq = 0.0;
  for (const auto& m : out.members) {
    out.any_lost = out.any_lost || m.lost;
    ratio_sum += m.invariant_ratio;
    tilt_sq += m.tilt_deg * m.tilt_deg;
    out.max_tilt_deg = std::max(out.max_tilt_deg, m.tilt_deg);
  }
  const auto n = static_cast<double>(out.members.size());
  out.mean_ratio = ratio_sum / n;
  out.rms_tilt_deg = std::sqrt(tilt_sq / n);
  return out;
}

}  // namespace sta

#include "qpump/classical.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

#include <boost/numeric/odeint.hpp>
#include <fmt/core.h>

#include "qpump/errors.hpp"

namespace qpump {

void PlowSpec::validate() const {
  if (!(V > 0)) throw PumpError(ErrorKind::InvalidSpec, "barrier height must be positive");
  if (!(V > 0.5 * v0 * v0)) throw PumpError(ErrorKind::InvalidSpec, "barrier height must exceed v0^2/2");
  if (!(Tw > 0)) throw PumpError(ErrorKind::InvalidSpec, "motion window must be positive");
}

double PlowSpec::position(double s) const { return v0 * std::clamp(s, -Tw, Tw); }

double PlowSpec::velocity(double s) const { return std::abs(s) < Tw ? v0 : 0.0; }

namespace {

void check_point(const PhaseSpacePoint& p) {
  if (!(p.E > 0)) throw PumpError(ErrorKind::InvalidSpec, "phase-space energy must be positive");
  if (p.channel != 1 && p.channel != 2) throw PumpError(ErrorKind::InvalidSpec, "channel must be 1 or 2");
}

}  // namespace

ScatterResult classical_scatter(const PlowSpec& spec, const PhaseSpacePoint& in, bool record, long max_events) {
  spec.validate();
  check_point(in);
  const double speed = std::sqrt(2 * in.E);
  double v = in.channel == 1 ? speed : -speed;
  // Start well before any possible encounter, on the side of the incoming lead.
  const double reach = std::abs(spec.v0) * spec.Tw + 1.0;
  double s = std::min(in.t, -spec.Tw) - reach / speed - 1.0;
  double x = v * (s - in.t);
  int side = in.channel == 1 ? -1 : 1;

  ScatterResult r;
  r.signature.push_back(in.channel);
  const std::array<double, 4> edges{-std::numeric_limits<double>::infinity(), -spec.Tw, spec.Tw,
                                    std::numeric_limits<double>::infinity()};
  for (;;) {
    // Next encounter: scan barrier segments forward from s.
    bool hit = false;
    double s_hit = 0;
    int seg_hit = 0;
    for (int seg = 0; seg < 3 && !hit; ++seg) {
      const double lo = std::max(edges[seg], s), hi = edges[seg + 1];
      if (!(lo < hi)) continue;
      const double u = seg == 1 ? spec.v0 : 0.0;
      const double rate = v - u;
      if (!(side * rate < 0)) continue;  // moving away or parallel
      const double gap = std::max(0.0, side * (x + v * (lo - s) - spec.position(lo)));
      const double dt = gap / std::abs(rate);
      if (lo + dt <= hi) {
        hit = true;
        s_hit = lo + dt;
        seg_hit = seg;
      }
    }
    if (!hit) break;
    if (r.events >= max_events) {
      r.trapped = true;
      return r;
    }
    x = spec.position(s_hit);
    s = s_hit;
    const double u = seg_hit == 1 ? spec.v0 : 0.0;
    const bool pass = 0.5 * (v - u) * (v - u) > spec.V;
    const double v_new = pass ? v : 2 * u - v;
    if (record) r.history.push_back({s, x, v, v_new, pass});
    r.signature.push_back(2 * seg_hit + (pass ? 1 : 0));
    if (pass) side = -side;
    v = v_new;
    ++r.events;
  }
  if (v == 0.0) {
    r.trapped = true;
    return r;
  }
  r.out.E = 0.5 * v * v;
  r.out.t = s - x / v;
  r.out.channel = v > 0 ? 2 : 1;
  r.energy_shift = r.out.E - in.E;
  r.time_delay = r.out.t - in.t;
  return r;
}

ScatterResult inverse_scatter(const PlowSpec& spec, const PhaseSpacePoint& outgoing) {
  // Time reversal maps the plow to speed −v0 and (E′, t′, j) to an incoming label (E′, −t′, j).
  PlowSpec rev = spec;
  rev.v0 = -spec.v0;
  ScatterResult b = classical_scatter(rev, {outgoing.E, -outgoing.t, outgoing.channel});
  ScatterResult r;
  r.trapped = b.trapped;
  r.events = b.events;
  r.signature = std::move(b.signature);
  if (r.trapped) return r;
  r.out = {b.out.E, -b.out.t, b.out.channel};
  r.energy_shift = outgoing.E - r.out.E;
  r.time_delay = outgoing.t - r.out.t;
  return r;
}

Partition snowplow_partition(const PlowSpec& spec, double E, double t, int direction) {
  spec.validate();
  if (!(E > 0)) throw PumpError(ErrorKind::InvalidSpec, "phase-space energy must be positive");
  if (direction != 1 && direction != -1) throw PumpError(ErrorKind::InvalidSpec, "direction must be +1 or -1");
  // Mirror x → −x turns a plow moving left into one moving right.
  const bool mirrored = spec.v0 < 0;
  const double v0 = std::abs(spec.v0);
  const int dir = mirrored ? -direction : direction;
  const double v = std::sqrt(2 * E);
  const double sV = std::sqrt(2 * spec.V);
  Partition p;
  if (dir > 0) {
    p.t_threshold = spec.Tw - v0 * spec.Tw / v;
    p.critical_energy = std::abs(t) > p.t_threshold ? spec.V : 0.5 * (sV + v0) * (sV + v0);
  } else {
    p.t_threshold = spec.Tw + v0 * spec.Tw / v;
    p.critical_energy = std::abs(t) > p.t_threshold ? spec.V : 0.5 * (sV - v0) * (sV - v0);
  }
  p.transmitted = E > p.critical_energy;
  p.in_channel = direction > 0 ? 1 : 2;
  p.out_channel = p.transmitted ? 3 - p.in_channel : p.in_channel;
  return p;
}

bool near_critical_curve(const PlowSpec& spec, double E, double t, int direction, double margin) {
  const Partition p = snowplow_partition(spec, E, t, direction);
  const double v0 = std::abs(spec.v0);
  const double sV = std::sqrt(2 * spec.V);
  const int dir = spec.v0 < 0 ? -direction : direction;
  const double moving = dir > 0 ? 0.5 * (sV + v0) * (sV + v0) : 0.5 * (sV - v0) * (sV - v0);
  if (std::abs(E - spec.V) <= margin * spec.V || std::abs(E - moving) <= margin * moving) return true;
  // The |t| threshold only separates outcomes when E lies between the two critical energies.
  const double lo = std::min(spec.V, moving), hi = std::max(spec.V, moving);
  return E > lo && E < hi && std::abs(std::abs(t) - p.t_threshold) <= margin * spec.Tw;
}

ClassicalCharge classical_bpt_charge(const PlowSpec& spec, const ThermalState& s, double t0, double t1,
                                     const ClassicalQuadrature& q) {
  spec.validate();
  if (s.zero_temperature()) throw PumpError(ErrorKind::ZeroTemperature, "classical charge needs T > 0");
  if (!(t1 > t0)) throw PumpError(ErrorKind::InvalidSpec, "empty time window");
  const auto g = [&](double E) { return fermi_weight(std::max(E, 0.0), s).rho / (2 * M_PI); };
  const auto dg = [&](double E) { return fermi_weight(E, s).drho / (2 * M_PI); };

  const double half = q.energy_window * s.temperature;
  const double vmax = std::sqrt(2 * (s.mu + half));
  const double shift = 2 * std::abs(spec.v0) * (vmax + std::abs(spec.v0));
  const double lo = std::max(s.mu - half - shift, 1e-9 * s.mu), hi = s.mu + half + shift;
  const Rule er = composite_gauss(lo, hi, q.energy_panels, q.energy_nodes);

  struct Slot {
    std::array<double, 2> direct{}, bpt{};
    int breaks = 0;
  };
  std::vector<Slot> slots(er.size());
  parallel_for(er.size(), [&](std::size_t ie) {
    const double Ep = er.x[ie];
    Slot& out = slots[ie];
    for (int j = 1; j <= 2; ++j) {
      auto sig = [&](double t) { return inverse_scatter(spec, {Ep, t, j}).signature; };
      std::vector<double> edges{t0};
      const double dt = (t1 - t0) / q.time_scan;
      auto prev = sig(t0);
      for (int k = 1; k <= q.time_scan; ++k) {
        const double t = t0 + dt * k;
        auto cur = sig(t);
        if (cur != prev) {
          double a = t - dt, b = t;
          while (b - a > 1e-13 * (t1 - t0)) {
            const double m = 0.5 * (a + b);
            (sig(m) == prev ? a : b) = m;
          }
          edges.push_back(0.5 * (a + b));
          ++out.breaks;
        }
        prev = std::move(cur);
      }
      edges.push_back(t1);
      const Rule tr = composite_gauss(edges, q.time_nodes);
      double direct = 0, bpt = 0;
      for (std::size_t it = 0; it < tr.size(); ++it) {
        const ScatterResult pre = inverse_scatter(spec, {Ep, tr.x[it], j});
        // Labels without a preimage come from bound states, occupied like threshold states.
        const double g_pre = pre.trapped ? g(0.0) : g(pre.out.E);
        direct += tr.w[it] * (g_pre - g(Ep));
        if (!pre.trapped) bpt -= tr.w[it] * dg(Ep) * pre.energy_shift;
      }
      out.direct[j - 1] = er.w[ie] * direct;
      out.bpt[j - 1] = er.w[ie] * bpt;
    }
  });
  ClassicalCharge c;
  for (const auto& sl : slots) {
    for (int j = 0; j < 2; ++j) {
      c.direct[j] += sl.direct[j];
      c.bpt[j] += sl.bpt[j];
    }
    c.breakpoints += sl.breaks;
  }
  for (int j = 0; j < 2; ++j) c.difference[j] = c.direct[j] - c.bpt[j];
  return c;
}

LiouvilleResult liouville_residual(const PlowSpec& spec, const LiouvilleRegion& rg) {
  spec.validate();
  if (!(rg.E_hi > rg.E_lo && rg.E_lo > 0 && rg.t_hi > rg.t_lo))
    throw PumpError(ErrorKind::InvalidSpec, "empty Liouville region");
  const int n = std::max(2, rg.samples);
  const double hE = 1e-6 * rg.E_hi, ht = 1e-6 * spec.Tw;
  // The map must be smooth over the region: one collision pattern everywhere, stencils included.
  const auto reference = inverse_scatter(spec, {rg.E_lo - hE, rg.t_lo - ht, rg.channel}).signature;
  const int fine = 4 * n;
  for (int a = 0; a <= fine; ++a)
    for (int b = 0; b <= fine; ++b) {
      const double E = rg.E_lo - hE + (rg.E_hi - rg.E_lo + 2 * hE) * a / fine;
      const double t = rg.t_lo - ht + (rg.t_hi - rg.t_lo + 2 * ht) * b / fine;
      if (inverse_scatter(spec, {E, t, rg.channel}).signature != reference)
        throw PumpError(ErrorKind::RegionTouchesDiscontinuity,
                        fmt::format("scattering map is discontinuous inside the region near E' = {}, t' = {}", E, t));
    }

  LiouvilleResult res;
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b) {
      const double E = rg.E_lo + (rg.E_hi - rg.E_lo) * a / (n - 1);
      const double t = rg.t_lo + (rg.t_hi - rg.t_lo) * b / (n - 1);
      auto at = [&](double e, double tt) { return inverse_scatter(spec, {e, tt, rg.channel}); };
      const ScatterResult ep = at(E + hE, t), em = at(E - hE, t), tp = at(E, t + ht), tm = at(E, t - ht);
      const double dEdE = (ep.energy_shift - em.energy_shift) / (2 * hE);
      const double dTdt = (tp.time_delay - tm.time_delay) / (2 * ht);
      res.residual = std::max(res.residual, std::abs(dEdE + dTdt));
      res.scale = std::max({res.scale, std::abs(dEdE), std::abs(dTdt)});
      // Preimage (E, t) as a function of (E′, t′).
      const double a11 = (ep.out.E - em.out.E) / (2 * hE), a12 = (tp.out.E - tm.out.E) / (2 * ht);
      const double a21 = (ep.out.t - em.out.t) / (2 * hE), a22 = (tp.out.t - tm.out.t) / (2 * ht);
      res.jacobian_deviation = std::max(res.jacobian_deviation, std::abs(a11 * a22 - a12 * a21 - 1.0));
    }
  return res;
}

namespace {

using State = std::array<double, 2>;  // (x, p)

struct Battery {
  double delta_phi;
  double t_on;
  double frozen_at = 0;
  bool frozen = false;

  double dphi(double x) const {
    if (std::abs(x) >= 1) return 0.0;
    const double w = 1 - x * x;
    return delta_phi * 15.0 / 16.0 * w * w;
  }
  double ddphi(double x) const {
    if (std::abs(x) >= 1) return 0.0;
    return -delta_phi * 15.0 / 4.0 * x * (1 - x * x);
  }
  double clock(double t) const { return (frozen ? frozen_at : t) - t_on; }

  void operator()(const State& y, State& dy, double t) const {
    const double A = clock(t) * dphi(y[0]);
    const double vel = y[1] - A;
    dy[0] = vel;
    dy[1] = vel * clock(t) * ddphi(y[0]);
  }
};

struct Crossing {
  double p_out = 0;
  double t_out = 0;
};

// Integrates from x = −2 at t0 until the particle reaches x = 2 and returns (p, t) there.
Crossing cross(const Battery& sys, double p0, double t0) {
  namespace ode = boost::numeric::odeint;
  auto stepper = ode::make_dense_output(1e-13, 1e-13, ode::runge_kutta_dopri5<State>());
  State y{-2.0, p0};
  stepper.initialize(y, t0, 0.01);
  for (int guard = 0; guard < 1000000; ++guard) {
    stepper.do_step(sys);
    if (stepper.current_state()[0] >= 2.0) {
      // Locate x = 2 on the dense output by bisection.
      double a = stepper.previous_time(), b = stepper.current_time();
      State mid;
      for (int it = 0; it < 80; ++it) {
        const double m = 0.5 * (a + b);
        stepper.calc_state(m, mid);
        (mid[0] < 2.0 ? a : b) = m;
      }
      stepper.calc_state(b, mid);
      return {mid[1], b};
    }
  }
  throw PumpError(ErrorKind::MaxEventsExceeded, "battery trajectory did not cross the region");
}

}  // namespace

BatteryReport classical_battery_demo(double delta_phi, double t_on, double energy, int snapshots) {
  if (!(energy > delta_phi && energy > 0))
    throw PumpError(ErrorKind::InvalidSpec, "particle energy must exceed the potential drop to cross");
  BatteryReport r;
  r.delta_phi = delta_phi;
  r.t_on = t_on;
  r.energy_in = energy;
  const double p0 = std::sqrt(2 * energy);
  Battery sys{delta_phi, t_on};
  const Crossing c = cross(sys, p0, t_on);
  r.energy_out = 0.5 * c.p_out * c.p_out;
  r.energy_shift = r.energy_out - r.energy_in;

  // Frozen snapshots: the particle must leave with its incoming momentum after the free flight time.
  r.snapshots = snapshots;
  for (int k = 0; k < snapshots; ++k) {
    Battery frozen = sys;
    frozen.frozen = true;
    frozen.frozen_at = t_on + 2.0 * k;
    const Crossing f = cross(frozen, p0, 0.0);
    r.static_energy_change = std::max(r.static_energy_change, std::abs(0.5 * f.p_out * f.p_out - energy));
    r.static_time_change = std::max(r.static_time_change, std::abs(f.t_out - 4.0 / p0));
  }
  return r;
}

}  // namespace qpump

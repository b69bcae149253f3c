#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <random>
#include <string>

#include <fmt/core.h>

#include "qpump/classical.hpp"
#include "qpump/config.hpp"
#include "qpump/counting.hpp"
#include "qpump/errors.hpp"
#include "qpump/geometry.hpp"
#include "qpump/models.hpp"
#include "qpump/transport.hpp"

using namespace qpump;

namespace {

const cplx I1(0, 1);

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail += (detail.empty() ? "" : "; ") + what;
    }
  }
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

Mat random_hermitian(int n, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> N;
  Mat A(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) A(i, j) = cplx(N(rng), N(rng));
  return 0.5 * scale * (A + A.adjoint());
}

Mat expi(const Mat& H) {
  Eigen::SelfAdjointEigenSolver<Mat> es(H);
  Eigen::VectorXcd ph(H.rows());
  for (int i = 0; i < H.rows(); ++i) ph(i) = std::exp(I1 * es.eigenvalues()(i));
  return es.eigenvectors() * ph.asDiagonal() * es.eigenvectors().adjoint();
}

ModelSpec uturn_spec() {
  ModelSpec m;
  m.kind = ModelKind::UTurn;
  m.flux.rate = 2 * M_PI;
  return m;
}

// S = exp(i b(t)(H0 + cos 2πt H1 + sin 2πt H2)) on [0, 1], independent of energy.
PumpCycle flat_pulse(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const Mat H0 = random_hermitian(2, rng, 0.5), H1 = random_hermitian(2, rng, 0.5),
            H2 = random_hermitian(2, rng, 0.5);
  PumpCycle c;
  c.pulse = true;
  c.evaluate = [=](double, double t) {
    if (t <= 0 || t >= 1) return Mat(Mat::Identity(2, 2));
    const double b = std::pow(std::sin(M_PI * t), 2);
    return expi(b * (H0 + std::cos(2 * M_PI * t) * H1 + std::sin(2 * M_PI * t) * H2));
  };
  return c;
}

PumpCycle battery_pulse(double theta) {
  ModelSpec m;
  m.kind = ModelKind::Battery;
  m.pulse = true;
  m.theta.offset = theta;
  m.phi.bump = 2.0;
  return make_pump(m);
}

Outcome uturn_quantization() {
  Outcome o;
  const auto t0 = std::chrono::steady_clock::now();
  const PumpCycle c = make_pump(uturn_spec());
  QuadratureSpec q;
  q.time_grid = 512;
  double worst = 0;
  for (int j : {0, 1}) {
    const double want = j == 0 ? -1.0 : 1.0;
    const double Q = cycle_charge(c, j, ThermalState{1.0, 0.0}, q).charge;
    worst = std::max(worst, std::abs(Q - want));
    o.require(std::abs(Q - want) < 1e-6, fmt::format("channel {} charge {:.12f}", j + 1, Q));
    std::vector<cplx> ph;
    for (int k = 0; k < 512; ++k) ph.push_back(c(1.0, k / 512.0)(j, j));
    const int w = winding_number(ph).winding;
    o.require(w == (j == 0 ? 1 : -1), fmt::format("channel {} winding {}", j + 1, w));
  }
  const double dt = seconds_since(t0);
  o.require(dt < 1.0, fmt::format("runtime {:.2f} s", dt));
  if (o.pass) o.detail = fmt::format("charges ∓1 within {:.3g}, windings ±1, {:.3f} s", worst, dt);
  return o;
}

Outcome closed_form_currents() {
  Outcome o;
  QuadratureSpec q;
  const ThermalState s{1.0, 0.0};
  double worst = 0;
  auto two = [](ModelKind k) {
    ModelSpec m;
    m.kind = k;
    m.theta.offset = 0.6;
    m.theta.amplitude = 0.25;
    return m;
  };
  ModelSpec sp = two(ModelKind::Snowplow);
  sp.alpha.rate = 1.7;
  sp.alpha.amplitude = 0.4;
  ModelSpec bp = two(ModelKind::Battery);
  bp.phi.rate = 2 * M_PI;
  bp.phi.amplitude = 0.3;
  ModelSpec kp = two(ModelKind::Sink);
  kp.gamma.rate = 3.0;
  kp.gamma.amplitude = 0.5;
  const PumpCycle snow = make_pump(sp), bat = make_pump(bp), sink = make_pump(kp);
  for (int k = 0; k < 16; ++k) {
    const double t = (k + 0.3) / 16;
    const double cs = std::pow(std::cos(drive_value(sp.theta, t, sp)), 2) * drive_rate(sp.alpha, t, sp) / (2 * M_PI);
    const double sb = std::pow(std::sin(drive_value(bp.theta, t, bp)), 2) * drive_rate(bp.phi, t, bp) / (2 * M_PI);
    const double g = drive_rate(kp.gamma, t, kp) / (2 * M_PI);
    worst = std::max({worst, std::abs(bpt_current(snow, 0, t, s, q) + cs), std::abs(bpt_current(snow, 1, t, s, q) - cs),
                      std::abs(bpt_current(bat, 0, t, s, q) - sb), std::abs(bpt_current(bat, 1, t, s, q) + sb),
                      std::abs(bpt_current(sink, 0, t, s, q) + g), std::abs(bpt_current(sink, 1, t, s, q) + g)});
  }
  o.require(worst < 1e-8, fmt::format("max deviation {:.3g}", worst));
  if (o.pass) o.detail = fmt::format("max deviation {:.3g}", worst);
  return o;
}

Outcome bicycle_pump() {
  Outcome o;
  for (int n : {1, 2}) {
    const auto t0 = std::chrono::steady_clock::now();
    ModelSpec m = model_preset(ModelKind::Bicycle);
    m.n = n;
    m.length = n;
    m.height = 1e4;
    m.valve_width = 1e-3;
    const PumpCycle c = make_pump(m);
    const double Q = cycle_charge(c, 0, ThermalState{1.0, 0.0}, QuadratureSpec{}).charge;
    o.require(std::abs(std::abs(Q) - n) < 0.05 * n, fmt::format("n = {} charge {:.4f}", n, Q));
    const auto pts = find_reflectionless_points(m);
    o.require(pts.size() >= static_cast<std::size_t>(n), fmt::format("n = {} reflectionless points {}", n, pts.size()));
    const double dt = seconds_since(t0);
    o.require(dt < 30, fmt::format("n = {} runtime {:.1f} s", n, dt));
    if (o.pass) o.detail += fmt::format("{}n = {}: Q = {:.4f}, {} points", o.detail.empty() ? "" : "; ", n, Q, pts.size());
  }
  return o;
}

Outcome birman_krein_rule() {
  Outcome o;
  double worst = 0;
  for (int n : {2, 3, 4})
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
      const PumpCycle c = random_analytic_cycle(n, 1000 * n + seed);
      worst = std::max(worst, birman_krein_residual(c, ThermalState{1.0, 0.0}, QuadratureSpec{}));
    }
  o.require(worst < 1e-8, fmt::format("max residual {:.3g}", worst));
  if (o.pass) o.detail = fmt::format("60 cycles, max residual {:.3g}", worst);
  return o;
}

Outcome omega_identity_check() {
  Outcome o;
  QuadratureSpec q;
  double worst = 0, rmin = 1e9, rmax = 0;
  for (int n : {2, 3, 4})
    for (std::uint64_t seed = 1; seed <= 3; ++seed) {
      const PumpCycle c = random_analytic_cycle(n, 500 + 10 * n + seed);
      for (double t : {0.15, 0.6}) {
        const OmegaIdentity a = omega_identity(c, 1.0, t, q), b = omega_identity(c, 1.0, t, q, 0.5);
        worst = std::max(worst, a.residual);
        rmin = std::min(rmin, a.residual / b.residual);
        rmax = std::max(rmax, a.residual / b.residual);
      }
    }
  o.require(worst < q.omega_identity_tol, fmt::format("max residual {:.3g}", worst));
  o.require(rmin >= 3.5 && rmax <= 4.5, fmt::format("halving ratio in [{:.2f}, {:.2f}]", rmin, rmax));
  if (o.pass) o.detail = fmt::format("max residual {:.3g}, halving ratio {:.2f}..{:.2f}", worst, rmin, rmax);
  return o;
}

Outcome dissipation_bound() {
  Outcome o;
  QuadratureSpec q;
  const ThermalState s{1.0, 0.0};
  double violation = 0;
  for (std::uint64_t seed = 1; seed <= 50; ++seed) {
    const PumpCycle c = random_analytic_cycle(2 + seed % 3, 7000 + seed);
    for (double t : {0.1, 0.45, 0.8})
      for (int j = 0; j < c.n_channels; ++j) {
        const double cur = bpt_current(c, j, t, s, q);
        violation = std::max(violation, M_PI * cur * cur - dissipation_current(c, j, t, s, q));
      }
  }
  o.require(violation <= 1e-10, fmt::format("bound violated by {:.3g}", violation));
  const PumpCycle opt = make_pump(model_preset(ModelKind::Optimal));
  double gap = 0;
  for (int k = 0; k < 64; ++k)
    for (int j : {0, 1}) {
      const double t = (k + 0.5) / 64, cur = bpt_current(opt, j, t, s, q);
      gap = std::max(gap, std::abs(dissipation_current(opt, j, t, s, q) - M_PI * cur * cur));
    }
  o.require(gap < 1e-8, fmt::format("optimal gap {:.3g}", gap));
  if (o.pass) o.detail = fmt::format("max violation {:.3g}, optimal gap {:.3g}", violation, gap);
  return o;
}

Outcome stokes_brouwer() {
  Outcome o;
  double worst = 0;
  std::mt19937_64 rng(77);
  for (int trial = 0; trial < 10; ++trial) {
    const Mat H0 = random_hermitian(2, rng), H1 = random_hermitian(2, rng, 0.6), H2 = random_hermitian(2, rng, 0.6);
    auto gen = [=](double t) { return Mat(H0 + std::cos(2 * M_PI * t) * H1 + std::sin(2 * M_PI * t) * H2); };
    PumpCycle c;
    c.evaluate = [=](double, double t) { return expi(gen(t)); };
    // the disk u ∈ [0, 1] contracts the loop to the identity
    SurfacePatch p;
    p.smatrix = [=](double u, double v) { return expi(u * gen(v)); };
    for (int j : {0, 1}) {
      const double line = line_charge(c, j, 1.0, 1024);
      const double surf = charge_via_stokes(p, j, 1e-8).charge;
      worst = std::max(worst, std::abs(line - surf));
    }
  }
  o.require(worst < 1e-6, fmt::format("line vs surface {:.3g}", worst));

  ModelSpec m;
  m.kind = ModelKind::Snowplow;
  m.theta.offset = 0.6;
  m.theta.amplitude = 0.3;
  m.xi.amplitude = 0.2;
  m.xi.phase = M_PI / 2;
  const PumpCycle snow = make_pump(m);
  double cyl = 0;
  for (int j : {0, 1})
    cyl = std::max(cyl, std::abs(cylinder_charge(snow, j, 1.0, QuadratureSpec{}) -
                                 cycle_charge(snow, j, ThermalState{1.0, 0.0}, QuadratureSpec{}).charge));
  o.require(cyl < 1e-4, fmt::format("cylinder vs cycle {:.3g}", cyl));
  if (o.pass) o.detail = fmt::format("line vs surface {:.3g}, cylinder vs cycle {:.3g}", worst, cyl);
  return o;
}

Outcome flow_constants() {
  Outcome o;
  const double he = h_integral(FlowKind::Entropy), hn = h_integral(FlowKind::Noise);
  o.require(std::abs(he - 0.5) < 1e-10, fmt::format("entropy integral {:.15f}", he));
  o.require(std::abs(hn - 1.0 / 6.0) < 1e-10, fmt::format("noise integral {:.15f}", hn));
  // S = exp(itH) S0 has ℰ = −H exactly
  std::mt19937_64 rng(31);
  QuadratureSpec q;
  const ThermalState s{1.0, 0.05};
  double worst = 0;
  for (int trial = 0; trial < 5; ++trial) {
    const Mat H = random_hermitian(2, rng, 0.5), S0 = expi(random_hermitian(2, rng));
    PumpCycle c;
    c.evaluate = [=](double, double t) { return Mat(expi(t * H) * S0); };
    const double e12 = std::norm(H(0, 1));
    for (double t : {0.2, 0.7})
      for (FlowKind k : {FlowKind::Entropy, FlowKind::Noise}) {
        const double ref = s.beta() / (2 * M_PI * flow_constant(k)) * e12;
        for (int j : {0, 1})
          worst = std::max(worst, std::abs(entropy_noise_current(c, j, t, s, q, k) - ref) / std::max(1.0, ref));
      }
  }
  o.require(worst < 1e-10, fmt::format("flow current deviation {:.3g}", worst));
  if (o.pass) o.detail = fmt::format("|∫h − exact| ≤ {:.2g}, flow deviation {:.3g}",
                                     std::max(std::abs(he - 0.5), std::abs(hn - 1.0 / 6.0)), worst);
  return o;
}

Outcome noise_consistency() {
  Outcome o;
  QuadratureSpec q;
  double flow_dev = 0, cum_dev = 0;
  for (const PumpCycle& c : {battery_pulse(0.7), flat_pulse(5), flat_pulse(6)})
    for (double T : {0.01, 0.05}) {
      const ThermalState s{1.0, T};
      const Rule tr = time_rule(c, q.time_grid);
      for (int j : {0, 1}) {
        const double shot = shot_noise_finite_T(c, j, s, q);
        double flow = 0;
        for (std::size_t i = 0; i < tr.size(); ++i)
          flow += tr.w[i] * entropy_noise_current(c, j, tr.x[i], s, q, FlowKind::Noise);
        flow_dev = std::max(flow_dev, std::abs(shot - flow) / std::max(1.0, std::abs(shot)));
        const double direct = second_cumulant_direct(c, j, s, q);
        cum_dev = std::max(cum_dev, std::abs(jn_noise(c, j, s, q) + shot - direct) / std::abs(direct));
      }
    }
  o.require(flow_dev < 1e-10, fmt::format("shot vs noise current {:.3g}", flow_dev));
  o.require(cum_dev < 1e-6, fmt::format("second cumulant relative {:.3g}", cum_dev));
  if (o.pass) o.detail = fmt::format("shot vs noise current {:.3g}, second cumulant relative {:.3g}", flow_dev, cum_dev);
  return o;
}

Outcome zero_t_shot_noise() {
  Outcome o;
  const auto t0 = std::chrono::steady_clock::now();
  QuadratureSpec q;
  q.shot_grid = 1024;

  ModelSpec ph;
  ph.kind = ModelKind::Sink;
  ph.pulse = true;
  ph.gamma.bump = 2.5;
  ModelSpec op;
  op.kind = ModelKind::Optimal;
  op.pulse = true;
  op.xi.bump = 0.4;
  double trivial = 0;
  for (const PumpCycle& c : {make_pump(ph), make_pump(op)})
    for (int j : {0, 1}) trivial = std::max(trivial, std::abs(shot_noise_zero_T(c, j, 1.0, q).value));
  o.require(trivial < 1e-8, fmt::format("parallel/optimal value {:.3g}", trivial));

  const PumpCycle c = random_pulse_cycle(2, 21);
  double diag = 0;
  for (double t : {0.2, 0.5, 0.83})
    for (int j : {0, 1}) {
      const Mat e = energy_shift(c, 1.0, t, q);
      const double ref = energy_shift_variance(e, j) / (4 * M_PI * M_PI);
      const double d = 1e-4;
      diag = std::max(diag, std::abs(shot_integrand(c, j, 1.0, t - d / 2, t + d / 2) - ref) / ref);
    }
  o.require(diag < 1e-6, fmt::format("diagonal limit relative {:.3g}", diag));

  double stab = 0;
  for (int j : {0, 1}) {
    const double base = shot_noise_zero_T(c, j, 1.0, q).value;
    QuadratureSpec half = q, fine = q;
    half.eps_diag_rel /= 2;
    fine.shot_grid *= 2;
    stab = std::max({stab, std::abs(shot_noise_zero_T(c, j, 1.0, half).value - base) / base,
                     std::abs(shot_noise_zero_T(c, j, 1.0, fine).value - base) / base});
  }
  o.require(stab < 1e-6, fmt::format("refinement change {:.3g}", stab));
  const double dt = seconds_since(t0);
  o.require(dt < 60, fmt::format("runtime {:.1f} s", dt));
  if (o.pass)
    o.detail = fmt::format("trivial {:.3g}, diagonal {:.3g}, refinement {:.3g}, {:.1f} s", trivial, diag, stab, dt);
  return o;
}

Outcome classical_snowplow() {
  Outcome o;
  int disagreements = 0, tested = 0;
  for (double v0 : {0.1, -0.1, 0.3}) {
    const PlowSpec s{1.0, v0, 1.0};
    std::mt19937_64 rng(2024);
    std::uniform_real_distribution<double> UE(0.5, 1.6), Ut(-3.0, 3.0);
    for (int k = 0; k < 10000; ++k) {
      const double E = UE(rng), t = Ut(rng);
      const int dir = k % 2 == 0 ? 1 : -1;
      if (near_critical_curve(s, E, t, dir, 1e-6)) continue;
      ++tested;
      const Partition p = snowplow_partition(s, E, t, dir);
      const ScatterResult r = classical_scatter(s, {E, t, p.in_channel});
      if (r.trapped || r.out.channel != p.out_channel) ++disagreements;
    }
  }
  o.require(disagreements == 0, fmt::format("{} disagreements in {} points", disagreements, tested));

  const double v0 = 0.01 * std::sqrt(2.0);
  const ClassicalCharge cc = classical_bpt_charge(PlowSpec{1.3, v0, 1.0}, ThermalState{1.0, 0.02}, -3.0, 3.0);
  double rel = 0;
  for (int j : {0, 1}) rel = std::max(rel, std::abs(cc.direct[j] - cc.bpt[j]) / std::abs(cc.direct[j]));
  o.require(rel < 0.05, fmt::format("direct vs BPT {:.3g}", rel));

  const BatteryReport b = classical_battery_demo(0.1, 0.0);
  o.require(std::abs(b.energy_shift + 0.1) < 1e-8, fmt::format("battery shift {:.12f}", b.energy_shift));
  o.require(b.static_energy_change < 1e-8 && b.static_time_change < 1e-8,
            fmt::format("frozen maps move ({:.3g}, {:.3g})", b.static_energy_change, b.static_time_change));
  if (o.pass)
    o.detail = fmt::format("0 disagreements in {} points, direct vs BPT {:.3g}, battery shift {:.10f}", tested, rel,
                           b.energy_shift);
  return o;
}

Outcome galilean() {
  Outcome o;
  ModelSpec m;
  m.kind = ModelKind::Snowplow;
  double worst = 0;
  for (double theta : {0.0, 0.3, M_PI / 4, 1.2}) {
    m.theta.offset = theta;
    const double mu = 1.0, kF = std::sqrt(2 * mu);
    worst = std::max(worst, galilean_check(m, mu, 1e-3 * kF, QuadratureSpec{}).residual);
  }
  o.require(worst < 1e-5, fmt::format("residual {:.3g}", worst));
  if (o.pass) o.detail = fmt::format("max residual {:.3g}", worst);
  return o;
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"U-turn quantization", uturn_quantization},
      {"two-channel closed-form currents", closed_form_currents},
      {"bicycle pump", bicycle_pump},
      {"Birman-Krein sum rule", birman_krein_rule},
      {"curvature identity", omega_identity_check},
      {"dissipation bound", dissipation_bound},
      {"line and surface charge", stokes_brouwer},
      {"entropy and noise constants", flow_constants},
      {"noise consistency", noise_consistency},
      {"zero-temperature shot noise", zero_t_shot_noise},
      {"classical snowplow", classical_snowplow},
      {"Galilean cross-check", galilean},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = e.what();
    }
    if (!o.pass) ++failed;
    fmt::print("{} criterion {:2d} {}: {} [{:.2f} s]\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first,
               o.detail, seconds_since(t0));
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}

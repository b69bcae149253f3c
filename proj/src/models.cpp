#include "qpump/models.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include <boost/math/tools/minima.hpp>
#include <fmt/format.h>

#include "qpump/errors.hpp"

namespace qpump {

void validate(const PiecewisePotential& p) {
  if (p.values.empty() || p.breakpoints.size() != p.values.size() + 1)
    throw PumpError(ErrorKind::InvalidSpec, "potential needs m >= 1 values and m + 1 breakpoints");
  for (std::size_t i = 0; i + 1 < p.breakpoints.size(); ++i)
    if (!(p.breakpoints[i] < p.breakpoints[i + 1]))
      throw PumpError(ErrorKind::InvalidSpec, "potential breakpoints must increase");
  for (double v : p.values)
    if (!std::isfinite(v)) throw PumpError(ErrorKind::InvalidSpec, "potential values must be finite");
  if (!(p.mass > 0)) throw PumpError(ErrorKind::InvalidSpec, "mass must be positive");
}

namespace {

using Real2 = Eigen::Matrix2d;

constexpr double kOverflow = 700.0;

// Propagator of (ψ, ψ') across width w with 2m(E − V) = d.
Real2 propagator(double d, double w) {
  Real2 P;
  if (d > 0) {
    const double q = std::sqrt(d);
    const double c = std::cos(q * w), s = std::sin(q * w);
    P << c, s / q, -q * s, c;
  } else if (d < 0) {
    const double kap = std::sqrt(-d);
    const double c = std::cosh(kap * w), s = std::sinh(kap * w);
    P << c, s / kap, kap * s, c;
  } else {
    P << 1, w, 0, 1;
  }
  return P;
}

}  // namespace

Mat transfer_matrix_smatrix(const PiecewisePotential& p, double E) {
  validate(p);
  if (!(E > 0)) throw PumpError(ErrorKind::InvalidSpec, "transfer matrix needs E > 0");
  for (double v : p.values)
    if (std::abs(E - v) < 1e-12) E += 1e-10;  // band edge: nudge off the degenerate point
  const double m = p.mass;
  const double k = std::sqrt(2 * m * E);
  const cplx ik(0, k);
  const std::size_t n = p.values.size();

  std::vector<double> d(n), w(n);
  int first_opaque = -1, last_opaque = -1;
  for (std::size_t i = 0; i < n; ++i) {
    d[i] = 2 * m * (E - p.values[i]);
    w[i] = p.breakpoints[i + 1] - p.breakpoints[i];
    if (d[i] < 0 && std::sqrt(-d[i]) * w[i] > kOverflow) {
      if (first_opaque < 0) first_opaque = static_cast<int>(i);
      last_opaque = static_cast<int>(i);
    }
  }

  Mat S(2, 2);
  if (first_opaque >= 0) {
    // Opaque barrier: decaying solutions inside, no transmission.
    Eigen::Vector2d left(1.0, -std::sqrt(-d[first_opaque]));
    for (int i = first_opaque - 1; i >= 0; --i) left = propagator(d[i], -w[i]) * left;
    Eigen::Vector2d right(1.0, std::sqrt(-d[last_opaque]));
    for (std::size_t i = last_opaque + 1; i < n; ++i) right = propagator(d[i], w[i]) * right;
    const cplx r = (ik * left(0) - left(1)) / (left(1) + ik * left(0));
    const cplx rp = -(right(1) + ik * right(0)) / (right(1) - ik * right(0));
    S << r, 0.0, 0.0, rp;
    return S;
  }

  Real2 M = Real2::Identity();
  for (std::size_t i = 0; i < n; ++i) M = propagator(d[i], w[i]) * M;
  const cplx A = M(1, 0) - ik * M(0, 0);
  const cplx B = ik * M(1, 1) + k * k * M(0, 1);
  const cplx r = -(A + B) / (A - B);
  const cplx t = -2.0 * ik / (A - B);
  const cplx rp = t * (M(0, 0) - ik * M(0, 1)) - 1.0;
  S << r, t, t, rp;
  return S;
}

const char* to_string(ModelKind k) {
  switch (k) {
    case ModelKind::Snowplow: return "snowplow";
    case ModelKind::Battery: return "battery";
    case ModelKind::Sink: return "sink";
    case ModelKind::UTurn: return "uturn";
    case ModelKind::Optimal: return "optimal";
    case ModelKind::Bicycle: return "bicycle";
    case ModelKind::CustomTwoChannel: return "custom-two-channel";
  }
  return "unknown";
}

std::vector<std::string> model_kinds() {
  return {"snowplow", "battery", "sink", "uturn", "optimal", "bicycle", "custom-two-channel"};
}

ModelKind parse_model_kind(const std::string& s) {
  for (auto k : {ModelKind::Snowplow, ModelKind::Battery, ModelKind::Sink, ModelKind::UTurn, ModelKind::Optimal,
                 ModelKind::Bicycle, ModelKind::CustomTwoChannel})
    if (s == to_string(k)) return k;
  throw PumpError(ErrorKind::InvalidSpec, fmt::format("unknown model kind '{}'", s));
}

double drive_value(const Drive& d, double t, const ModelSpec& s) {
  double v = d.offset + d.rate * t + d.amplitude * std::sin(2 * M_PI * t / s.period + d.phase);
  if (d.bump != 0 && s.pulse && t >= s.t_a && t <= s.t_b) {
    const double u = std::sin(M_PI * (t - s.t_a) / (s.t_b - s.t_a));
    v += d.bump * u * u;
  }
  return v;
}

double drive_rate(const Drive& d, double t, const ModelSpec& s) {
  double v = d.rate + d.amplitude * 2 * M_PI / s.period * std::cos(2 * M_PI * t / s.period + d.phase);
  if (d.bump != 0 && s.pulse && t >= s.t_a && t <= s.t_b) {
    const double L = s.t_b - s.t_a;
    v += d.bump * M_PI / L * std::sin(2 * M_PI * (t - s.t_a) / L);
  }
  return v;
}

void validate(const ModelSpec& s) {
  auto bad = [](const std::string& m) { throw PumpError(ErrorKind::InvalidSpec, m); };
  if (!(s.period > 0)) bad("period must be positive");
  if (!(s.mu > 0)) bad("mu must be positive");
  if (s.pulse && !(s.t_a < s.t_b)) bad("pulse window needs t_a < t_b");
  if (s.kind == ModelKind::Bicycle) {
    if (s.n < 1) bad("bicycle n must be a positive integer");
    if (!(s.length > 0)) bad("bicycle length L must be positive");
    if (!(s.height > 0)) bad("bicycle valve height M must be positive");
    if (!(s.valve_width > 0)) bad("bicycle valve width delta must be positive");
    if (!(s.valve_width < s.length)) bad("bicycle valve width must be below L");
    if (s.mu != 1.0) bad("the bicycle pump works in units with mu = 1 and k_F = pi");
  }
  if (s.kind == ModelKind::UTurn && !(s.ell > 0)) bad("uturn loop length must be positive");
}

Dispersion bicycle_dispersion() { return Dispersion{M_PI * M_PI / 2}; }

PiecewisePotential bicycle_potential(double a, double b, const ModelSpec& s) {
  PiecewisePotential p;
  const double L = s.length, dl = s.valve_width;
  p.breakpoints = {0.0, dl, L, L + dl};
  p.values = {a * s.height, s.plateau * b, (1 - a) * s.height};
  p.mass = bicycle_dispersion().mass;
  return p;
}

std::pair<double, double> bicycle_path(double s) {
  s -= std::floor(s);
  const double u = 4 * (s - std::floor(4 * s) / 4);
  switch (static_cast<int>(std::floor(4 * s))) {
    case 0: return {0.0, 1.0 - u};
    case 1: return {u, 0.0};
    case 2: return {1.0, u};
    default: return {1.0 - u, 1.0};
  }
}

PumpCycle make_pump(const ModelSpec& spec) {
  validate(spec);
  PumpCycle c;
  c.n_channels = 2;
  c.period = spec.period;
  c.pulse = spec.pulse;
  c.t_a = spec.t_a;
  c.t_b = spec.t_b;
  c.label = spec.label.empty() ? to_string(spec.kind) : spec.label;
  const ModelSpec s = spec;
  switch (spec.kind) {
    case ModelKind::UTurn: {
      const Dispersion d = c.dispersion;
      c.evaluate = [s, d](double E, double t) {
        const double k = d.k(E), F = drive_value(s.flux, t, s);
        Mat S = Mat::Zero(2, 2);
        S(0, 0) = std::exp(cplx(0, k * s.ell + F));
        S(1, 1) = std::exp(cplx(0, k * s.ell - F));
        return S;
      };
      break;
    }
    case ModelKind::Optimal: {
      const Dispersion d = c.dispersion;
      const double kF = d.k(s.mu);
      // The plow phase is frozen at k_F, so S(E, t) stays periodic off the Fermi energy.
      c.evaluate = [s, kF](double, double t) {
        const double xi = drive_value(s.xi, t, s);
        TwoChannelParams p{drive_value(s.theta, t, s), drive_value(s.alpha, t, s) + 2 * kF * xi,
                           drive_value(s.phi, t, s) - 2 * kF * xi, drive_value(s.gamma, t, s)};
        return build_two_channel(p);
      };
      break;
    }
    case ModelKind::Bicycle: {
      c.dispersion = bicycle_dispersion();
      // Valve resonances make S vary on ~1e-3 of the period.
      c.step_scale = 1e-2 * s.period;
      c.evaluate = [s](double E, double t) {
        const auto [a, b] = bicycle_path(t / s.period);
        return transfer_matrix_smatrix(bicycle_potential(a, b, s), E);
      };
      break;
    }
    default: {
      const Dispersion d = c.dispersion;
      c.evaluate = [s, d](double E, double t) {
        const double k = d.k(E);
        TwoChannelParams p{drive_value(s.theta, t, s), drive_value(s.alpha, t, s) + 2 * k * drive_value(s.xi, t, s),
                           drive_value(s.phi, t, s), drive_value(s.gamma, t, s)};
        Mat S = build_two_channel(p);
        if (s.optical_phase) S *= std::exp(cplx(0, k * s.ell));
        return S;
      };
    }
  }
  return c;
}

namespace {

double bicycle_r(const ModelSpec& s, double a, double b) {
  return std::abs(transfer_matrix_smatrix(bicycle_potential(a, b, s), s.mu)(0, 0));
}

struct Sample {
  double b;
  cplx r;
};

void refine(const ModelSpec& s, double a, const Sample& lo, const Sample& hi, int depth, std::vector<Sample>& out) {
  const double dphase = std::abs(std::arg(hi.r * std::conj(lo.r)));
  const double dmod = std::abs(std::abs(hi.r) - std::abs(lo.r));
  if (depth > 0 && hi.b - lo.b > 1e-9 && (dphase > 0.15 || dmod > 0.05)) {
    const double bm = 0.5 * (lo.b + hi.b);
    const Sample mid{bm, transfer_matrix_smatrix(bicycle_potential(a, bm, s), s.mu)(0, 0)};
    refine(s, a, lo, mid, depth - 1, out);
    refine(s, a, mid, hi, depth - 1, out);
    return;
  }
  out.push_back(hi);
}

}  // namespace

std::vector<ReflectionlessPoint> find_reflectionless_points(const ModelSpec& s, double threshold, int a_lines) {
  using boost::math::tools::brent_find_minima;
  const int bits = 40;
  const int coarse = 256;
  std::vector<std::vector<ReflectionlessPoint>> per_line(a_lines);
  parallel_for(a_lines, [&](std::size_t ia) {
    const double a = (ia + 0.5) / a_lines;
    std::vector<Sample> line;
    Sample prev{1e-6, transfer_matrix_smatrix(bicycle_potential(a, 1e-6, s), s.mu)(0, 0)};
    line.push_back(prev);
    for (int k = 1; k <= coarse; ++k) {
      const double b = 1e-6 + (1 - 2e-6) * k / coarse;
      const Sample cur{b, transfer_matrix_smatrix(bicycle_potential(a, b, s), s.mu)(0, 0)};
      refine(s, a, prev, cur, 40, line);
      prev = cur;
    }
    for (std::size_t i = 1; i + 1 < line.size(); ++i) {
      const double m = std::abs(line[i].r);
      if (!(m <= std::abs(line[i - 1].r) && m <= std::abs(line[i + 1].r) && m < 0.95)) continue;
      // Alternate Brent minimizations: b inside the resonance, then a along the valley.
      double bb = line[i].b, aa = a;
      double wb = std::max(line[i + 1].b - line[i - 1].b, 1e-6);
      double best = m;
      for (int it = 0; it < 4; ++it) {
        auto inner = [&](double av, double bc, double w) {
          const double lo = std::max(1e-9, bc - w), hi = std::min(1 - 1e-9, bc + w);
          return brent_find_minima([&](double x) { return bicycle_r(s, av, x); }, lo, hi, bits);
        };
        auto rb = inner(aa, bb, wb);
        bb = rb.first;
        best = rb.second;
        const double wa = 0.25;
        auto ra = brent_find_minima(
            [&](double x) { return inner(x, bb, std::max(wb, 2e-3)).second; }, std::max(1e-6, aa - wa),
            std::min(1 - 1e-6, aa + wa), bits);
        aa = ra.first;
        auto rb2 = inner(aa, bb, std::max(wb, 2e-3));
        bb = rb2.first;
        best = rb2.second;
        wb = std::max(wb / 4, 1e-6);
      }
      if (best < threshold && aa > 0 && aa < 1 && bb > 0 && bb < 1) per_line[ia].push_back({aa, bb, best});
    }
  });
  std::vector<ReflectionlessPoint> all;
  for (const auto& v : per_line)
    for (const auto& p : v) {
      bool dup = false;
      for (auto& q : all)
        if (std::abs(q.a - p.a) < 1e-3 && std::abs(q.b - p.b) < 1e-4) {
          if (p.r < q.r) q = p;
          dup = true;
        }
      if (!dup) all.push_back(p);
    }
  std::sort(all.begin(), all.end(), [](auto& x, auto& y) { return x.b < y.b; });
  return all;
}

double max_transmission(const PumpCycle& c, double mu, int n) {
  std::vector<double> v(n);
  parallel_for(n, [&](std::size_t k) {
    const Mat S = c(mu, c.t_begin() + (c.t_end() - c.t_begin()) * k / n);
    double m = 0;
    for (int i = 0; i < S.rows(); ++i)
      for (int j = 0; j < S.cols(); ++j)
        if (i != j) m = std::max(m, std::norm(S(i, j)));
    v[k] = m;
  });
  return *std::max_element(v.begin(), v.end());
}

GalileanCheck galilean_check(const ModelSpec& snowplow, double mu, double xi_dot, const QuadratureSpec& q) {
  if (snowplow.kind != ModelKind::Snowplow) throw PumpError(ErrorKind::InvalidSpec, "galilean check needs a snowplow");
  ModelSpec moving = snowplow;
  moving.mu = mu;
  moving.xi = Drive{};
  moving.xi.rate = xi_dot;
  ModelSpec rest = moving;
  rest.xi = Drive{};
  const PumpCycle cm = make_pump(moving), cr = make_pump(rest);
  const double t0 = 0.5 * moving.period;
  GalileanCheck g;
  g.bpt = bpt_current(cm, 0, t0, ThermalState{mu, 0.0}, q);
  const Dispersion& d = cr.dispersion;
  const double kF = d.k(mu);
  const double shift = d.mass * xi_dot;  // momentum boost of the comoving frame
  const double lo = std::min(kF - 2 * shift, kF), hi = std::max(kF - 2 * shift, kF);
  const Rule r = composite_gauss(lo, hi, 2, 32);
  double integral = 0;
  for (std::size_t i = 0; i < r.size(); ++i) {
    const double k = r.x[i];
    const double rp = std::norm(cr(d.energy(k + shift), t0)(1, 1));
    integral += r.w[i] * d.dE_dk(k) * rp;
  }
  g.galilean = -(shift >= 0 ? 1.0 : -1.0) * integral / (2 * M_PI);
  g.residual = std::abs(g.bpt - g.galilean);
  return g;
}

namespace {

Mat random_hermitian(int n, std::mt19937_64& rng, double scale) {
  std::normal_distribution<double> N(0.0, scale);
  Mat H(n, n);
  for (int i = 0; i < n; ++i) {
    H(i, i) = N(rng);
    for (int j = i + 1; j < n; ++j) {
      H(i, j) = cplx(N(rng), N(rng));
      H(j, i) = std::conj(H(i, j));
    }
  }
  return H;
}

Mat expi(const Mat& H) {
  Eigen::SelfAdjointEigenSolver<Mat> es(H);
  const Eigen::VectorXcd ph = es.eigenvalues().unaryExpr([](double x) { return std::exp(cplx(0, x)); });
  return es.eigenvectors() * ph.asDiagonal() * es.eigenvectors().adjoint();
}

}  // namespace

PumpCycle random_analytic_cycle(int n, std::uint64_t seed, double period, double scale) {
  std::mt19937_64 rng(seed);
  const Mat H0 = random_hermitian(n, rng, scale), H1 = random_hermitian(n, rng, scale),
            H2 = random_hermitian(n, rng, scale), H3 = random_hermitian(n, rng, scale);
  PumpCycle c;
  c.n_channels = n;
  c.period = period;
  c.label = fmt::format("random-{}ch-{}", n, seed);
  const Dispersion d = c.dispersion;
  const double w = 2 * M_PI / period;
  c.evaluate = [=](double E, double t) {
    return expi(H0 + std::cos(w * t) * H1 + std::sin(w * t) * H2 + d.k(E) * H3);
  };
  return c;
}

PumpCycle random_pulse_cycle(int n, std::uint64_t seed, double t_a, double t_b, double scale) {
  if (!(t_a < t_b)) throw PumpError(ErrorKind::InvalidSpec, "pulse window needs t_a < t_b");
  std::mt19937_64 rng(seed);
  const Mat H0 = random_hermitian(n, rng, scale), H1 = random_hermitian(n, rng, scale),
            H2 = random_hermitian(n, rng, scale), H3 = random_hermitian(n, rng, scale);
  PumpCycle c;
  c.n_channels = n;
  c.pulse = true;
  c.t_a = t_a;
  c.t_b = t_b;
  c.period = t_b - t_a;
  c.label = fmt::format("random-pulse-{}ch-{}", n, seed);
  const Dispersion d = c.dispersion;
  const double w = 2 * M_PI / (t_b - t_a);
  c.evaluate = [=](double E, double t) {
    const double u = std::sin(0.5 * w * (t - t_a));
    return expi(u * u * (H0 + std::cos(w * t) * H1 + std::sin(w * t) * H2 + d.k(E) * H3));
  };
  return c;
}

}  // namespace qpump

#include "qpump/transport.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <boost/math/quadrature/tanh_sinh.hpp>
#include <fmt/format.h>

#include "qpump/errors.hpp"

namespace qpump {

FermiWeight fermi_weight(double E, const ThermalState& s) {
  FermiWeight f;
  if (s.zero_temperature()) {
    f.rho = E < s.mu ? 1.0 : (E > s.mu ? 0.0 : 0.5);
    f.distributional = true;
    return f;
  }
  const double b = s.beta();
  const double x = b * (E - s.mu);
  double rho;
  if (x > 0) {
    const double e = std::exp(-x);
    rho = e / (1.0 + e);
  } else {
    rho = 1.0 / (1.0 + std::exp(x));
  }
  f.rho = rho;
  f.drho = -b * rho * (1.0 - rho);
  f.ddrho = b * b * rho * (1.0 - rho) * (1.0 - 2.0 * rho);
  return f;
}

Rule energy_rule(const ThermalState& s, const QuadratureSpec& q) {
  if (s.zero_temperature()) throw PumpError(ErrorKind::ZeroTemperature, "energy quadrature needs T > 0");
  const double half = q.energy_window * s.temperature;
  const double lo = std::max(s.mu - half, 1e-3 * s.mu);
  return composite_gauss(lo, s.mu + half, q.energy_panels, q.energy_nodes);
}

Rule time_rule(const PumpCycle& c, int n) {
  if (c.pulse) {
    const int per = 16;
    const int panels = std::max(1, n / per);
    return composite_gauss(c.t_a, c.t_b, panels, per);
  }
  Rule r;
  r.x.resize(n);
  r.w.assign(n, c.period / n);
  for (int k = 0; k < n; ++k) r.x[k] = c.period * (k + 0.5) / n;
  return r;
}

std::vector<double> bpt_currents(const PumpCycle& c, double t, const ThermalState& s, const QuadratureSpec& q) {
  const int n = c.n_channels;
  std::vector<double> out(n, 0.0);
  if (s.zero_temperature()) {
    const Mat e = energy_shift(c, s.mu, t, q);
    for (int j = 0; j < n; ++j) out[j] = e(j, j).real() / (2 * M_PI);
    return out;
  }
  const Rule r = energy_rule(s, q);
  for (std::size_t i = 0; i < r.size(); ++i) {
    const double E = r.x[i];
    const FermiWeight f = fermi_weight(E, s);
    const Mat e = energy_shift(c, E, t, q);
    for (int j = 0; j < n; ++j) out[j] -= r.w[i] * f.drho * e(j, j).real() / (2 * M_PI);
  }
  return out;
}

double bpt_current(const PumpCycle& c, int j, double t, const ThermalState& s, const QuadratureSpec& q) {
  return bpt_currents(c, t, s, q).at(j);
}

double dissipation_current(const PumpCycle& c, int j, double t, const ThermalState& s, const QuadratureSpec& q) {
  const Mat e = energy_shift(c, s.mu, t, q);
  return (e * e)(j, j).real() / (4 * M_PI);
}

double flow_constant(FlowKind k) { return k == FlowKind::Entropy ? 2.0 : 6.0; }

double h_function(FlowKind k, double x) {
  if (k == FlowKind::Noise) return x * (1.0 - x);
  if (x <= 0.0 || x >= 1.0) return 0.0;
  return -x * std::log(x) - (1.0 - x) * std::log1p(-x);
}

double h_integral(FlowKind k) {
  // h is symmetric about 1/2; integrating on (0, 1/2] keeps 1 - x away from cancellation.
  boost::math::quadrature::tanh_sinh<double> integrator;
  const double half = integrator.integrate([k](double x) { return h_function(k, x); }, 0.0, 0.5);
  return 2.0 * half;
}

double energy_shift_variance(const Mat& E, int j) {
  const double d = E(j, j).real();
  return (E * E)(j, j).real() - d * d;
}

double entropy_noise_current(const PumpCycle& c, int j, double t, const ThermalState& s, const QuadratureSpec& q,
                             FlowKind kind) {
  if (s.zero_temperature())
    throw PumpError(ErrorKind::ZeroTemperature,
                    "entropy and noise currents are local in time only at T > 0; use the zero-temperature shot noise");
  const Mat e = energy_shift(c, s.mu, t, q);
  return s.beta() / (2 * M_PI * flow_constant(kind)) * energy_shift_variance(e, j);
}

ChargeDecomposition charge_decomposition(const PumpCycle& c, int j, const ThermalState& s, const QuadratureSpec& q,
                                         int k_panels, int k_nodes, int t_nodes) {
  const Dispersion& d = c.dispersion;
  const double Emax = s.zero_temperature() ? s.mu : s.mu + q.energy_window * s.temperature;
  const Rule kr = composite_gauss(0.0, d.k(Emax), k_panels, k_nodes);
  const Rule tr = time_rule(c, t_nodes);
  const double ht = q.h_t(c.time_scale());
  // 𝒯̇ by an outer five-point difference of 𝒯; wide enough that the inner roundoff does not dominate.
  const double Ht = 1e-3 * c.time_scale();
  // Near threshold the energy step shrinks to E/100 and the anti-Hermitian part of 𝒯 is truncation error.
  QuadratureSpec qq = q;
  qq.hermiticity_tol = std::numeric_limits<double>::infinity();

  std::vector<double> om(tr.size()), td(tr.size());
  parallel_for(tr.size(), [&](std::size_t it) {
    const double t = tr.x[it];
    double so = 0, st = 0;
    for (std::size_t ik = 0; ik < kr.size(); ++ik) {
      const double k = kr.x[ik];
      const double E = d.energy(k);
      const double w = kr.w[ik] * d.dE_dk(k) * fermi_weight(E, s).rho;
      const double hE = std::min(q.h_E(E), 0.01 * E);
      const auto dd = differential_data_steps(c, E, t, hE, ht, qq);
      auto tau = [&](double s) { return differential_data_steps(c, E, s, hE, ht, qq).time_delay(j, j).real(); };
      so += w * dd.curvature(j, j).real();
      st += w * (-tau(t + 2 * Ht) + 8 * tau(t + Ht) - 8 * tau(t - Ht) + tau(t - 2 * Ht)) / (12 * Ht);
    }
    om[it] = so;
    td[it] = st;
  });
  ChargeDecomposition out;
  for (std::size_t it = 0; it < tr.size(); ++it) {
    out.omega_term += tr.w[it] * om[it] / (2 * M_PI);
    out.tdot_term -= tr.w[it] * td[it] / (2 * M_PI);
  }
  return out;
}

CycleCharge cycle_charge(const PumpCycle& c, int j, const ThermalState& s, const QuadratureSpec& q, bool decompose) {
  CycleCharge out;
  const Rule tr = time_rule(c, q.time_grid);
  std::vector<double> vals(tr.size());
  parallel_for(tr.size(), [&](std::size_t i) { vals[i] = bpt_current(c, j, tr.x[i], s, q); });
  for (std::size_t i = 0; i < tr.size(); ++i) out.charge += tr.w[i] * vals[i];
  out.time_nodes = static_cast<int>(tr.size());
  if (decompose) {
    auto dec = charge_decomposition(c, j, s, q, q.energy_panels, 16, std::max(16, q.time_grid / 4));
    dec.residual = std::abs(out.charge - (dec.threshold + dec.tdot_term + dec.omega_term));
    out.decomposition = dec;
  }
  return out;
}

namespace {

double arg_det_rate(const PumpCycle& c, double E, double t, double h) {
  const cplx a = c(E, t + h).determinant();
  const cplx b = c(E, t - h).determinant();
  return std::arg(a * std::conj(b)) / (2 * h);
}

}  // namespace

BirmanKrein birman_krein(const PumpCycle& c, const ThermalState& s, const QuadratureSpec& q) {
  const double mu = s.mu;
  int n = q.time_grid;
  std::vector<double> grid;
  double total = 0;
  for (int attempt = 0;; ++attempt) {
    const double t0 = c.t_begin(), L = c.t_end() - c.t_begin();
    grid.resize(n + 1);
    for (int k = 0; k <= n; ++k) grid[k] = t0 + L * k / n;
    double max_jump = 0;
    bool aliased = false;
    total = 0;
    cplx prev = c(mu, grid[0]).determinant();
    for (int k = 1; k <= n; ++k) {
      const cplx cur = c(mu, grid[k]).determinant();
      const double jump = std::arg(cur * std::conj(prev));
      // A step that wrapped past ±π disagrees with the local slope.
      const double slope = arg_det_rate(c, mu, 0.5 * (grid[k] + grid[k - 1]), q.h_t(c.time_scale()));
      if (std::abs(jump - slope * L / n) > M_PI / 2) aliased = true;
      max_jump = std::max(max_jump, std::abs(jump));
      total += jump;
      prev = cur;
    }
    if (aliased) max_jump = M_PI;
    if (max_jump < M_PI / 2) break;
    if (attempt >= 4) {
      if (max_jump >= M_PI)
        throw PumpError(ErrorKind::PhaseUnwrapFailure,
                        fmt::format("arg det S jumps by {:.3g} between grid points after refinement to {}", max_jump, n));
      break;
    }
    n *= 2;
  }
  // Midpoints of the unwrap grid: derivatives stay off any kinks at the grid nodes.
  for (std::size_t k = 0; k + 1 < grid.size(); ++k) grid[k] = 0.5 * (grid[k] + grid[k + 1]);
  grid.pop_back();
  const double h = q.h_t(c.time_scale());
  std::vector<double> res(grid.size());
  parallel_for(grid.size(), [&](std::size_t k) {
    const double t = grid[k];
    const Mat e = energy_shift(c, mu, t, q);
    const double sum = e.trace().real() / (2 * M_PI);
    res[k] = std::abs(sum + arg_det_rate(c, mu, t, h) / (2 * M_PI));
  });
  BirmanKrein out;
  out.residual = *std::max_element(res.begin(), res.end());
  out.total_phase = total;
  out.grid = n;
  return out;
}

double birman_krein_residual(const PumpCycle& c, const ThermalState& s, const QuadratureSpec& q) {
  return birman_krein(c, s, q).residual;
}

TransportReport transport_report(const PumpCycle& c, const ThermalState& s, const QuadratureSpec& q) {
  const int n = c.n_channels;
  const Rule tr = time_rule(c, q.time_grid);
  const std::size_t N = tr.size();
  TransportReport r;
  r.finite_temperature = !s.zero_temperature();
  r.times = tr.x;
  r.current.assign(n, std::vector<double>(N));
  r.dissipation.assign(n, std::vector<double>(N));
  if (r.finite_temperature) {
    r.entropy_current.assign(n, std::vector<double>(N));
    r.noise_current.assign(n, std::vector<double>(N));
  }
  parallel_for(N, [&](std::size_t i) {
    const double t = tr.x[i];
    const auto cur = bpt_currents(c, t, s, q);
    const Mat e = energy_shift(c, s.mu, t, q);
    const Mat e2 = e * e;
    for (int j = 0; j < n; ++j) {
      r.current[j][i] = cur[j];
      r.dissipation[j][i] = e2(j, j).real() / (4 * M_PI);
      if (r.finite_temperature) {
        const double v = energy_shift_variance(e, j);
        r.entropy_current[j][i] = s.beta() / (2 * M_PI * 2.0) * v;
        r.noise_current[j][i] = s.beta() / (2 * M_PI * 6.0) * v;
      }
    }
  });
  r.cycle_charge.assign(n, 0.0);
  for (int j = 0; j < n; ++j) {
    for (std::size_t i = 0; i < N; ++i) {
      r.cycle_charge[j] += tr.w[i] * r.current[j][i];
      r.bound_violation = std::max(r.bound_violation, M_PI * r.current[j][i] * r.current[j][i] - r.dissipation[j][i]);
    }
  }
  r.birman_krein_residual = birman_krein_residual(c, s, q);
  return r;
}

}  // namespace qpump

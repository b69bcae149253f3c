#include "qpump/counting.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include <fmt/core.h>

#include "qpump/errors.hpp"

namespace qpump {

namespace {

Rule gl_time_rule(const PumpCycle& c, int n) {
  const int per = 16;
  return composite_gauss(c.t_begin(), c.t_end(), std::max(1, n / per), per);
}

void require_temperature(const ThermalState& s, const char* what) {
  if (s.zero_temperature()) throw PumpError(ErrorKind::ZeroTemperature, fmt::format("{} needs T > 0", what));
}

void require_pulse(const PumpCycle& c, double mu, const char* what) {
  if (!c.pulse)
    throw PumpError(ErrorKind::NonPulseCycle,
                    fmt::format("{} needs a pulse that returns to the identity; periodic cycles are refused", what));
  const Mat I = Mat::Identity(c.n_channels, c.n_channels);
  const double tol = 1e-8;
  const double ea = max_abs(c.evaluate(mu, c.t_a) - I), eb = max_abs(c.evaluate(mu, c.t_b) - I);
  if (ea > tol || eb > tol)
    throw PumpError(ErrorKind::NonPulseCycle,
                    fmt::format("{}: S does not settle to the identity at the window edges ({:.3g}, {:.3g})", what, ea,
                                eb));
}

// ℰ_jj from the five-point stencil.
double energy_shift_diag4(const PumpCycle& c, int j, double E, double t, double h) {
  const Mat Sdot = (-c(E, t + 2 * h) + 8.0 * c(E, t + h) - 8.0 * c(E, t - h) + c(E, t - 2 * h)) / (12 * h);
  const Mat S = c(E, t);
  return (cplx(0, 1) * Sdot.row(j) * S.row(j).adjoint())(0, 0).real();
}

double commutator_variance(const Mat& e, int j) {
  Mat P = Mat::Zero(e.rows(), e.cols());
  P(j, j) = 1.0;
  const Mat C = e * P - P * e;
  return 0.5 * (C * (P * e - e * P)).trace().real();
}

}  // namespace

double mean_transferred_charge(const PumpCycle& c, int j, const ThermalState& s, const QuadratureSpec& q) {
  const Rule tr = gl_time_rule(c, std::max(q.time_grid, 64));
  const double h = q.h_t(c.time_scale());
  std::vector<double> part(tr.size(), 0.0);
  const Rule er = s.zero_temperature() ? Rule{{s.mu}, {1.0}} : energy_rule(s, q);
  parallel_for(tr.size(), [&](std::size_t it) {
    double acc = 0;
    for (std::size_t ie = 0; ie < er.size(); ++ie) {
      // −ρ′ → δ(E − μ) at T = 0
      const double w = s.zero_temperature() ? 1.0 : -fermi_weight(er.x[ie], s).drho;
      acc += er.w[ie] * w * energy_shift_diag4(c, j, er.x[ie], tr.x[it], h);
    }
    part[it] = tr.w[it] * acc / (2 * M_PI);
  });
  double sum = 0;
  for (double v : part) sum += v;
  return sum;
}

double jn_noise(const PumpCycle& c, int j, const ThermalState& s, const QuadratureSpec& q) {
  require_temperature(s, "Johnson-Nyquist noise");
  if (!c.pulse) throw PumpError(ErrorKind::NonPulseCycle, "Johnson-Nyquist noise integrates over a pulse window");
  const Rule tr = gl_time_rule(c, q.time_grid);
  double sum = 0;
  for (std::size_t i = 0; i < tr.size(); ++i) sum += tr.w[i] * (1.0 - std::norm(c(s.mu, tr.x[i])(j, j)));
  return s.temperature / M_PI * sum;
}

double shot_noise_finite_T(const PumpCycle& c, int j, const ThermalState& s, const QuadratureSpec& q) {
  require_temperature(s, "finite-temperature shot noise");
  const Rule tr = time_rule(c, q.time_grid);
  std::vector<double> v(tr.size());
  parallel_for(tr.size(), [&](std::size_t i) { v[i] = commutator_variance(energy_shift(c, s.mu, tr.x[i], q), j); });
  double sum = 0;
  for (std::size_t i = 0; i < tr.size(); ++i) sum += tr.w[i] * v[i];
  return s.beta() / (12 * M_PI) * sum;
}

double second_cumulant_direct(const PumpCycle& c, int j, const ThermalState& s, const QuadratureSpec& q) {
  require_temperature(s, "the symbol-level second cumulant");
  const Rule tr = time_rule(c, q.time_grid);
  const Rule er = energy_rule(s, q);
  const double h = q.h_t(c.time_scale());
  const int n = c.n_channels;
  Mat P = Mat::Zero(n, n);
  P(j, j) = 1.0;
  auto a = [&](double E, double t) {
    const Mat S = c(E, t);
    return Mat(S.adjoint() * P * S - P);
  };
  std::vector<double> part(tr.size(), 0.0);
  parallel_for(tr.size(), [&](std::size_t it) {
    const double t = tr.x[it];
    double acc = 0;
    for (std::size_t ie = 0; ie < er.size(); ++ie) {
      const double E = er.x[ie];
      const FermiWeight f = fermi_weight(E, s);
      const Mat a0 = a(E, t);
      const Mat adot = (a(E, t + h) - a(E, t - h)) / (2 * h);
      const double tr_a2 = (a0 * a0).trace().real();
      const double tr_adot2 = (adot * adot).trace().real();
      acc += er.w[ie] * (f.rho * (1 - f.rho) * tr_a2 + 0.5 * f.drho * f.drho * tr_adot2);
    }
    part[it] = tr.w[it] * acc / (2 * M_PI);
  });
  double sum = 0;
  for (double v : part) sum += v;
  return sum;
}

double shot_integrand(const PumpCycle& c, int j, double mu, double t, double tp) {
  const Eigen::RowVectorXcd psi = c(mu, t).row(j), phi = c(mu, tp).row(j);
  const cplx ov = (phi.conjugate() * psi.transpose())(0, 0);
  const double num = (psi - ov * phi).squaredNorm();
  const double d = t - tp;
  return num / (4 * M_PI * M_PI * d * d);
}

double shot_diagonal_limit(const PumpCycle& c, int j, double mu, double t, const QuadratureSpec& q) {
  return energy_shift_variance(energy_shift(c, mu, t, q), j) / (4 * M_PI * M_PI);
}

ZeroTShotNoise shot_noise_zero_T(const PumpCycle& c, int j, double mu, const QuadratureSpec& q) {
  require_pulse(c, mu, "zero-temperature shot noise");
  const double a = c.t_a, b = c.t_b, W = b - a;
  ZeroTShotNoise r;
  r.grid = q.shot_grid;
  r.eps_diag = q.eps_diag_rel * W;
  const Rule tr = gl_time_rule(c, q.shot_grid);
  const std::size_t N = tr.size();

  std::vector<Eigen::RowVectorXcd> rows(N);
  parallel_for(N, [&](std::size_t i) { rows[i] = c(mu, tr.x[i]).row(j); });

  // Cross strips: S(t′) = 1 outside the window, so ∫dt′/(t−t′)² is done in closed form.
  for (std::size_t i = 0; i < N; ++i) {
    const double t = tr.x[i];
    const double num = 1.0 - std::norm(rows[i](j));
    r.strip_part += tr.w[i] * num * (1.0 / (t - a) + 1.0 / (b - t));
  }
  r.strip_part *= 2.0 / (4 * M_PI * M_PI);

  struct Row {
    double sum = 0, max = 0;
    int subs = 0;
  };
  std::vector<Row> acc(N);
  parallel_for(N, [&](std::size_t i) {
    Row& out = acc[i];
    const double t = tr.x[i];
    for (std::size_t k = 0; k < N; ++k) {
      const double tp = tr.x[k];
      const double d = t - tp;
      double f;
      if (std::abs(d) < r.eps_diag) {
        f = shot_diagonal_limit(c, j, mu, 0.5 * (t + tp), q);
        ++out.subs;
      } else {
        const cplx ov = (rows[k].conjugate() * rows[i].transpose())(0, 0);
        f = (rows[i] - ov * rows[k]).squaredNorm() / (4 * M_PI * M_PI * d * d);
      }
      out.sum += tr.w[k] * f;
      out.max = std::max(out.max, f);
    }
    out.sum *= tr.w[i];
  });
  for (const Row& row : acc) {
    r.window_part += row.sum;
    r.max_integrand = std::max(r.max_integrand, row.max);
    r.diagonal_substitutions += row.subs;
  }
  r.value = r.window_part + r.strip_part;
  return r;
}

NoiseReport noise_report(const PumpCycle& c, int j, const ThermalState& s, const QuadratureSpec& q) {
  NoiseReport r;
  r.channel = j;
  r.mu = s.mu;
  r.temperature = s.temperature;
  if (s.zero_temperature()) {
    const ZeroTShotNoise z = shot_noise_zero_T(c, j, s.mu, q);
    r.method = "zeroT";
    r.shot_noise = z.value;
    r.grid = z.grid;
    r.eps_diag = z.eps_diag;
    r.diagonal_substitutions = z.diagonal_substitutions;
    r.large_mu_assumption = true;
    return r;
  }
  r.method = "finiteT";
  r.jn_noise = jn_noise(c, j, s, q);
  r.shot_noise = shot_noise_finite_T(c, j, s, q);
  r.time_nodes = q.time_grid;
  return r;
}

}  // namespace qpump

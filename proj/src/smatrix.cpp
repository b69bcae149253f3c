#include "qpump/smatrix.hpp"

#include <cmath>
#include <limits>

#include <fmt/format.h>

#include "qpump/errors.hpp"

namespace qpump {

double Dispersion::k(double E) const { return std::sqrt(2.0 * mass * std::max(E, 0.0)); }

Mat PumpCycle::operator()(double E, double t) const {
  if (pulse && (t < t_a || t > t_b)) return Mat::Identity(n_channels, n_channels);
  return evaluate(E, t);
}

double max_abs(const Mat& A) { return A.size() ? A.cwiseAbs().maxCoeff() : 0.0; }

double unitarity_residual(const Mat& S) {
  return max_abs(S * S.adjoint() - Mat::Identity(S.rows(), S.cols()));
}

void require_unitary(const Mat& S, double tol, const char* where) {
  const double r = unitarity_residual(S);
  if (!(r < tol))
    throw PumpError(ErrorKind::NonUnitary,
                    fmt::format("unitarity of S violated at {} (|SS*-I| = {:.3g}, tol {:.3g})", where, r, tol));
}

Mat build_two_channel(const TwoChannelParams& p) {
  const cplx I(0, 1);
  const double c = std::cos(p.theta), s = std::sin(p.theta);
  Mat S(2, 2);
  S(0, 0) = std::exp(I * p.alpha) * c;
  S(0, 1) = I * std::exp(-I * p.phi) * s;
  S(1, 0) = I * std::exp(I * p.phi) * s;
  S(1, 1) = std::exp(-I * p.alpha) * c;
  return std::exp(I * p.gamma) * S;
}

namespace {
double wrap_2pi(double x) {
  double y = std::fmod(x, 2 * M_PI);
  if (y < 0) y += 2 * M_PI;
  if (y >= 2 * M_PI) y = 0;
  return y;
}
}  // namespace

TwoChannelParams decompose_two_channel(const Mat& S, double unitarity_tol) {
  if (S.rows() != 2 || S.cols() != 2) throw PumpError(ErrorKind::InvalidSpec, "decompose_two_channel needs a 2x2 matrix");
  require_unitary(S, unitarity_tol, "decompose_two_channel");
  TwoChannelParams p;
  double g = 0.5 * std::arg(S.determinant());
  if (g < 0) g += M_PI;
  if (g >= M_PI) g -= M_PI;
  p.gamma = g;
  const Mat U = std::exp(cplx(0, -g)) * S;
  const double a11 = std::abs(U(0, 0)), a21 = std::abs(U(1, 0));
  p.theta = std::atan2(a21, a11);
  constexpr double degenerate = 1e-14;
  p.alpha = a11 > degenerate ? wrap_2pi(std::arg(U(0, 0))) : 0.0;
  p.phi = a21 > degenerate ? wrap_2pi(std::arg(U(1, 0)) - M_PI / 2) : 0.0;
  return p;
}

namespace {

struct Hermitized {
  Mat H;
  double correction;
};

Hermitized hermitize(const Mat& A) {
  Mat H = 0.5 * (A + A.adjoint());
  const double corr = max_abs(A - H) / std::max(1.0, max_abs(H));
  return {std::move(H), corr};
}

Mat eval_checked(const PumpCycle& c, double E, double t, const QuadratureSpec& q) {
  Mat S = c(E, t);
  require_unitary(S, q.unitarity_tol, "stencil point");
  return S;
}

Mat central(const PumpCycle& c, double E, double t, double hE, double ht, const QuadratureSpec& q) {
  return (eval_checked(c, E + hE, t + ht, q) - eval_checked(c, E - hE, t - ht, q)) / (2.0 * (hE + ht));
}

// Derivative along E (ht = 0) or t (hE = 0), optionally Richardson-extrapolated.
Mat derivative(const PumpCycle& c, double E, double t, double hE, double ht, const QuadratureSpec& q) {
  Mat d = central(c, E, t, hE, ht, q);
  if (!q.richardson) return d;
  Mat d2 = central(c, E, t, hE / 2, ht / 2, q);
  return (4.0 * d2 - d) / 3.0;
}

void check_hermitian(double corr, const QuadratureSpec& q, const char* what) {
  if (!(corr < 10 * q.hermiticity_tol))
    throw PumpError(ErrorKind::NonUnitary,
                    fmt::format("{} is not Hermitian to tolerance (anti-Hermitian part {:.3g})", what, corr));
}

}  // namespace

Mat energy_shift_step(const PumpCycle& c, double E, double t, double ht, const QuadratureSpec& q) {
  const Mat S = eval_checked(c, E, t, q);
  const Mat Sdot = derivative(c, E, t, 0.0, ht, q);
  auto h = hermitize(cplx(0, 1) * Sdot * S.adjoint());
  check_hermitian(h.correction, q, "energy shift");
  return h.H;
}

Mat energy_shift(const PumpCycle& c, double E, double t, const QuadratureSpec& q) {
  return energy_shift_step(c, E, t, q.h_t(c.time_scale()), q);
}

DifferentialData differential_data_steps(const PumpCycle& c, double E, double t, double hE, double ht,
                                         const QuadratureSpec& q) {
  if (!(E > hE))
    throw PumpError(ErrorKind::StencilOutOfDomain, fmt::format("energy stencil leaves E > 0 (E = {}, h_E = {})", E, hE));
  DifferentialData d;
  d.E = E;
  d.t = t;
  d.h_E = hE;
  d.h_t = ht;
  const cplx I(0, 1);
  const Mat S = eval_checked(c, E, t, q);
  const Mat Sdot = derivative(c, E, t, 0.0, ht, q);
  const Mat Sprime = derivative(c, E, t, hE, 0.0, q);
  auto e = hermitize(I * Sdot * S.adjoint());
  auto tau = hermitize(-I * Sprime * S.adjoint());
  check_hermitian(e.correction, q, "energy shift");
  check_hermitian(tau.correction, q, "time delay");
  d.energy_shift = std::move(e.H);
  d.time_delay = std::move(tau.H);
  d.hermitization_correction = std::max(e.correction, tau.correction);
  d.curvature = I * (d.time_delay * d.energy_shift - d.energy_shift * d.time_delay);
  return d;
}

DifferentialData differential_data(const PumpCycle& c, double E, double t, const QuadratureSpec& q) {
  return differential_data_steps(c, E, t, q.h_E(E), q.h_t(c.time_scale()), q);
}

OmegaIdentity omega_identity(const PumpCycle& c, double E, double t, const QuadratureSpec& q, double step_factor) {
  const double s = q.omega_step_rel * step_factor;
  const double HE = s * std::max(E, 1.0);
  const double Ht = s * c.time_scale();
  QuadratureSpec qq = q;
  qq.richardson = false;
  // At the coarse check step the anti-Hermitian part is truncation error, not a defect.
  qq.hermiticity_tol = std::numeric_limits<double>::infinity();
  const auto d0 = differential_data_steps(c, E, t, HE, Ht, qq);
  const auto dEp = differential_data_steps(c, E + HE, t, HE, Ht, qq);
  const auto dEm = differential_data_steps(c, E - HE, t, HE, Ht, qq);
  const auto dtp = differential_data_steps(c, E, t + Ht, HE, Ht, qq);
  const auto dtm = differential_data_steps(c, E, t - Ht, HE, Ht, qq);
  const Mat dE = (dEp.energy_shift - dEm.energy_shift) / (2 * HE);
  const Mat dT = (dtp.time_delay - dtm.time_delay) / (2 * Ht);
  const Mat rhs = dE + dT;

  const cplx I(0, 1);
  const Mat Sdot = (c(E, t + Ht) - c(E, t - Ht)) / (2 * Ht);
  const Mat Sp = (c(E + HE, t) - c(E - HE, t)) / (2 * HE);
  const Mat mixed = I * (Sdot * Sp.adjoint() - Sp * Sdot.adjoint());

  OmegaIdentity r;
  r.residual = max_abs(d0.curvature - rhs);
  r.mixed_residual = max_abs(mixed - rhs);
  r.scale = std::max(max_abs(dE), max_abs(dT));
  return r;
}

PumpCycle apply_gauge_and_fiducial(const PumpCycle& c, const std::vector<double>& phases,
                                   const std::vector<double>& shifts, std::optional<Dispersion> disp) {
  const int n = c.n_channels;
  if (static_cast<int>(phases.size()) != n || static_cast<int>(shifts.size()) != n)
    throw PumpError(ErrorKind::InvalidSpec, "gauge phases and fiducial shifts need one entry per channel");
  PumpCycle out = c;
  const Dispersion d = disp.value_or(c.dispersion);
  auto inner = c.evaluate;
  out.evaluate = [inner, phases, shifts, d, n](double E, double t) {
    Mat S = inner(E, t);
    const double k = d.k(E);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        S(i, j) *= std::exp(cplx(0, k * (shifts[i] + shifts[j]) + phases[i] - phases[j]));
    return S;
  };
  out.label = c.label + "+gauge";
  return out;
}

}  // namespace qpump

#include "qpump/geometry.hpp"

#include <array>
#include <cmath>

#include <fmt/format.h>

#include "qpump/errors.hpp"
#include "qpump/transport.hpp"

namespace qpump {

RowPath row_path(const PumpCycle& c, int j, double mu, int n) {
  RowPath p;
  p.closed = !c.pulse;
  const int count = p.closed ? n : n + 1;
  const double t0 = c.t_begin(), L = c.t_end() - c.t_begin();
  p.samples.resize(count);
  parallel_for(count, [&](std::size_t k) { p.samples[k] = c(mu, t0 + L * k / n).row(j).transpose(); });
  return p;
}

double global_angle(const RowPath& p, double min_overlap) {
  const std::size_t n = p.samples.size();
  if (n < 2) return 0.0;
  const std::size_t links = p.closed ? n : n - 1;
  double angle = 0;
  for (std::size_t k = 0; k < links; ++k) {
    const cplx ov = p.samples[k].dot(p.samples[(k + 1) % n]);
    if (std::abs(ov) < min_overlap)
      throw PumpError(ErrorKind::GridTooCoarse,
                      fmt::format("adjacent rows overlap only {:.3g}; refine the time grid", std::abs(ov)));
    angle += std::arg(ov);
  }
  return angle;
}

double line_charge(const PumpCycle& c, int j, double mu, int n, bool richardson) {
  const double a1 = global_angle(row_path(c, j, mu, n));
  if (!richardson) return -a1 / (2 * M_PI);
  const double a2 = global_angle(row_path(c, j, mu, 2 * n));
  return -(4 * a2 - a1) / 3 / (2 * M_PI);
}

namespace {

Vec row_at(const SurfacePatch& p, int j, double u, double v) { return p.smatrix(u, v).row(j).transpose(); }

double curvature_density(const SurfacePatch& p, int j, double u, double v) {
  const double h = p.fd_step;
  auto d = [&](double du, double dv) -> Vec {
    return ((row_at(p, j, u - 2 * h * du, v - 2 * h * dv) - row_at(p, j, u + 2 * h * du, v + 2 * h * dv)) +
            8.0 * (row_at(p, j, u + h * du, v + h * dv) - row_at(p, j, u - h * du, v - h * dv))) /
           (12 * h);
  };
  const Vec pu = d(1, 0), pv = d(0, 1);
  return -2.0 * pu.dot(pv).imag();
}

double stokes_at(const SurfacePatch& p, int j, int panels) {
  const Rule r = composite_gauss(0.0, 1.0, panels, p.nodes);
  const std::size_t n = r.size();
  std::vector<double> rows(n);
  parallel_for(n, [&](std::size_t a) {
    double s = 0;
    for (std::size_t b = 0; b < n; ++b) s += r.w[b] * curvature_density(p, j, r.x[a], r.x[b]);
    rows[a] = r.w[a] * s;
  });
  double total = 0;
  for (double x : rows) total += x;
  return (p.reversed ? -1.0 : 1.0) * total / (2 * M_PI);
}

}  // namespace

StokesResult charge_via_stokes(const SurfacePatch& patch, int j, double stokes_tol) {
  StokesResult out;
  int panels = patch.panels;
  double prev = stokes_at(patch, j, panels);
  for (;;) {
    const int next = panels * 2;
    if (next > patch.max_panels)
      throw PumpError(ErrorKind::GridTooCoarse,
                      fmt::format("surface integral not converged at {} panels (change {:.3g})", panels, out.last_change));
    const double cur = stokes_at(patch, j, next);
    out.last_change = std::abs(cur - prev);
    panels = next;
    prev = cur;
    if (out.last_change < stokes_tol / 2) break;
  }
  out.charge = prev;
  out.panels = panels;
  return out;
}

namespace {

double boundary_angle(const SurfacePatch& patch, int j, int n) {
  RowPath p;
  p.closed = true;
  auto push = [&](double u, double v) { p.samples.push_back(row_at(patch, j, u, v)); };
  for (int k = 0; k < n; ++k) push(double(k) / n, 0.0);
  for (int k = 0; k < n; ++k) push(1.0, double(k) / n);
  for (int k = 0; k < n; ++k) push(1.0 - double(k) / n, 1.0);
  for (int k = 0; k < n; ++k) push(0.0, 1.0 - double(k) / n);
  return global_angle(p);
}

}  // namespace

double patch_boundary_charge(const SurfacePatch& patch, int j, int n_per_edge) {
  const double a1 = boundary_angle(patch, j, n_per_edge);
  const double a2 = boundary_angle(patch, j, 2 * n_per_edge);
  const double angle = (4 * a2 - a1) / 3;
  return (patch.reversed ? 1.0 : -1.0) * angle / (2 * M_PI);
}

std::vector<Eigen::Vector3d> stereographic(const RowPath& p) {
  std::vector<Eigen::Vector3d> out;
  out.reserve(p.samples.size());
  for (const Vec& s : p.samples) {
    if (s.size() != 2) throw PumpError(ErrorKind::InvalidSpec, "stereographic projection needs two channels");
    const cplx z = s(0) * std::conj(s(1));
    out.emplace_back(2 * z.real(), 2 * z.imag(), std::norm(s(0)) - std::norm(s(1)));
  }
  return out;
}

double spherical_area(const std::vector<Eigen::Vector3d>& pts) {
  const std::size_t n = pts.size();
  if (n < 3) return 0.0;
  Eigen::Vector3d mean = Eigen::Vector3d::Zero();
  for (const auto& p : pts) mean += p;
  // Reference vertex away from the path: opposite the mean, or the pole farthest from it.
  Eigen::Vector3d ref;
  if (mean.norm() > 1e-3 * n) {
    ref = -mean.normalized();
  } else {
    double best = -1;
    const std::array<Eigen::Vector3d, 6> poles = {Eigen::Vector3d(1, 0, 0),  Eigen::Vector3d(0, 1, 0),
                                                  Eigen::Vector3d(0, 0, 1),  Eigen::Vector3d(-1, 0, 0),
                                                  Eigen::Vector3d(0, -1, 0), Eigen::Vector3d(0, 0, -1)};
    for (const Eigen::Vector3d& c : poles) {
      double dmin = 4;
      for (const auto& p : pts) dmin = std::min(dmin, (p.normalized() - c).norm());
      if (dmin > best) {
        best = dmin;
        ref = c;
      }
    }
  }
  double area = 0;
  for (std::size_t k = 0; k < n; ++k) {
    const Eigen::Vector3d a = pts[k].normalized(), b = pts[(k + 1) % n].normalized();
    const double num = ref.dot(a.cross(b));
    const double den = 1.0 + ref.dot(a) + a.dot(b) + b.dot(ref);
    area += 2.0 * std::atan2(num, den);
  }
  return area;
}

double fractional_charge(const RowPath& p) {
  double f = spherical_area(stereographic(p)) / (4 * M_PI);
  f -= std::round(f);
  if (f <= -0.5) f += 1.0;
  return f;
}

Winding winding_number(const std::vector<cplx>& phases, bool closed) {
  const std::size_t n = phases.size();
  double total = 0;
  const std::size_t links = closed ? n : n - 1;
  for (std::size_t k = 0; k < links; ++k) {
    const double d = std::arg(phases[(k + 1) % n] * std::conj(phases[k]));
    if (std::abs(d) >= M_PI * (1 - 1e-12))
      throw PumpError(ErrorKind::PhaseUnwrapFailure, fmt::format("phase step {:.3g} at sample {} is not below π", d, k));
    total += d;
  }
  const double w = total / (2 * M_PI);
  Winding out;
  out.winding = static_cast<int>(std::lround(w));
  out.residual = std::abs(w - out.winding);
  if (out.residual >= 0.01)
    throw PumpError(ErrorKind::PhaseUnwrapFailure, fmt::format("winding {:.4f} is not close to an integer", w));
  return out;
}

double cylinder_charge(const PumpCycle& c, int j, double mu, const QuadratureSpec& q, int k_panels, int k_nodes,
                       int t_nodes) {
  ThermalState s{mu, 0.0};
  return charge_decomposition(c, j, s, q, k_panels, k_nodes, t_nodes).omega_term;
}

}  // namespace qpump

#pragma once

#include <cstddef>
#include <functional>
#include <vector>

namespace qpump {

// Grids, steps and tolerances shared by every integral and derivative.
struct QuadratureSpec {
  double h_E_rel = 1e-5;  // h_E = h_E_rel * max(E, 1)
  double h_t_rel = 1e-5;  // h_t = h_t_rel * period (or window length)
  bool richardson = false;

  int time_grid = 512;
  double energy_window = 30.0;  // μ ± W·T
  int energy_nodes = 64;
  int energy_panels = 4;

  double unitarity_tol = 1e-9;
  double hermiticity_tol = 1e-7;
  double omega_identity_tol = 1e-6;
  double omega_step_rel = 2e-5;
  double stokes_tol = 1e-6;
  double numeric_tol = 1e-10;

  double eps_diag_rel = 1e-3;  // ε_diag = eps_diag_rel * window length
  int shot_grid = 1024;

  double h_E(double E) const;
  double h_t(double period) const { return h_t_rel * period; }
};

struct Rule {
  std::vector<double> x;
  std::vector<double> w;
  std::size_t size() const { return x.size(); }
};

// n-point Gauss–Legendre rule on [-1, 1].
const Rule& gauss_legendre(int n);

// Composite rule: `panels` equal panels, n nodes each, on [a, b].
Rule composite_gauss(double a, double b, int panels, int n);

// Composite rule on [a, b] with panel edges at the given interior breakpoints.
Rule composite_gauss(const std::vector<double>& edges, int n);

double integrate(const Rule& r, const std::function<double(double)>& f);

// Runs body(i) for i in [0, n) on a small worker pool; results go to per-index slots.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace qpump

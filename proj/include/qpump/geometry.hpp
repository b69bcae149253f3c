#pragma once

#include <functional>
#include <vector>

#include <Eigen/Dense>

#include "qpump/smatrix.hpp"

namespace qpump {

// Transposed j-th row of S(μ, t) sampled along a cycle.
struct RowPath {
  std::vector<Vec> samples;
  bool closed = true;
};

// Periodic cycles give n samples (closed); pulses give n + 1 samples over the window (open).
RowPath row_path(const PumpCycle& c, int j, double mu, int n);

// Σ arg⟨ψ_k|ψ_{k+1}⟩ (wrapping around when closed). Charge = −angle/2π.
double global_angle(const RowPath& p, double min_overlap = 0.9);

// −angle/2π with Richardson extrapolation over (n, 2n).
double line_charge(const PumpCycle& c, int j, double mu, int n, bool richardson = true);

// (u, v) ∈ [0,1]² → S(μ). The map must extend smoothly a little beyond the square.
struct SurfacePatch {
  std::function<Mat(double, double)> smatrix;
  bool reversed = false;
  int panels = 4;
  int nodes = 16;
  int max_panels = 64;
  double fd_step = 1e-3;
};

struct StokesResult {
  double charge = 0;
  int panels = 0;
  double last_change = 0;
};

// (1/2π)∬ −2 Im⟨∂_uψ|∂_vψ⟩ du dv, doubling panels until successive values agree to stokes_tol/2.
StokesResult charge_via_stokes(const SurfacePatch& patch, int j, double stokes_tol);

// Line charge around the counterclockwise boundary of the unit square.
double patch_boundary_charge(const SurfacePatch& patch, int j, int n_per_edge);

std::vector<Eigen::Vector3d> stereographic(const RowPath& p);

// Signed solid angle enclosed by a closed spherical polygon.
double spherical_area(const std::vector<Eigen::Vector3d>& pts);

// Fractional part of the cycle charge, in (−1/2, 1/2], from the enclosed spherical area.
double fractional_charge(const RowPath& p);

struct Winding {
  int winding = 0;
  double residual = 0;
};

Winding winding_number(const std::vector<cplx>& phases, bool closed = true);

// (1/2π)∬ Ω_jj dE dt over [0, μ] × cycle.
double cylinder_charge(const PumpCycle& c, int j, double mu, const QuadratureSpec& q, int k_panels = 8,
                       int k_nodes = 16, int t_nodes = 256);

}  // namespace qpump

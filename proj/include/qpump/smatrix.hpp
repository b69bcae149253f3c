#pragma once

#include <complex>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "qpump/quadrature.hpp"

namespace qpump {

using cplx = std::complex<double>;
using Mat = Eigen::MatrixXcd;
using Vec = Eigen::VectorXcd;

// E(k) = k²/(2m), k(E) = sqrt(2 m E).
struct Dispersion {
  double mass = 1.0;
  double k(double E) const;
  double energy(double k) const { return k * k / (2.0 * mass); }
  double dE_dk(double k) const { return k / mass; }
};

// Frozen scattering matrix S(E, t). A pulse cycle is the identity outside [t_a, t_b].
struct PumpCycle {
  int n_channels = 2;
  std::function<Mat(double, double)> evaluate;
  double period = 1.0;
  bool pulse = false;
  double t_a = 0.0, t_b = 1.0;
  std::string label;
  Dispersion dispersion;
  // Overrides the length that scales derivative steps (0: use the window).
  double step_scale = 0.0;

  Mat operator()(double E, double t) const;
  // Length used to scale time steps: the period, or the pulse window.
  double time_scale() const { return step_scale > 0 ? step_scale : (pulse ? t_b - t_a : period); }
  double t_begin() const { return pulse ? t_a : 0.0; }
  double t_end() const { return pulse ? t_b : period; }
};

double unitarity_residual(const Mat& S);
void require_unitary(const Mat& S, double tol, const char* where);

struct TwoChannelParams {
  double theta = 0, alpha = 0, phi = 0, gamma = 0;
};

Mat build_two_channel(const TwoChannelParams& p);
TwoChannelParams decompose_two_channel(const Mat& S, double unitarity_tol = 1e-9);

struct DifferentialData {
  Mat energy_shift;  // ℰ = i Ṡ S†
  Mat time_delay;    // 𝒯 = -i S' S†
  Mat curvature;     // Ω = i[𝒯, ℰ]
  double E = 0, t = 0;
  double h_E = 0, h_t = 0;
  double hermitization_correction = 0;  // relative size of the discarded anti-Hermitian part
};

DifferentialData differential_data(const PumpCycle& c, double E, double t, const QuadratureSpec& q);
DifferentialData differential_data_steps(const PumpCycle& c, double E, double t, double hE, double ht,
                                         const QuadratureSpec& q);

// ℰ alone (three evaluations instead of five).
Mat energy_shift(const PumpCycle& c, double E, double t, const QuadratureSpec& q);
Mat energy_shift_step(const PumpCycle& c, double E, double t, double ht, const QuadratureSpec& q);

struct OmegaIdentity {
  double residual = 0;       // max |i[𝒯,ℰ] − (ℰ' + 𝒯̇)|
  double mixed_residual = 0; // max |i(Ṡ S†' − S' Ṡ†) − (ℰ' + 𝒯̇)|
  double scale = 0;          // max(|ℰ'|, |𝒯̇|)
};

// Nested differences at step omega_step_rel * step_factor (relative to max(E,1) and the time scale).
OmegaIdentity omega_identity(const PumpCycle& c, double E, double t, const QuadratureSpec& q,
                             double step_factor = 1.0);

// S_ij -> S_ij exp(i k(E)(ξ_i + ξ_j)) exp(i(φ_i − φ_j)).
PumpCycle apply_gauge_and_fiducial(const PumpCycle& c, const std::vector<double>& phases,
                                   const std::vector<double>& shifts,
                                   std::optional<Dispersion> disp = std::nullopt);

double max_abs(const Mat& A);

}  // namespace qpump

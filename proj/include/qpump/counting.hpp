#pragma once

#include <string>

#include "qpump/quadrature.hpp"
#include "qpump/smatrix.hpp"
#include "qpump/transport.hpp"

namespace qpump {

// −(1/2π)∬ρ′ ℰ_jj dE dt with a fourth-order time stencil and Gauss–Legendre time nodes.
double mean_transferred_charge(const PumpCycle& c, int j, const ThermalState& s, const QuadratureSpec& q);

// (T/π)∫(1 − |S_jj(μ,t)|²) dt over the pulse window.
double jn_noise(const PumpCycle& c, int j, const ThermalState& s, const QuadratureSpec& q);

// (β/12π)∫Δℰ²_jj(μ,t) dt with Δℰ²_jj = ½ tr([ℰ,P_j][P_j,ℰ]).
double shot_noise_finite_T(const PumpCycle& c, int j, const ThermalState& s, const QuadratureSpec& q);

// (1/2π)∬[ρ(1−ρ) tr a² + ½ρ′² tr ȧ²] dE dt with a = S†P_jS − P_j.
double second_cumulant_direct(const PumpCycle& c, int j, const ThermalState& s, const QuadratureSpec& q);

// [1 − |(S(μ,t)S†(μ,t′))_jj|²] / (4π²(t−t′)²), evaluated without cancellation; t ≠ t′.
double shot_integrand(const PumpCycle& c, int j, double mu, double t, double tp);

// Δℰ²_jj(μ,t)/4π², the integrand on the diagonal.
double shot_diagonal_limit(const PumpCycle& c, int j, double mu, double t, const QuadratureSpec& q);

struct ZeroTShotNoise {
  double value = 0;
  double window_part = 0;  // both times inside the pulse window
  double strip_part = 0;   // one time outside, integrated analytically
  int grid = 0;
  double eps_diag = 0;
  int diagonal_substitutions = 0;
  double max_integrand = 0;
};

// Throws NonPulseCycle unless S equals the identity outside a finite window.
ZeroTShotNoise shot_noise_zero_T(const PumpCycle& c, int j, double mu, const QuadratureSpec& q);

struct NoiseReport {
  int channel = 0;
  double mu = 0;
  double temperature = 0;
  double jn_noise = 0;
  double shot_noise = 0;
  std::string method;  // finiteT | zeroT
  int time_nodes = 0;
  int grid = 0;
  double eps_diag = 0;
  int diagonal_substitutions = 0;
  // The zero-temperature double integral is the large-μ form; flagged, not checked.
  bool large_mu_assumption = false;
};

NoiseReport noise_report(const PumpCycle& c, int j, const ThermalState& s, const QuadratureSpec& q);

}  // namespace qpump

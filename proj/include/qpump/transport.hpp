#pragma once

#include <optional>
#include <vector>

#include "qpump/quadrature.hpp"
#include "qpump/smatrix.hpp"

namespace qpump {

struct ThermalState {
  double mu = 1.0;
  double temperature = 0.0;
  double beta() const { return 1.0 / temperature; }
  bool zero_temperature() const { return temperature == 0.0; }
};

struct FermiWeight {
  double rho = 0, drho = 0, ddrho = 0;
  bool distributional = false;  // T = 0: -ρ' is a point mass at μ
};

FermiWeight fermi_weight(double E, const ThermalState& s);

// Energy nodes over μ ± W·T, clipped to stay above the stencil floor.
Rule energy_rule(const ThermalState& s, const QuadratureSpec& q);

// Time nodes: trapezoid on a periodic cycle, composite Gauss–Legendre on a pulse window.
Rule time_rule(const PumpCycle& c, int n);

// ⟨Q̇⟩_j(t), positive into lead j.
double bpt_current(const PumpCycle& c, int j, double t, const ThermalState& s, const QuadratureSpec& q);
std::vector<double> bpt_currents(const PumpCycle& c, double t, const ThermalState& s, const QuadratureSpec& q);

double dissipation_current(const PumpCycle& c, int j, double t, const ThermalState& s, const QuadratureSpec& q);

enum class FlowKind { Entropy, Noise };
double flow_constant(FlowKind k);  // k = 2 (entropy), 6 (noise)
double h_function(FlowKind k, double x);
double h_integral(FlowKind k);  // ∫₀¹ h by tanh-sinh quadrature

double entropy_noise_current(const PumpCycle& c, int j, double t, const ThermalState& s, const QuadratureSpec& q,
                             FlowKind kind);

// Δℰ²_j = (ℰ²)_jj − (ℰ_jj)²
double energy_shift_variance(const Mat& E, int j);

struct ChargeDecomposition {
  double threshold = 0;  // ρ(0)ℰ(0,t) term, taken as zero
  double tdot_term = 0;  // −(1/2π)∬ρ 𝒯̇_jj
  double omega_term = 0; // (1/2π)∬ρ Ω_jj
  double residual = 0;   // |direct − sum of terms|
};

struct CycleCharge {
  double charge = 0;
  int time_nodes = 0;
  std::optional<ChargeDecomposition> decomposition;
};

CycleCharge cycle_charge(const PumpCycle& c, int j, const ThermalState& s, const QuadratureSpec& q,
                         bool decompose = false);

// Decomposition terms only, on a k-space × time grid.
ChargeDecomposition charge_decomposition(const PumpCycle& c, int j, const ThermalState& s, const QuadratureSpec& q,
                                         int k_panels, int k_nodes, int t_nodes);

struct BirmanKrein {
  double residual = 0;
  double total_phase = 0;  // unwrapped change of arg det S over the cycle
  int grid = 0;
};

BirmanKrein birman_krein(const PumpCycle& c, const ThermalState& s, const QuadratureSpec& q);
double birman_krein_residual(const PumpCycle& c, const ThermalState& s, const QuadratureSpec& q);

struct TransportReport {
  std::vector<double> times;
  std::vector<std::vector<double>> current, dissipation, entropy_current, noise_current;  // [channel][time]
  std::vector<double> cycle_charge;
  double birman_krein_residual = 0;
  double bound_violation = 0;
  bool finite_temperature = false;
};

TransportReport transport_report(const PumpCycle& c, const ThermalState& s, const QuadratureSpec& q);

}  // namespace qpump

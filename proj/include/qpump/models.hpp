#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "qpump/smatrix.hpp"
#include "qpump/transport.hpp"

namespace qpump {

// V = values[i] on [breakpoints[i], breakpoints[i+1]), zero outside. Fiducial points at both ends.
struct PiecewisePotential {
  std::vector<double> breakpoints;
  std::vector<double> values;
  double mass = 1.0;
};

void validate(const PiecewisePotential& p);

// S = [[r, t'], [t, r']] at energy E > 0.
Mat transfer_matrix_smatrix(const PiecewisePotential& p, double E);

enum class ModelKind { Snowplow, Battery, Sink, UTurn, Optimal, Bicycle, CustomTwoChannel };

const char* to_string(ModelKind k);
ModelKind parse_model_kind(const std::string& s);
std::vector<std::string> model_kinds();

// offset + rate·t + amplitude·sin(2πt/period + phase) + bump·sin²(π(t−t_a)/(t_b−t_a)) on the pulse window.
struct Drive {
  double offset = 0, rate = 0, amplitude = 0, phase = 0, bump = 0;
  bool constant() const { return rate == 0 && amplitude == 0 && bump == 0; }
};

struct ModelSpec {
  ModelKind kind = ModelKind::UTurn;
  std::string label;
  double period = 1.0;
  bool pulse = false;
  double t_a = 0.0, t_b = 1.0;
  double mu = 1.0;  // Fermi energy; k_F = k(μ)

  // two-channel parameterization and the plow displacement ξ(t)
  Drive theta, alpha, phi, gamma, xi;
  // U-turn flux Φ(t) and loop length ℓ; custom models may add the optical phase k(E)ℓ
  Drive flux;
  double ell = 1.0;
  bool optical_phase = false;

  // bicycle pump
  int n = 1;
  double length = 1.0;
  double height = 1e4;
  double valve_width = 1e-3;
  double plateau = 10.0;
};

double drive_value(const Drive& d, double t, const ModelSpec& s);
double drive_rate(const Drive& d, double t, const ModelSpec& s);

void validate(const ModelSpec& s);
PumpCycle make_pump(const ModelSpec& s);

// Bicycle pump pieces. Units: μ = 1, k_F = π, so E = k²/π² (mass π²/2).
Dispersion bicycle_dispersion();
PiecewisePotential bicycle_potential(double a, double b, const ModelSpec& s);
// Boundary of the unit square at constant speed: (0,1) → (0,0) → (1,0) → (1,1) → (0,1).
std::pair<double, double> bicycle_path(double s);

struct ReflectionlessPoint {
  double a = 0, b = 0, r = 1;
};

std::vector<ReflectionlessPoint> find_reflectionless_points(const ModelSpec& s, double threshold = 0.05,
                                                            int a_lines = 24);

double max_transmission(const PumpCycle& c, double mu, int n);

struct GalileanCheck {
  double bpt = 0;
  double galilean = 0;
  double residual = 0;
};

// Left-channel current of a uniformly moving scatterer: BPT value versus the exact Galilean result.
GalileanCheck galilean_check(const ModelSpec& snowplow, double mu, double xi_dot, const QuadratureSpec& q);

// S = exp(i(H0 + cos ωt H1 + sin ωt H2 + k(E) H3)) with random Hermitian H's.
PumpCycle random_analytic_cycle(int n, std::uint64_t seed, double period = 1.0, double scale = 0.5);

// Pulse on [t_a, t_b]: S = exp(i b(t)(H0 + cos ωt H1 + sin ωt H2 + k(E) H3)), b = sin²(π(t−t_a)/(t_b−t_a)).
PumpCycle random_pulse_cycle(int n, std::uint64_t seed, double t_a = 0.0, double t_b = 1.0, double scale = 0.5);

}  // namespace qpump

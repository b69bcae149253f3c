#pragma once

#include <array>
#include <vector>

#include "qpump/transport.hpp"

namespace qpump {

// Zero-width barrier of height V at x(s) = v0·clamp(s, −Tw, Tw).
struct PlowSpec {
  double V = 1.0;
  double v0 = 0.1;
  double Tw = 1.0;

  void validate() const;
  double position(double s) const;
  double velocity(double s) const;
};

// Free-trajectory label: x = v(s − t), channel 1 on the left, 2 on the right.
struct PhaseSpacePoint {
  double E = 1.0;
  double t = 0.0;
  int channel = 1;
};

struct CollisionEvent {
  double s = 0, x = 0;
  double v_before = 0, v_after = 0;
  bool passed = false;
};

struct ScatterResult {
  PhaseSpacePoint out;
  double energy_shift = 0;  // E′ − E
  double time_delay = 0;    // t′ − t
  bool trapped = false;
  int events = 0;
  // Incoming channel, then one code per event: 2·segment + passed.
  std::vector<int> signature;
  std::vector<CollisionEvent> history;  // filled when requested
};

inline constexpr long kMaxClassicalEvents = 1000000;

ScatterResult classical_scatter(const PlowSpec& spec, const PhaseSpacePoint& in, bool record = false,
                                long max_events = kMaxClassicalEvents);

// Preimage of outgoing data (E′, t′, j). The result's `out` holds the incoming label;
// energy_shift and time_delay are ℰ_d(E′,t′,j) and 𝒯_d(E′,t′,j).
ScatterResult inverse_scatter(const PlowSpec& spec, const PhaseSpacePoint& outgoing);

struct Partition {
  bool transmitted = false;
  int in_channel = 1, out_channel = 1;
  double critical_energy = 0;
  double t_threshold = 0;  // |t| above which the plow is met at rest
};

// direction +1: rightward mover from channel 1; −1: leftward mover from channel 2.
Partition snowplow_partition(const PlowSpec& spec, double E, double t, int direction);

// True if (E, t) lies within `margin` of a critical curve (relative in E, in units of Tw in t).
bool near_critical_curve(const PlowSpec& spec, double E, double t, int direction, double margin);

struct ClassicalQuadrature {
  int energy_panels = 4;
  int energy_nodes = 32;
  int time_scan = 256;
  int time_nodes = 8;
  double energy_window = 30.0;
};

struct ClassicalCharge {
  std::array<double, 2> direct{};      // direct count over outgoing labels
  std::array<double, 2> bpt{};         // −∫∫ g′(E′) ℰ_d(E′,t′)
  std::array<double, 2> difference{};  // direct − bpt
  int breakpoints = 0;
};

// Charge out of each channel over labels t′ ∈ [t0, t1], with g = ρ/2π at s.temperature > 0.
ClassicalCharge classical_bpt_charge(const PlowSpec& spec, const ThermalState& s, double t0, double t1,
                                     const ClassicalQuadrature& q = {});

struct LiouvilleRegion {
  int channel = 2;
  double E_lo = 0.9, E_hi = 1.1;
  double t_lo = -0.5, t_hi = 0.5;
  int samples = 6;
};

struct LiouvilleResult {
  double residual = 0;            // max |ℰ′ + 𝒯̇|
  double scale = 0;               // max(|ℰ′|, |𝒯̇|)
  double jacobian_deviation = 0;  // max |det ∂(E,t)/∂(E′,t′) − 1|
};

LiouvilleResult liouville_residual(const PlowSpec& spec, const LiouvilleRegion& region);

struct BatteryReport {
  double delta_phi = 0;
  double t_on = 0;
  double energy_in = 0;
  double energy_out = 0;
  double energy_shift = 0;
  double static_energy_change = 0;  // max over frozen snapshots
  double static_time_change = 0;     // max over frozen snapshots
  int snapshots = 0;
};

// Crossing left to right under h = (p − A)²/2 with A = (t − t_on)φ′(x), φ stepping by Δφ on [−1, 1].
BatteryReport classical_battery_demo(double delta_phi, double t_on, double energy = 0.5, int snapshots = 5);

}  // namespace qpump

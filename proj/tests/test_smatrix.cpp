#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>

#include "qpump/errors.hpp"
#include "qpump/models.hpp"
#include "qpump/smatrix.hpp"

using namespace qpump;

namespace {

const cplx I1(0, 1);

Mat two_channel_ref(double th, double al, double ph, double ga) {
  Mat S(2, 2);
  S << std::exp(I1 * al) * std::cos(th), I1 * std::exp(-I1 * ph) * std::sin(th), I1 * std::exp(I1 * ph) * std::sin(th),
      std::exp(-I1 * al) * std::cos(th);
  return std::exp(I1 * ga) * S;
}

PumpCycle uturn(double omega, double ell) {
  PumpCycle c;
  c.evaluate = [=](double E, double t) {
    const double k = std::sqrt(2 * E);
    Mat S = Mat::Zero(2, 2);
    S(0, 0) = std::exp(I1 * (k * ell + omega * t));
    S(1, 1) = std::exp(I1 * (k * ell - omega * t));
    return S;
  };
  return c;
}

// Fourth-order reference for ℰ = i Ṡ S† with a coarse step.
Mat energy_shift_ref(const PumpCycle& c, double E, double t, double h) {
  const Mat d = (-c(E, t + 2 * h) + 8.0 * c(E, t + h) - 8.0 * c(E, t - h) + c(E, t - 2 * h)) / (12 * h);
  return I1 * d * c(E, t).adjoint();
}

Mat time_delay_ref(const PumpCycle& c, double E, double t, double h) {
  const Mat d = (-c(E + 2 * h, t) + 8.0 * c(E + h, t) - 8.0 * c(E - h, t) + c(E - 2 * h, t)) / (12 * h);
  return -I1 * d * c(E, t).adjoint();
}

}  // namespace

TEST_CASE("build_two_channel examples") {
  CHECK(max_abs(build_two_channel({0, 0, 0, 0}) - Mat::Identity(2, 2)) < 1e-15);
  Mat swap(2, 2);
  swap << 0, I1, I1, 0;
  CHECK(max_abs(build_two_channel({M_PI / 2, 0, 0, 0}) - swap) < 1e-15);

  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> U(-4, 4);
  for (int k = 0; k < 50; ++k) {
    const double th = U(rng), al = U(rng), ph = U(rng), ga = U(rng);
    const Mat S = build_two_channel({th, al, ph, ga});
    CHECK(max_abs(S - two_channel_ref(th, al, ph, ga)) < 1e-14);
    const cplx det = S(0, 0) * S(1, 1) - S(0, 1) * S(1, 0);
    CHECK(std::abs(det - std::exp(2.0 * I1 * ga)) < 1e-12);
    CHECK(unitarity_residual(S) < 1e-14);
  }
}

TEST_CASE("decompose_two_channel round trip and tie-breaks") {
  const TwoChannelParams id = decompose_two_channel(Mat::Identity(2, 2));
  CHECK(std::abs(id.theta) < 1e-15);
  CHECK(std::abs(id.alpha) < 1e-15);
  CHECK(std::abs(id.phi) < 1e-15);
  CHECK(std::abs(id.gamma) < 1e-15);

  const TwoChannelParams p = decompose_two_channel(two_channel_ref(0.3, 1.0, 2.0, 0.5));
  CHECK(std::abs(p.theta - 0.3) < 1e-10);
  CHECK(std::abs(p.alpha - 1.0) < 1e-10);
  CHECK(std::abs(p.phi - 2.0) < 1e-10);
  CHECK(std::abs(p.gamma - 0.5) < 1e-10);

  Mat swap(2, 2);
  swap << 0, I1, I1, 0;
  const TwoChannelParams s = decompose_two_channel(swap);
  CHECK(std::abs(s.theta - M_PI / 2) < 1e-12);
  CHECK(s.alpha == 0.0);
  CHECK(std::abs(s.phi) < 1e-12);
  CHECK(std::abs(s.gamma) < 1e-12);

  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> U(-6, 6);
  for (int k = 0; k < 100; ++k) {
    const Mat S = two_channel_ref(U(rng), U(rng), U(rng), U(rng));
    const TwoChannelParams q = decompose_two_channel(S);
    CHECK(q.gamma >= 0.0);
    CHECK(q.gamma < M_PI);
    CHECK(q.theta >= 0.0);
    CHECK(q.theta <= M_PI / 2);
    CHECK(max_abs(build_two_channel(q) - S) < 1e-10);
  }
}

TEST_CASE("decompose rejects non-unitary input") {
  Mat A = Mat::Identity(2, 2);
  A(0, 1) = 1e-3;
  try {
    decompose_two_channel(A);
    FAIL("expected NonUnitary");
  } catch (const PumpError& e) {
    CHECK(e.kind() == ErrorKind::NonUnitary);
  }
}

TEST_CASE("U-turn differential data") {
  const double omega = 2 * M_PI, ell = 1.3;
  const PumpCycle c = uturn(omega, ell);
  QuadratureSpec q;
  for (double E : {0.3, 1.0, 4.0})
    for (double t : {0.1, 0.45}) {
      const DifferentialData d = differential_data(c, E, t, q);
      Mat e = Mat::Zero(2, 2);
      e(0, 0) = -omega;
      e(1, 1) = omega;
      CHECK(max_abs(d.energy_shift - e) < 1e-8);
      const double tau = ell / std::sqrt(2 * E);
      CHECK(max_abs(d.time_delay - tau * Mat::Identity(2, 2)) < 1e-8);
      CHECK(max_abs(d.curvature) < 1e-8);
    }
}

TEST_CASE("static cycle has no energy shift or curvature") {
  PumpCycle c;
  c.evaluate = [](double E, double) { return two_channel_ref(0.4 + 0.1 * E, 0.2 * std::sqrt(E), 1.0, E); };
  const DifferentialData d = differential_data(c, 1.1, 0.3, QuadratureSpec{});
  CHECK(max_abs(d.energy_shift) == 0.0);
  CHECK(max_abs(d.curvature) < 1e-12);
  CHECK(max_abs(d.time_delay) > 0.1);
}

TEST_CASE("optimal pump energy shift is proportional to sigma_3") {
  ModelSpec m;
  m.kind = ModelKind::Optimal;
  m.theta.offset = 0.6;
  m.alpha.offset = 0.4;
  m.xi.rate = 0.3;
  m.xi.amplitude = 0.05;
  const PumpCycle c = make_pump(m);
  const double kF = std::sqrt(2 * m.mu);
  for (double t : {0.1, 0.3, 0.8}) {
    const double chi_dot = 2 * kF * drive_rate(m.xi, t, m);
    Mat e = Mat::Zero(2, 2);
    e(0, 0) = -chi_dot;
    e(1, 1) = chi_dot;
    CHECK(max_abs(differential_data(c, m.mu, t, QuadratureSpec{}).energy_shift - e) < 1e-8);
  }
}

TEST_CASE("energy shift and time delay are Hermitian; curvature traceless") {
  QuadratureSpec q;
  for (int n : {2, 3, 4})
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      const PumpCycle c = random_analytic_cycle(n, seed);
      for (double t : {0.05, 0.5, 0.77}) {
        const DifferentialData d = differential_data(c, 1.0, t, q);
        CHECK(max_abs(d.energy_shift - d.energy_shift.adjoint()) < 1e-14);
        CHECK(max_abs(d.time_delay - d.time_delay.adjoint()) < 1e-14);
        CHECK(max_abs(d.curvature - d.curvature.adjoint()) < 1e-12);
        CHECK(std::abs(d.curvature.trace()) < 1e-7);
        CHECK(d.hermitization_correction < 10 * q.hermiticity_tol);
      }
    }
}

TEST_CASE("random cycles are unitary and periodic") {
  for (int n : {2, 3, 4}) {
    const PumpCycle c = random_analytic_cycle(n, 3 + n, 1.5);
    for (double E : {0.2, 1.0, 3.0})
      for (double t : {0.0, 0.4, 1.1}) {
        CHECK(unitarity_residual(c(E, t)) < 1e-12);
        CHECK(max_abs(c(E, t + 1.5) - c(E, t)) < 1e-12);
      }
  }
}

TEST_CASE("derivative error falls fourfold when steps halve") {
  const PumpCycle c = random_analytic_cycle(3, 21);
  QuadratureSpec q;
  // at these coarse steps the anti-Hermitian part is the truncation error being measured
  q.hermiticity_tol = std::numeric_limits<double>::infinity();
  const double E = 1.2, t = 0.37;
  const Mat eref = energy_shift_ref(c, E, t, 1e-3);
  const Mat tref = time_delay_ref(c, E, t, 1e-3);
  const double h = 2e-3;
  const DifferentialData a = differential_data_steps(c, E, t, h, h, q);
  const DifferentialData b = differential_data_steps(c, E, t, h / 2, h / 2, q);
  const double ea = max_abs(a.energy_shift - eref), eb = max_abs(b.energy_shift - eref);
  const double ta = max_abs(a.time_delay - tref), tb = max_abs(b.time_delay - tref);
  CHECK(ea / eb == doctest::Approx(4.0).epsilon(0.05));
  CHECK(ta / tb == doctest::Approx(4.0).epsilon(0.05));
}

TEST_CASE("default-step derivatives agree with a fourth-order reference") {
  const PumpCycle c = random_analytic_cycle(4, 5);
  const DifferentialData d = differential_data(c, 0.9, 0.61, QuadratureSpec{});
  CHECK(max_abs(d.energy_shift - energy_shift_ref(c, 0.9, 0.61, 1e-3)) < 1e-7);
  CHECK(max_abs(d.time_delay - time_delay_ref(c, 0.9, 0.61, 1e-3)) < 1e-7);
}

TEST_CASE("curvature matches the mixed-derivative identity") {
  QuadratureSpec q;
  for (int n : {2, 3, 4}) {
    const PumpCycle c = random_analytic_cycle(n, 40 + n);
    for (double t : {0.2, 0.7}) {
      const OmegaIdentity w = omega_identity(c, 1.0, t, q);
      CHECK(w.residual < q.omega_identity_tol);
      CHECK(w.mixed_residual < q.omega_identity_tol);
      const OmegaIdentity h = omega_identity(c, 1.0, t, q, 0.5);
      CHECK(w.residual / h.residual == doctest::Approx(4.0).epsilon(0.15));
    }
  }
}

TEST_CASE("deterministic scattering has zero curvature") {
  // A permutation times energy- and time-dependent phases.
  PumpCycle c;
  c.n_channels = 3;
  c.evaluate = [](double E, double t) {
    Mat P = Mat::Zero(3, 3);
    P(0, 2) = P(1, 0) = P(2, 1) = 1;
    Eigen::VectorXcd ph(3);
    ph << std::exp(I1 * (E * t + std::sin(t))), std::exp(I1 * (E * E - t)), std::exp(I1 * std::cos(E + 2 * t));
    return Mat(P * ph.asDiagonal());
  };
  const DifferentialData d = differential_data(c, 1.3, 0.4, QuadratureSpec{});
  CHECK(max_abs(d.energy_shift) > 0.5);
  CHECK(max_abs(d.time_delay) > 0.5);
  CHECK(max_abs(d.curvature) < 1e-8);
}

TEST_CASE("energy stencil must stay above threshold") {
  QuadratureSpec q;
  const PumpCycle c = uturn(1.0, 1.0);
  try {
    differential_data(c, 5e-6, 0.1, q);
    FAIL("expected StencilOutOfDomain");
  } catch (const PumpError& e) {
    CHECK(e.kind() == ErrorKind::StencilOutOfDomain);
  }
}

TEST_CASE("non-unitary evaluation is reported") {
  PumpCycle c;
  c.evaluate = [](double, double t) { return Mat((1.0 + 0.01 * t) * Mat::Identity(2, 2)); };
  try {
    differential_data(c, 1.0, 0.5, QuadratureSpec{});
    FAIL("expected NonUnitary");
  } catch (const PumpError& e) {
    CHECK(e.kind() == ErrorKind::NonUnitary);
  }
}

TEST_CASE("gauge and fiducial transformations") {
  PumpCycle c;
  c.evaluate = [](double, double t) { return two_channel_ref(0.7, 0.3 + t, 1.1, 0.2); };
  const double mu = 1.0, kF = std::sqrt(2 * mu);

  const PumpCycle same = apply_gauge_and_fiducial(c, {0, 0}, {0, 0});
  CHECK(max_abs(same(mu, 0.3) - c(mu, 0.3)) == 0.0);

  const double xi = 0.13;
  const TwoChannelParams p0 = decompose_two_channel(c(mu, 0.3));
  const TwoChannelParams p1 = decompose_two_channel(apply_gauge_and_fiducial(c, {0, 0}, {xi, xi})(mu, 0.3));
  CHECK(std::abs(p1.gamma - p0.gamma - 2 * kF * xi) < 1e-12);
  CHECK(std::abs(p1.theta - p0.theta) < 1e-12);

  const double g = 0.4;
  const TwoChannelParams p2 = decompose_two_channel(apply_gauge_and_fiducial(c, {g, 0}, {0, 0})(mu, 0.3));
  CHECK(std::abs(p2.theta - p0.theta) < 1e-12);
  CHECK(std::abs(p2.gamma - p0.gamma) < 1e-12);
  CHECK(std::abs(p2.alpha - p0.alpha) < 1e-12);
  CHECK(std::abs(std::remainder(p2.phi - p0.phi + g, 2 * M_PI)) < 1e-12);
}

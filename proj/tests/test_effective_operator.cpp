// SPDX-License-Identifier: Apache-2.0
#include <catch_amalgamated.hpp>

#include <cmath>
#include <numbers>

#include "thintube/cross_section.hpp"
#include "thintube/effective_operator.hpp"

using namespace thintube;
using Catch::Matchers::WithinAbs;

namespace {

constexpr double kPi = std::numbers::pi;

std::vector<double> lowest(const EffectiveCoefficients& co, int m, int order = 6) {
  return spectrum_G0(assemble_G0(co, order), m).report.eigenvalues;
}

double max_diff(const std::vector<double>& a, const std::vector<double>& b) {
  REQUIRE(a.size() == b.size());
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a[i] - b[i]));
  return d;
}

// Smooth periodic test coefficients on [0, l).
EffectiveCoefficients smooth_coefficients(int n, double shift_a = 0.0, double sign = 1.0) {
  const double l = 2.0 * kPi;
  std::vector<double> a(n), v(n);
  for (int i = 0; i < n; ++i) {
    const double s = l * i / n;
    a[i] = sign * (0.3 + 0.4 * std::cos(s) - 0.2 * std::sin(2.0 * s)) + shift_a;
    v[i] = 1.0 + 0.5 * std::sin(s) + 0.25 * std::cos(3.0 * s);
  }
  return coefficients_from_samples(l, a, v, 1.0);
}

}  // namespace

TEST_CASE("analytic_constant_spectrum examples", "[effective][analytic]") {
  const auto s0 = analytic_constant_spectrum(0.0, 0.0, 2.0 * kPi, 3);
  REQUIRE(s0.size() == 3);
  CHECK_THAT(s0[0], WithinAbs(0.0, 1e-15));
  CHECK_THAT(s0[1], WithinAbs(1.0, 1e-15));
  CHECK_THAT(s0[2], WithinAbs(1.0, 1e-15));
  const auto half = analytic_constant_spectrum(0.5, 0.0, 2.0 * kPi, 2);
  CHECK_THAT(half[0], WithinAbs(0.25, 1e-15));
  CHECK_THAT(half[1], WithinAbs(0.25, 1e-15));
  const double l = 3.7;
  const auto shifted = analytic_constant_spectrum(2.0 * kPi / l, 0.4, l, 7);
  const auto base = analytic_constant_spectrum(0.0, 0.4, l, 7);
  CHECK(max_diff(shifted, base) <= 1e-12);
  CHECK_THROWS_AS(analytic_constant_spectrum(0.0, 0.0, 1.0, 0), Error);
}

TEST_CASE("unit circle with zero potential: n^2 + 3/4", "[effective][benchmark]") {
  const ClosedCurve circle = make_circle(1.0);
  for (int n : {256, 512}) {
    const auto co = effective_coefficients(circle, RotationProfile::zero(), zero_potential(), 0.0, 1.0, n);
    for (double v : co.V) CHECK_THAT(v, WithinAbs(0.75, 1e-12));
    const auto ev = lowest(co, 7);
    CHECK(max_diff(ev, analytic_constant_spectrum(0.0, 0.75, 2.0 * kPi, 7)) <= 1e-6);
  }
}

TEST_CASE("a = 1/2: doubly degenerate (n - 1/2)^2 + 3/4", "[effective][benchmark]") {
  const auto ev = lowest(constant_coefficients(2.0 * kPi, 0.5, 0.75, 256), 6);
  const auto ref = analytic_constant_spectrum(0.5, 0.75, 2.0 * kPi, 6);
  CHECK(max_diff(ev, ref) <= 1e-6);
  for (int k = 0; k < 6; k += 2) CHECK_THAT(ev[k + 1] - ev[k], WithinAbs(0.0, 1e-8));
  CHECK_THAT(ev[0], WithinAbs(1.0, 1e-6));
}

TEST_CASE("axial field on the unit circle: a = B0/2", "[effective][potential]") {
  const ClosedCurve circle = make_circle(1.0);
  for (double b0 : {1.0, 2.5}) {
    for (double a : tangential_potential(circle, axial_uniform(b0), 64)) CHECK_THAT(a, WithinAbs(0.5 * b0, 1e-12));
    const auto co = effective_coefficients(circle, RotationProfile::zero(), axial_uniform(b0), 0.0, 1.0, 512);
    CHECK_THAT(co.flux(), WithinAbs(kPi * b0, 1e-10));
    CHECK(max_diff(lowest(co, 5), analytic_constant_spectrum(0.5 * b0, 0.75, 2.0 * kPi, 5)) <= 1e-6);
  }
}

TEST_CASE("constant coefficients match the closed form to 1e-8", "[effective][benchmark]") {
  const double l = 5.0;
  const auto ev = lowest(constant_coefficients(l, 0.37, 0.2, 512), 5);
  CHECK(max_diff(ev, analytic_constant_spectrum(0.37, 0.2, l, 5)) <= 1e-8);
}

TEST_CASE("zero potential and pure gradients have no circulation", "[effective][potential]") {
  const ClosedCurve knot = make_torus_knot(2, 3, 1.0, 0.3);
  for (double a : tangential_potential(knot, zero_potential(), 32)) CHECK(a == 0.0);
  const ScalarField chi = polynomial_scalar({{1.0, {1, 1, 0}}, {0.5, {0, 2, 1}}, {-0.3, {3, 0, 0}}});
  const auto phases = tangential_link_phases(knot, gauge_of(chi), 128);
  double circulation = 0.0;
  for (double p : phases) circulation += p;
  CHECK_THAT(circulation, WithinAbs(0.0, 1e-10));
  // Each link phase is the increment of chi between the two nodes.
  const double h = knot.length() / 128;
  for (int i = 0; i < 128; i += 17)
    CHECK_THAT(phases[i], WithinAbs(chi.value(knot.jet((i + 1) * h).r) - chi.value(knot.jet(i * h).r), 1e-10));
}

TEST_CASE("G0 is Hermitian and bounded below by min V", "[effective][property]") {
  const auto co = smooth_coefficients(128);
  const auto g = assemble_G0(co);
  CHECK(hermitian_defect(g) <= 1e-14);
  const double vmin = *std::min_element(co.V.begin(), co.V.end());
  CHECK(lowest(co, 1)[0] >= vmin - 1e-10);
}

TEST_CASE("flux is only defined modulo 2 pi", "[effective][property]") {
  // Adding 1 to a on l = 2 pi adds 2 pi to the flux.
  const auto base = lowest(smooth_coefficients(256), 6);
  CHECK(max_diff(base, lowest(smooth_coefficients(256, 1.0), 6)) <= 1e-10);
  CHECK(max_diff(base, lowest(smooth_coefficients(256, -2.0), 6)) <= 1e-10);
}

TEST_CASE("only the mean of a matters", "[effective][property]") {
  const int n = 256;
  const auto full = smooth_coefficients(n);
  const FluxDatum d = flux_datum(full);
  CHECK_THAT(d.phi, WithinAbs(0.3 * 2.0 * kPi, 1e-12));
  std::vector<double> mean(n, d.phi / full.length);
  const auto reduced = coefficients_from_samples(full.length, mean, full.V, 1.0);
  CHECK(max_diff(lowest(full, 6), lowest(reduced, 6)) <= 1e-8);
  double removable = 0.0;
  for (double r : d.removable_part) removable += r;
  CHECK_THAT(removable, WithinAbs(0.0, 1e-12));
}

TEST_CASE("time reversal a -> -a preserves the spectrum", "[effective][property]") {
  CHECK(max_diff(lowest(smooth_coefficients(256), 6), lowest(smooth_coefficients(256, 0.0, -1.0), 6)) <= 1e-10);
}

TEST_CASE("second-order stencil self-converges at order >= 1.9", "[effective][property]") {
  const auto ref = lowest(smooth_coefficients(1024), 4, 6);
  std::vector<double> err;
  for (int n : {32, 64, 128}) err.push_back(max_diff(lowest(smooth_coefficients(n), 4, 2), ref));
  CHECK(std::log2(err[0] / err[1]) >= 1.9);
  CHECK(std::log2(err[1] / err[2]) >= 1.9);
  // Higher-order stencils are more accurate on the same grid.
  CHECK(max_diff(lowest(smooth_coefficients(64), 4, 4), ref) < err[1]);
  CHECK(max_diff(lowest(smooth_coefficients(64), 4, 6), ref) < max_diff(lowest(smooth_coefficients(64), 4, 4), ref));
}

TEST_CASE("torus knot coefficients self-converge", "[effective][knot]") {
  // Torsion stays within [-3, 0.1] for this knot; slimmer knots develop sharp torsion peaks.
  const ClosedCurve knot = make_torus_knot(2, 3, 2.0, 1.0);
  const auto rot = RotationProfile::linear(1.0, knot.length());
  auto run = [&](int n) {
    return lowest(effective_coefficients(knot, rot, axial_uniform(0.7), 0.14, std::nullopt, n), 4);
  };
  CHECK(max_diff(run(512), run(1024)) <= 1e-6);
}

TEST_CASE("square cross-section lifts the spectrum above the disk", "[effective][knot]") {
  const ClosedCurve knot = make_torus_knot(2, 3, 2.0, 1.0);
  const auto sq = make_square(1.0, 1.0 / 32);
  const auto disk = make_disk(0.5, 1.0 / 32);
  const double c_sq = coupling_estimate(ground_mode(sq), sq).value;
  const double c_disk = coupling_estimate(ground_mode(disk), disk).value;
  CHECK(c_sq > 0.1);
  CHECK(c_disk < 1e-2);
  auto first = [&](double c) {
    return lowest(effective_coefficients(knot, RotationProfile::zero(), zero_potential(), c, std::nullopt, 512), 1)[0];
  };
  CHECK(first(c_sq) > first(c_disk));
}

TEST_CASE("invalid grids are rejected", "[effective][errors]") {
  CHECK_THROWS_AS(constant_coefficients(1.0, 0.0, 0.0, 4), Error);
  CHECK_THROWS_AS(effective_coefficients(make_circle(1.0), RotationProfile::zero(), zero_potential(), 0.0, 1.0, 7),
                  Error);
  CHECK_THROWS_AS(second_difference_weights(3), Error);
}

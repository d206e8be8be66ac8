// SPDX-License-Identifier: Apache-2.0
#pragma once

// One-dimensional effective operator on the closed curve,
//   G0 w = (-i d_s - a(s))^2 w + V(s) w,
//   a = <A(r), T>,  V = C(Q) (tau + alpha')^2 - k^2 / 4 + c,
// discretised on a periodic grid with link-phase stencils.

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Sparse>

#include "thintube/curve_geometry.hpp"
#include "thintube/error.hpp"
#include "thintube/hermitian_eigs.hpp"
#include "thintube/potential.hpp"
#include "thintube/quadrature.hpp"

namespace thintube {

struct EffectiveCoefficients {
  double length = 0.0;
  double c = 0.0;
  double C_Q = 0.0;
  std::vector<double> s;
  std::vector<double> a;           // tangential potential at nodes
  std::vector<double> V;           // scalar potential at nodes
  std::vector<double> link_phase;  // int_{s_i}^{s_{i+1}} a ds, last entry wraps to s = l
  std::string descriptor;

  int n() const { return static_cast<int>(s.size()); }
  double spacing() const { return length / n(); }
  double flux() const {
    double phi = 0.0;
    for (double p : link_phase) phi += p;
    return phi;
  }
};

struct FluxDatum {
  double phi = 0.0;                    // int_S a ds
  std::vector<double> removable_part;  // a(s) - phi / l
};

inline FluxDatum flux_datum(const EffectiveCoefficients& co) {
  FluxDatum f;
  f.phi = co.flux();
  for (double v : co.a) f.removable_part.push_back(v - f.phi / co.length);
  return f;
}

/// a(s_i) = <A(r(s_i)), T(s_i)> on the uniform grid s_i = i l / n.
inline std::vector<double> tangential_potential(const ClosedCurve& curve, const PotentialField& a, int n) {
  std::vector<double> out(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const CurveJet j = curve.jet(curve.length() * i / n);
    out[i] = a(j.r).dot(j.d1);
  }
  return out;
}

/// Line integrals of A along the curve between consecutive grid nodes.
inline std::vector<double> tangential_link_phases(const ClosedCurve& curve, const PotentialField& a, int n) {
  const double h = curve.length() / n;
  std::vector<double> out(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i)
    out[i] = h * integrate_unit([&](double t) {
      const CurveJet j = curve.jet((i + t) * h);
      return a(j.r).dot(j.d1);
    });
  return out;
}

/// Exact interval integrals of the trigonometric interpolant of periodic samples.
inline std::vector<double> spectral_link_integrals(const std::vector<double>& samples, double length) {
  const int n = static_cast<int>(samples.size());
  const double h = length / n;
  const int kmax = (n - 1) / 2;  // Nyquist cosine integrates to zero over every grid interval
  std::vector<double> ac(kmax + 1, 0.0), as(kmax + 1, 0.0);
  for (int k = 0; k <= kmax; ++k) {
    for (int j = 0; j < n; ++j) {
      const double ang = 2.0 * std::numbers::pi * k * j / n;
      ac[k] += samples[j] * std::cos(ang);
      as[k] += samples[j] * std::sin(ang);
    }
    ac[k] *= (k == 0 ? 1.0 : 2.0) / n;
    as[k] *= 2.0 / n;
  }
  std::vector<double> out(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    double v = ac[0] * h;
    for (int k = 1; k <= kmax; ++k) {
      const double w = 2.0 * std::numbers::pi * k / length;
      const double s0 = i * h, s1 = (i + 1) * h;
      v += ac[k] * (std::sin(w * s1) - std::sin(w * s0)) / w - as[k] * (std::cos(w * s1) - std::cos(w * s0)) / w;
    }
    out[i] = v;
  }
  return out;
}

/// Default spectral shift: max k^2 / 4 + 1.
inline double default_shift(double k_max) { return 0.25 * k_max * k_max + 1.0; }

inline EffectiveCoefficients effective_coefficients(const ClosedCurve& curve, const RotationProfile& rotation,
                                                    const PotentialField& a, double C_Q, std::optional<double> c,
                                                    int n) {
  if (n < 8) throw Error(ErrorCode::InvalidArgument, "N_s must be >= 8");
  EffectiveCoefficients co;
  co.length = curve.length();
  co.C_Q = C_Q;
  co.c = c ? *c : default_shift(max_curvature(curve));
  co.a = tangential_potential(curve, a, n);
  co.link_phase = tangential_link_phases(curve, a, n);
  for (int i = 0; i < n; ++i) {
    const double s = co.length * i / n;
    const FrenetData f = frenet(curve, rotation, s);
    co.s.push_back(s);
    co.V.push_back(C_Q * f.twist() * f.twist() - 0.25 * f.k * f.k + co.c);
  }
  co.descriptor = curve.descriptor() + ";" + rotation.descriptor + ";" + a.descriptor;
  return co;
}

/// Coefficients from periodic samples of a and V; link phases integrate the
/// trigonometric interpolant of a exactly.
inline EffectiveCoefficients coefficients_from_samples(double length, std::vector<double> a, std::vector<double> v,
                                                       double c = 0.0) {
  const int n = static_cast<int>(a.size());
  if (n < 8 || v.size() != a.size()) throw Error(ErrorCode::InvalidArgument, "need >= 8 matching samples");
  EffectiveCoefficients co;
  co.length = length;
  co.c = c;
  for (int i = 0; i < n; ++i) co.s.push_back(length * i / n);
  co.link_phase = spectral_link_integrals(a, length);
  co.a = std::move(a);
  co.V = std::move(v);
  co.descriptor = "samples";
  return co;
}

inline EffectiveCoefficients constant_coefficients(double length, double a0, double v0, int n) {
  return coefficients_from_samples(length, std::vector<double>(n, a0), std::vector<double>(n, v0));
}

/// Central second-difference weights c_0..c_{p/2} for order p in {2, 4, 6}.
inline std::vector<double> second_difference_weights(int order) {
  switch (order) {
    case 2: return {-2.0, 1.0};
    case 4: return {-5.0 / 2.0, 4.0 / 3.0, -1.0 / 12.0};
    case 6: return {-49.0 / 18.0, 3.0 / 2.0, -3.0 / 20.0, 1.0 / 90.0};
    default: throw Error(ErrorCode::InvalidArgument, "stencil order must be 2, 4 or 6");
  }
}

/// Periodic link-phase discretisation of G0: entry (i, i+m) = -c_m exp(-i theta_{i,i+m}) / h^2
/// with theta the integral of a from s_i to s_{i+m}.
inline SparseMatrix<cplx> assemble_G0(const EffectiveCoefficients& co, int order = 6) {
  const int n = co.n();
  if (n < 8) throw Error(ErrorCode::InvalidArgument, "N_s must be >= 8");
  const std::vector<double> w = second_difference_weights(order);
  const int half = static_cast<int>(w.size()) - 1;
  const double h = co.spacing(), inv = 1.0 / (h * h);
  std::vector<double> cumulative(static_cast<std::size_t>(n) + 1, 0.0);
  for (int i = 0; i < n; ++i) cumulative[i + 1] = cumulative[i] + co.link_phase[i];
  const double phi = cumulative[n];
  auto theta = [&](int i, int m) {
    const int j = i + m;
    return j < n ? cumulative[j] - cumulative[i] : cumulative[j - n] + phi - cumulative[i];
  };
  std::vector<Eigen::Triplet<cplx>> t;
  t.reserve(static_cast<std::size_t>(n) * (2 * half + 1));
  for (int i = 0; i < n; ++i) {
    t.emplace_back(i, i, cplx(-w[0] * inv + co.V[i]));
    for (int m = 1; m <= half; ++m) {
      const int j = (i + m) % n;
      const cplx e = -w[m] * inv * std::polar(1.0, -theta(i, m));
      t.emplace_back(i, j, e);
      t.emplace_back(j, i, std::conj(e));
    }
  }
  SparseMatrix<cplx> g(n, n);
  g.setFromTriplets(t.begin(), t.end());
  return g;
}

/// m smallest values of (2 pi n / l - a0)^2 + V0 over n in Z, with multiplicity.
inline std::vector<double> analytic_constant_spectrum(double a0, double v0, double length, int m) {
  if (m < 1) throw Error(ErrorCode::InvalidArgument, "m must be >= 1");
  const double w = 2.0 * std::numbers::pi / length;
  const long centre = std::lround(a0 / w);
  std::vector<double> vals;
  for (long n = centre - m - 1; n <= centre + m + 1; ++n) {
    const double d = w * static_cast<double>(n) - a0;
    vals.push_back(d * d + v0);
  }
  std::sort(vals.begin(), vals.end());
  vals.resize(static_cast<std::size_t>(m));
  return vals;
}

inline EigenPairs<cplx> spectrum_G0(const SparseMatrix<cplx>& g, int m, const EigenOptions& opts = {}) {
  auto pairs = smallest_eigs(g, m, opts);
  for (std::size_t i = 0; i < pairs.report.residual_norms.size(); ++i)
    if (pairs.report.residual_norms[i] > opts.tol * std::max(1.0, std::abs(pairs.report.eigenvalues[i])))
      throw Error(ErrorCode::SolverFailure, "G0 eigen-residual above tolerance");
  return pairs;
}

}  // namespace thintube

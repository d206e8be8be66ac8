// SPDX-License-Identifier: Apache-2.0
#pragma once

// Renormalised form g_eps on S x Q as a sparse Hermitian matrix.
//
// With theta = tau + alpha' and d_phi = y2 d3 - y3 d2, the form is
//   g(v) = int beta^-2 |D1 v|^2 + eps^-2 (|D_y v|^2 - lambda0 |v|^2) + (c - k^2 / (4 beta^2)) |v|^2,
//   D1 v = -i (D_s v - theta D_phi v + Im(A1~) v),   Im(A1~) = -(d_s beta - theta d_phi beta) / (2 beta),
// where D_s and D_y are magnetic covariant derivatives. The discrete form uses
// link phases exp(-i int A.df) on every s- and y-link, so it is exactly gauge
// covariant on the grid.
//
// Unknowns are ordered s-major: index i * n_y + j for s-node i and Q-node j.
// The uniform quadrature weight h_s h^2 is divided out, so H is the operator
// matrix and the form value is h_s h^2 v^H H v.

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Sparse>

#include "thintube/cross_section.hpp"
#include "thintube/curve_geometry.hpp"
#include "thintube/error.hpp"
#include "thintube/hermitian_eigs.hpp"
#include "thintube/potential.hpp"
#include "thintube/quadrature.hpp"

namespace thintube {

/// Geometric arrays shared by every potential on the same (curve, Q, eps, N_s).
struct TubeGeometry {
  int n_s = 0;
  int n_y = 0;
  double eps = 0.0;
  double length = 0.0;
  double k_max = 0.0;
  std::vector<double> twist_node;      // theta(s_i)
  std::vector<double> twist_mid;       // theta(s_{i+1/2})
  std::vector<double> weight_mid;      // beta^-2 at (s_{i+1/2}, y_j)
  std::vector<double> im_a1_mid;       // Im A1~ at (s_{i+1/2}, y_j)
  std::vector<double> curvature_term;  // k^2 / (4 beta^2) at nodes
  double min_beta = 1.0;

  double h_s() const { return length / n_s; }
  std::size_t dof() const { return static_cast<std::size_t>(n_s) * static_cast<std::size_t>(n_y); }
};

struct PulledBackPotentials {
  TubeGeometry geometry;
  std::vector<double> s;
  // Node arrays, index i * n_y + j.
  std::vector<double> A_hat1, A_hat2, A_hat3;  // <A o f, T>, <A o f, N>, <A o f, B>
  std::vector<cplx> A_tilde1;
  std::vector<double> A_tilde2, A_tilde3;      // eps <A o f, N_alpha>, eps <A o f, B_alpha>
  // Link phases.
  std::vector<double> phase_s;      // (i, j) -> (i + 1, j)
  std::vector<double> phase_east;   // (i, j) -> (i, east of j)
  std::vector<double> phase_north;  // (i, j) -> (i, north of j)
  // Transverse components on the axis y = 0, evaluated analytically.
  std::vector<double> axis_a2, axis_a3;
  bool gauge_applied = false;
  std::string descriptor;

  TransversePhases slice_phases(int i) const {
    const auto n_y = static_cast<std::size_t>(geometry.n_y);
    const auto b = static_cast<std::size_t>(i) * n_y;
    return {std::vector<double>(phase_east.begin() + b, phase_east.begin() + b + n_y),
            std::vector<double>(phase_north.begin() + b, phase_north.begin() + b + n_y)};
  }
};

namespace detail {

/// Derivative of the trigonometric interpolant of periodic samples.
inline std::vector<double> spectral_derivative(const std::vector<double>& f, double length) {
  const int n = static_cast<int>(f.size());
  const int kmax = (n - 1) / 2;
  std::vector<double> out(static_cast<std::size_t>(n), 0.0);
  for (int k = 1; k <= kmax; ++k) {
    double ac = 0.0, as = 0.0;
    for (int j = 0; j < n; ++j) {
      const double ang = 2.0 * std::numbers::pi * k * j / n;
      ac += f[j] * std::cos(ang);
      as += f[j] * std::sin(ang);
    }
    ac *= 2.0 / n;
    as *= 2.0 / n;
    const double w = 2.0 * std::numbers::pi * k / length;
    for (int j = 0; j < n; ++j) {
      const double ang = 2.0 * std::numbers::pi * k * j / n;
      out[j] += w * (-ac * std::sin(ang) + as * std::cos(ang));
    }
  }
  return out;
}

}  // namespace detail

/// Frame components of A o f, the modified potentials and all link phases.
inline PulledBackPotentials pullback(const ClosedCurve& curve, const RotationProfile& rotation,
                                     const PotentialField& a, double eps, const CrossSectionGrid& grid, int n_s) {
  if (n_s < 8) throw Error(ErrorCode::InvalidArgument, "N_s must be >= 8");
  if (!(eps > 0.0 && eps < 1.0)) throw Error(ErrorCode::InvalidArgument, "eps must lie in (0, 1)");
  const double k_max = max_curvature(curve);
  if (!validate_thinness(k_max, eps, grid.bounding_radius()))
    throw Error(ErrorCode::ThinnessViolated, "eps * max k * rho must stay below 0.95");

  const int n_y = grid.size();
  const double l = curve.length(), hs = l / n_s, h = grid.h();
  const std::size_t dof = static_cast<std::size_t>(n_s) * n_y;
  PulledBackPotentials p;
  TubeGeometry& g = p.geometry;
  g.n_s = n_s;
  g.n_y = n_y;
  g.eps = eps;
  g.length = l;
  g.k_max = k_max;
  g.twist_node.resize(n_s);
  g.twist_mid.resize(n_s);
  g.weight_mid.resize(dof);
  g.im_a1_mid.resize(dof);
  g.curvature_term.resize(dof);
  for (auto* v : {&p.A_hat1, &p.A_hat2, &p.A_hat3, &p.A_tilde2, &p.A_tilde3, &p.phase_s, &p.phase_east, &p.phase_north})
    v->assign(dof, 0.0);
  p.A_tilde1.assign(dof, cplx(0.0));
  p.axis_a2.resize(n_s);
  p.axis_a3.resize(n_s);

  std::array<FrenetData, 8> gauss;
  for (int i = 0; i < n_s; ++i) {
    const double s = i * hs;
    p.s.push_back(s);
    const FrenetData f = frenet(curve, rotation, s);
    const FrenetData fm = frenet(curve, rotation, s + 0.5 * hs);
    for (std::size_t q = 0; q < 8; ++q)
      gauss[q] = frenet(curve, rotation, s + 0.5 * hs * (GaussLegendre8::nodes[q] + 1.0));
    g.twist_node[i] = f.twist();
    g.twist_mid[i] = fm.twist();
    const Vec3 a_axis = a(f.r);
    p.axis_a2[i] = eps * a_axis.dot(f.N_alpha);
    p.axis_a3[i] = eps * a_axis.dot(f.B_alpha);

    for (int j = 0; j < n_y; ++j) {
      const std::size_t idx = static_cast<std::size_t>(i) * n_y + j;
      const double y2 = grid.node(j).y2, y3 = grid.node(j).y3;
      const double b = beta(f, eps, y2, y3);
      const double bm = beta(fm, eps, y2, y3);
      if (!(b > 0.0 && bm > 0.0)) throw Error(ErrorCode::ThinnessViolated, "beta is not positive on the grid");
      g.min_beta = std::min({g.min_beta, b, bm});

      const Vec3 av = a(tube_point(f, eps, y2, y3));
      p.A_hat1[idx] = av.dot(f.T);
      p.A_hat2[idx] = av.dot(f.N);
      p.A_hat3[idx] = av.dot(f.B);
      p.A_tilde2[idx] = eps * av.dot(f.N_alpha);
      p.A_tilde3[idx] = eps * av.dot(f.B_alpha);
      const double im = -(beta_ds(f, eps, y2, y3) - f.twist() * beta_dphi(f, eps, y2, y3)) / (2.0 * b);
      p.A_tilde1[idx] = cplx(b * p.A_hat1[idx], im);

      g.weight_mid[idx] = 1.0 / (bm * bm);
      g.im_a1_mid[idx] = -(beta_ds(fm, eps, y2, y3) - fm.twist() * beta_dphi(fm, eps, y2, y3)) / (2.0 * bm);
      g.curvature_term[idx] = f.k * f.k / (4.0 * b * b);

      double ps = 0.0;
      for (std::size_t q = 0; q < 8; ++q)
        ps += GaussLegendre8::weights[q] *
              a(tube_point(gauss[q], eps, y2, y3)).dot(tube_tangent_s(gauss[q], eps, y2, y3));
      p.phase_s[idx] = 0.5 * hs * ps;
      if (grid.neighbor(j, East) >= 0)
        p.phase_east[idx] = eps * h * integrate_unit([&](double t) {
          return a(tube_point(f, eps, y2 + t * h, y3)).dot(f.N_alpha);
        });
      if (grid.neighbor(j, North) >= 0)
        p.phase_north[idx] = eps * h * integrate_unit([&](double t) {
          return a(tube_point(f, eps, y2, y3 + t * h)).dot(f.B_alpha);
        });
    }
  }
  p.descriptor = curve.descriptor() + ";" + rotation.descriptor + ";" + a.descriptor;
  return p;
}

/// Gauge transform by Phi(s, y) = y2 A2~(s, 0) + y3 A3~(s, 0). Link phases
/// change by exact differences of Phi, so the assembled spectrum is unchanged.
inline PulledBackPotentials gauge_shift(PulledBackPotentials p, const CrossSectionGrid& grid) {
  if (p.gauge_applied) throw Error(ErrorCode::AlreadyGauged, "gauge shift already applied");
  const TubeGeometry& g = p.geometry;
  const double h = grid.h();
  const std::vector<double> d2 = detail::spectral_derivative(p.axis_a2, g.length);
  const std::vector<double> d3 = detail::spectral_derivative(p.axis_a3, g.length);
  for (int i = 0; i < g.n_s; ++i) {
    const int next = (i + 1) % g.n_s;
    const double twist_node = g.twist_node[i];
    for (int j = 0; j < g.n_y; ++j) {
      const std::size_t idx = static_cast<std::size_t>(i) * g.n_y + j;
      const double y2 = grid.node(j).y2, y3 = grid.node(j).y3;
      p.phase_s[idx] -= (y2 * p.axis_a2[next] + y3 * p.axis_a3[next]) - (y2 * p.axis_a2[i] + y3 * p.axis_a3[i]);
      p.phase_east[idx] -= grid.neighbor(j, East) >= 0 ? h * p.axis_a2[i] : 0.0;
      p.phase_north[idx] -= grid.neighbor(j, North) >= 0 ? h * p.axis_a3[i] : 0.0;
      p.A_tilde2[idx] -= p.axis_a2[i];
      p.A_tilde3[idx] -= p.axis_a3[i];
      // A1~ is the component along d_s - theta d_phi.
      const double x_phi = y2 * d2[i] + y3 * d3[i] - twist_node * (y2 * p.axis_a3[i] - y3 * p.axis_a2[i]);
      p.A_tilde1[idx] -= x_phi;
    }
  }
  std::fill(p.axis_a2.begin(), p.axis_a2.end(), 0.0);
  std::fill(p.axis_a3.begin(), p.axis_a3.end(), 0.0);
  p.gauge_applied = true;
  return p;
}

struct TubeDiscretization {
  SparseMatrix<cplx> H;
  int n_s = 0;
  int n_y = 0;
  double eps = 0.0;
  double c = 0.0;
  double lambda0 = 0.0;
  double lower_bound = 0.0;  // c - max k^2 / (4 beta^2); H >= lower_bound
  double cell_weight = 0.0;  // h_s h^2
  std::string s_derivative = "link_forward";
  std::string descriptor;

  std::size_t dof() const { return static_cast<std::size_t>(n_s) * static_cast<std::size_t>(n_y); }
  /// g_eps(v) = h_s h^2 v^H H v.
  double form_value(const DenseVector<cplx>& v) const { return cell_weight * std::real(v.dot(H * v)); }
};

inline TubeDiscretization assemble(const PulledBackPotentials& p, const CrossSectionMode& mode,
                                   const CrossSectionGrid& grid, double c) {
  if (!p.gauge_applied) throw Error(ErrorCode::NotGauged, "apply gauge_shift before assembly");
  const TubeGeometry& g = p.geometry;
  if (g.n_y != grid.size()) throw Error(ErrorCode::InvalidArgument, "grid does not match the pulled-back data");
  if (!(c > 0.25 * g.k_max * g.k_max)) throw Error(ErrorCode::ShiftTooSmall, "c must exceed max k^2 / 4");
  const int n_s = g.n_s, n_y = g.n_y;
  const auto n = static_cast<Eigen::Index>(g.dof());
  const double hs = g.h_s(), h = grid.h(), eps = g.eps;
  auto at = [n_y](int i, int j) { return static_cast<Eigen::Index>(i) * n_y + j; };

  // E: s-edge (i, j) -> (i + 1, j), E = D_s - theta D_phi + Im(A1~) and D1 = -i E;
  // W is real, so D1^H W D1 = E^H W E.
  std::vector<Eigen::Triplet<cplx>> te;
  te.reserve(static_cast<std::size_t>(n) * 12);
  for (int i = 0; i < n_s; ++i) {
    const int ip = (i + 1) % n_s;
    const double theta = g.twist_mid[i];
    for (int j = 0; j < n_y; ++j) {
      const Eigen::Index row = at(i, j);
      const cplx link = std::polar(1.0, -p.phase_s[row]);
      te.emplace_back(row, at(i, j), cplx(-1.0 / hs));
      te.emplace_back(row, at(ip, j), link / hs);
      // Terms acting on the transported average abar_j' = (v_{i,j'} + e^{-i Theta} v_{i+1,j'}) / 2.
      auto add_avg = [&](int jj, cplx kappa) {
        if (jj < 0) return;
        te.emplace_back(row, at(i, jj), 0.5 * kappa);
        te.emplace_back(row, at(ip, jj), 0.5 * kappa * std::polar(1.0, -p.phase_s[at(i, jj)]));
      };
      add_avg(j, cplx(g.im_a1_mid[row]));
      if (theta != 0.0) {
        const double y2 = grid.node(j).y2, y3 = grid.node(j).y3;
        const double s2h = 0.5 / h;
        const int e = grid.neighbor(j, East), w = grid.neighbor(j, West);
        const int no = grid.neighbor(j, North), so = grid.neighbor(j, South);
        // -theta (y2 D3 - y3 D2) abar with centred covariant differences.
        if (e >= 0) add_avg(e, theta * y3 * s2h * std::polar(1.0, -p.phase_east[at(i, j)]));
        if (w >= 0) add_avg(w, -theta * y3 * s2h * std::polar(1.0, p.phase_east[at(i, w)]));
        if (no >= 0) add_avg(no, -theta * y2 * s2h * std::polar(1.0, -p.phase_north[at(i, j)]));
        if (so >= 0) add_avg(so, theta * y2 * s2h * std::polar(1.0, p.phase_north[at(i, so)]));
      }
    }
  }
  SparseMatrix<cplx> e(n, n);
  e.setFromTriplets(te.begin(), te.end());
  SparseMatrix<cplx> we = e;
  for (int k = 0; k < we.outerSize(); ++k)
    for (SparseMatrix<cplx>::InnerIterator it(we, k); it; ++it) it.valueRef() *= g.weight_mid[it.row()];
  SparseMatrix<cplx> hmat = SparseMatrix<cplx>(e.adjoint()) * we;

  // Transverse part eps^-2 (L_A - lambda0) per slice plus the diagonal potential.
  std::vector<Eigen::Triplet<cplx>> tt;
  tt.reserve(static_cast<std::size_t>(n) * 5);
  const double inv = 1.0 / (eps * eps * h * h);
  for (int i = 0; i < n_s; ++i)
    for (int j = 0; j < n_y; ++j) {
      const Eigen::Index r = at(i, j);
      tt.emplace_back(r, r, cplx(4.0 * inv - mode.lambda0 / (eps * eps) - g.curvature_term[r] + c));
      const int east = grid.neighbor(j, East), north = grid.neighbor(j, North);
      if (east >= 0) {
        const cplx link = -inv * std::polar(1.0, -p.phase_east[r]);
        tt.emplace_back(r, at(i, east), link);
        tt.emplace_back(at(i, east), r, std::conj(link));
      }
      if (north >= 0) {
        const cplx link = -inv * std::polar(1.0, -p.phase_north[r]);
        tt.emplace_back(r, at(i, north), link);
        tt.emplace_back(at(i, north), r, std::conj(link));
      }
    }
  SparseMatrix<cplx> trans(n, n);
  trans.setFromTriplets(tt.begin(), tt.end());
  hmat += trans;
  const SparseMatrix<cplx> adj = hmat.adjoint();
  hmat = (hmat + adj) * cplx(0.5);
  hmat.prune(cplx(0.0));
  hmat.makeCompressed();

  TubeDiscretization t;
  t.H = std::move(hmat);
  t.n_s = n_s;
  t.n_y = n_y;
  t.eps = eps;
  t.c = c;
  t.lambda0 = mode.lambda0;
  t.lower_bound = c - *std::max_element(g.curvature_term.begin(), g.curvature_term.end());
  t.cell_weight = hs * h * h;
  t.descriptor = p.descriptor;
  return t;
}

inline EigenOptions tube_eigen_options(const TubeDiscretization& t) {
  EigenOptions o;
  o.shift = std::min(0.0, t.lower_bound) - 1.0;
  return o;
}

inline EigenPairs<cplx> lowest_spectrum(const TubeDiscretization& t, int m, std::optional<EigenOptions> opts = {}) {
  if (m < 1 || static_cast<std::size_t>(m) > t.dof() / 10)
    throw Error(ErrorCode::InvalidArgument, "need 1 <= m <= dof / 10");
  const EigenOptions o = opts ? *opts : tube_eigen_options(t);
  auto pairs = smallest_eigs(t.H, m, o);
  for (std::size_t i = 0; i < pairs.report.residual_norms.size(); ++i)
    if (pairs.report.residual_norms[i] > o.tol * std::max(1.0, std::abs(pairs.report.eigenvalues[i])))
      throw Error(ErrorCode::SolverFailure, "tube eigen-residual above tolerance");
  return pairs;
}

}  // namespace thintube

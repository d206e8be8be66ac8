// SPDX-License-Identifier: Apache-2.0
#pragma once

// Cross-section Q on a uniform lattice with a Dirichlet mask. Nodes sit at
// offset + (i h, j h); a node belongs to the grid iff it lies strictly inside Q,
// so the boundary itself carries the zero Dirichlet value.

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <numbers>
#include <optional>
#include <queue>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "thintube/error.hpp"
#include "thintube/hermitian_eigs.hpp"
#include "thintube/quadrature.hpp"

namespace thintube {

struct ShapeDescriptor {
  std::string name;  // square | disk | rectangle | mask_file
  std::map<std::string, double> params;
  std::string path;  // mask_file only

  std::string describe() const {
    std::ostringstream os;
    os << name << '(';
    bool first = true;
    for (const auto& [k, v] : params) {
      os << (first ? "" : ",") << k << '=' << v;
      first = false;
    }
    if (!path.empty()) os << (first ? "" : ",") << "path=" << path;
    os << ')';
    return os.str();
  }
};

struct GridNode {
  int i = 0, j = 0;
  double y2 = 0.0, y3 = 0.0;
};

enum Direction : int { East = 0, West = 1, North = 2, South = 3 };

class CrossSectionGrid {
 public:
  CrossSectionGrid(ShapeDescriptor shape, double h, double offset2, double offset3, std::vector<std::array<int, 2>> cells,
                   double bounding_radius)
      : shape_(std::move(shape)), h_(h), offset_{offset2, offset3}, bounding_radius_(bounding_radius) {
    if (!(h_ > 0.0)) throw Error(ErrorCode::InvalidArgument, "grid spacing must be positive");
    if (cells.empty()) throw Error(ErrorCode::InvalidArgument, "cross-section mask is empty");
    std::sort(cells.begin(), cells.end(), [](const auto& a, const auto& b) {
      return a[1] != b[1] ? a[1] < b[1] : a[0] < b[0];
    });
    for (const auto& c : cells) {
      index_.emplace(key(c[0], c[1]), static_cast<int>(nodes_.size()));
      nodes_.push_back({c[0], c[1], offset2 + c[0] * h_, offset3 + c[1] * h_});
    }
    neighbors_.resize(nodes_.size());
    for (std::size_t n = 0; n < nodes_.size(); ++n) {
      const auto& g = nodes_[n];
      neighbors_[n] = {find(g.i + 1, g.j), find(g.i - 1, g.j), find(g.i, g.j + 1), find(g.i, g.j - 1)};
    }
    if (!connected()) throw Error(ErrorCode::InvalidArgument, "cross-section mask is not 4-connected");
  }

  const ShapeDescriptor& shape() const { return shape_; }
  double h() const { return h_; }
  int size() const { return static_cast<int>(nodes_.size()); }
  const GridNode& node(int n) const { return nodes_[n]; }
  const std::vector<GridNode>& nodes() const { return nodes_; }
  /// Neighbour index in direction d, or -1 when it lies outside the mask.
  int neighbor(int n, Direction d) const { return neighbors_[n][d]; }
  double bounding_radius() const { return bounding_radius_; }
  std::array<double, 4> bounding_box() const {
    double a2 = std::numeric_limits<double>::infinity(), b2 = -a2, a3 = a2, b3 = -a2;
    for (const auto& g : nodes_) {
      a2 = std::min(a2, g.y2 - h_);
      b2 = std::max(b2, g.y2 + h_);
      a3 = std::min(a3, g.y3 - h_);
      b3 = std::max(b3, g.y3 + h_);
    }
    return {a2, b2, a3, b3};
  }
  /// Node whose position is nearest to (y2, y3).
  int nearest(double y2, double y3) const {
    int best = 0;
    double d = std::numeric_limits<double>::infinity();
    for (int n = 0; n < size(); ++n) {
      const double e = std::hypot(nodes_[n].y2 - y2, nodes_[n].y3 - y3);
      if (e < d) { d = e; best = n; }
    }
    return best;
  }

 private:
  static long long key(int i, int j) { return (static_cast<long long>(i) << 32) ^ static_cast<unsigned int>(j); }
  int find(int i, int j) const {
    const auto it = index_.find(key(i, j));
    return it == index_.end() ? -1 : it->second;
  }
  bool connected() const {
    std::vector<char> seen(nodes_.size(), 0);
    std::queue<int> q;
    q.push(0);
    seen[0] = 1;
    std::size_t count = 1;
    while (!q.empty()) {
      const int n = q.front();
      q.pop();
      for (int nb : neighbors_[n])
        if (nb >= 0 && !seen[nb]) { seen[nb] = 1; ++count; q.push(nb); }
    }
    return count == nodes_.size();
  }

  ShapeDescriptor shape_;
  double h_;
  std::array<double, 2> offset_;
  double bounding_radius_;
  std::vector<GridNode> nodes_;
  std::vector<std::array<int, 4>> neighbors_;
  std::map<long long, int> index_;
};

namespace detail {

inline CrossSectionGrid grid_from_predicate(ShapeDescriptor shape, double h, double half_width2, double half_width3,
                                            double c2, double c3, double rho,
                                            const std::function<bool(double, double)>& inside) {
  const int i0 = static_cast<int>(std::floor((c2 - half_width2) / h)) - 1;
  const int i1 = static_cast<int>(std::ceil((c2 + half_width2) / h)) + 1;
  const int j0 = static_cast<int>(std::floor((c3 - half_width3) / h)) - 1;
  const int j1 = static_cast<int>(std::ceil((c3 + half_width3) / h)) + 1;
  std::vector<std::array<int, 2>> cells;
  for (int j = j0; j <= j1; ++j)
    for (int i = i0; i <= i1; ++i)
      if (inside(i * h, j * h)) cells.push_back({i, j});
  return CrossSectionGrid(std::move(shape), h, 0.0, 0.0, std::move(cells), rho);
}

// Strict interior test, robust to lattice points that sit on the boundary up to rounding.
inline bool strictly_less(double a, double b, double scale) { return a < b - 1e-12 * std::max(1.0, scale); }

}  // namespace detail

/// Axis-aligned square of the given side, centred at (c2, c3).
inline CrossSectionGrid make_square(double side, double h, double c2 = 0.0, double c3 = 0.0) {
  if (!(side > 0.0)) throw Error(ErrorCode::InvalidArgument, "square side must be positive");
  ShapeDescriptor d{"square", {{"side", side}, {"c2", c2}, {"c3", c3}}, {}};
  const double half = 0.5 * side;
  const double rho = std::hypot(std::abs(c2) + half, std::abs(c3) + half);
  return detail::grid_from_predicate(d, h, half, half, c2, c3, rho, [=](double y2, double y3) {
    return detail::strictly_less(std::abs(y2 - c2), half, side) && detail::strictly_less(std::abs(y3 - c3), half, side);
  });
}

inline CrossSectionGrid make_rectangle(double width, double height, double h, double c2 = 0.0, double c3 = 0.0) {
  if (!(width > 0.0 && height > 0.0)) throw Error(ErrorCode::InvalidArgument, "rectangle sides must be positive");
  ShapeDescriptor d{"rectangle", {{"width", width}, {"height", height}, {"c2", c2}, {"c3", c3}}, {}};
  const double hw = 0.5 * width, hh = 0.5 * height;
  const double rho = std::hypot(std::abs(c2) + hw, std::abs(c3) + hh);
  return detail::grid_from_predicate(d, h, hw, hh, c2, c3, rho, [=](double y2, double y3) {
    return detail::strictly_less(std::abs(y2 - c2), hw, width) && detail::strictly_less(std::abs(y3 - c3), hh, height);
  });
}

inline CrossSectionGrid make_disk(double radius, double h, double c2 = 0.0, double c3 = 0.0) {
  if (!(radius > 0.0)) throw Error(ErrorCode::InvalidArgument, "disk radius must be positive");
  ShapeDescriptor d{"disk", {{"radius", radius}, {"c2", c2}, {"c3", c3}}, {}};
  const double rho = std::hypot(c2, c3) + radius;
  return detail::grid_from_predicate(d, h, radius, radius, c2, c3, rho, [=](double y2, double y3) {
    return detail::strictly_less(std::hypot(y2 - c2, y3 - c3), radius, radius);
  });
}

/// Grey-map mask file:
///   P2
///   # spacing <h>
///   # origin <y2> <y3>
///   <width> <height>
///   <maxval>
///   <width*height values, top row first; nonzero = inside>
/// Pixel (col, row) sits at origin + (col h, (height - 1 - row) h).
inline CrossSectionGrid load_mask_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Config, "cannot open mask file " + path);
  std::string magic;
  in >> magic;
  if (magic != "P2") throw Error(ErrorCode::Config, "mask file must start with P2");
  double h = 0.0, o2 = 0.0, o3 = 0.0;
  bool have_h = false;
  std::vector<long> numbers;
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    if (!line.empty() && line[0] == '#') {
      std::string tag;
      char hash;
      ls >> hash >> tag;
      if (tag == "spacing") { ls >> h; have_h = true; }
      else if (tag == "origin") ls >> o2 >> o3;
      continue;
    }
    long v;
    while (ls >> v) numbers.push_back(v);
  }
  if (!have_h || !(h > 0.0)) throw Error(ErrorCode::Config, "mask file lacks a positive '# spacing' line");
  if (numbers.size() < 3) throw Error(ErrorCode::Config, "mask file header is incomplete");
  const long width = numbers[0], height = numbers[1];
  if (width < 1 || height < 1 || static_cast<long>(numbers.size()) != 3 + width * height)
    throw Error(ErrorCode::Config, "mask file size does not match its header");
  std::vector<std::array<int, 2>> cells;
  double rho = 0.0;
  for (long r = 0; r < height; ++r)
    for (long c = 0; c < width; ++c)
      if (numbers[3 + r * width + c] != 0) {
        const int i = static_cast<int>(c), j = static_cast<int>(height - 1 - r);
        cells.push_back({i, j});
        rho = std::max(rho, std::hypot(o2 + i * h, o3 + j * h));
      }
  ShapeDescriptor d{"mask_file", {{"spacing", h}}, path};
  return CrossSectionGrid(d, h, o2, o3, std::move(cells), rho + std::sqrt(2.0) * h);
}

// ---------------------------------------------------------------------------
// Operators

/// 5-point Dirichlet Laplacian -Delta_h on the mask.
inline SparseMatrix<double> dirichlet_laplacian(const CrossSectionGrid& g) {
  const double w = 1.0 / (g.h() * g.h());
  std::vector<Eigen::Triplet<double>> t;
  t.reserve(static_cast<std::size_t>(g.size()) * 5);
  for (int n = 0; n < g.size(); ++n) {
    t.emplace_back(n, n, 4.0 * w);
    for (int d = 0; d < 4; ++d) {
      const int nb = g.neighbor(n, static_cast<Direction>(d));
      if (nb >= 0) t.emplace_back(n, nb, -w);
    }
  }
  SparseMatrix<double> a(g.size(), g.size());
  a.setFromTriplets(t.begin(), t.end());
  return a;
}

/// Link phases of a transverse potential: east[n] = int A.dy from node n to its
/// east neighbour, north[n] likewise (zero where the neighbour is outside).
struct TransversePhases {
  std::vector<double> east;
  std::vector<double> north;
};

inline TransversePhases zero_phases(const CrossSectionGrid& g) {
  return {std::vector<double>(g.size(), 0.0), std::vector<double>(g.size(), 0.0)};
}

/// Link phases of (A2, A3)(y) by Gauss-Legendre integration along each link.
inline TransversePhases transverse_phases(const CrossSectionGrid& g,
                                          const std::function<std::array<double, 2>(double, double)>& a) {
  TransversePhases p = zero_phases(g);
  const double h = g.h();
  for (int n = 0; n < g.size(); ++n) {
    const auto& y = g.node(n);
    if (g.neighbor(n, East) >= 0) p.east[n] = h * integrate_unit([&](double t) { return a(y.y2 + t * h, y.y3)[0]; });
    if (g.neighbor(n, North) >= 0) p.north[n] = h * integrate_unit([&](double t) { return a(y.y2, y.y3 + t * h)[1]; });
  }
  return p;
}

/// Magnetic Dirichlet Laplacian with link phases: entry (n, m) = -exp(-i phi_{n->m}) / h^2.
inline SparseMatrix<cplx> magnetic_laplacian(const CrossSectionGrid& g, const TransversePhases& p) {
  const double w = 1.0 / (g.h() * g.h());
  std::vector<Eigen::Triplet<cplx>> t;
  t.reserve(static_cast<std::size_t>(g.size()) * 5);
  for (int n = 0; n < g.size(); ++n) {
    t.emplace_back(n, n, cplx(4.0 * w));
    const int e = g.neighbor(n, East), no = g.neighbor(n, North);
    if (e >= 0) {
      const cplx link = std::polar(w, -p.east[n]);
      t.emplace_back(n, e, -link);
      t.emplace_back(e, n, -std::conj(link));
    }
    if (no >= 0) {
      const cplx link = std::polar(w, -p.north[n]);
      t.emplace_back(n, no, -link);
      t.emplace_back(no, n, -std::conj(link));
    }
  }
  SparseMatrix<cplx> a(g.size(), g.size());
  a.setFromTriplets(t.begin(), t.end());
  return a;
}

// ---------------------------------------------------------------------------
// Ground mode

struct CrossSectionMode {
  double lambda0 = 0.0;
  double lambda1 = 0.0;    // second eigenvalue (simplicity gap)
  Eigen::VectorXd u0;      // h^2 sum u0^2 = 1, u0 >= 0
  double C_Q = 0.0;
  double residual = 0.0;   // ||(-Delta_h) u0 - lambda0 u0||_h
  std::string solver;

  double gap() const { return lambda1 - lambda0; }
};

inline EigenOptions cross_section_eigen_options() {
  EigenOptions o;
  o.dense_threshold = 400;
  return o;
}

inline double rotational_coupling(const CrossSectionMode& mode, const CrossSectionGrid& g);

inline CrossSectionMode ground_mode(const CrossSectionGrid& g, const EigenOptions& opts = cross_section_eigen_options()) {
  const SparseMatrix<double> lap = dirichlet_laplacian(g);
  const int m = std::min(2, g.size());
  auto pairs = smallest_eigs(lap, m, opts);
  CrossSectionMode mode;
  mode.lambda0 = pairs.report.eigenvalues[0];
  mode.lambda1 = m > 1 ? pairs.report.eigenvalues[1] : std::numeric_limits<double>::infinity();
  Eigen::VectorXd u = pairs.vectors.col(0);

  double c2 = 0.0, c3 = 0.0;
  for (const auto& n : g.nodes()) { c2 += n.y2; c3 += n.y3; }
  const int centre = g.nearest(c2 / g.size(), c3 / g.size());
  if (u(centre) < 0.0) u = -u;
  u /= g.h() * u.norm();
  // The ground state of a connected Dirichlet Laplacian has one sign; clip rounding noise.
  for (Eigen::Index i = 0; i < u.size(); ++i)
    if (u(i) < 0.0 && u(i) > -1e-12) u(i) = 0.0;
  mode.u0 = std::move(u);
  mode.residual = g.h() * (lap * mode.u0 - mode.lambda0 * mode.u0).norm();
  if (mode.residual > 1e-8 * std::max(1.0, mode.lambda0))
    throw Error(ErrorCode::SolverFailure, "cross-section eigen-residual above tolerance");
  mode.solver = pairs.report.method;
  mode.C_Q = rotational_coupling(mode, g);
  return mode;
}

namespace detail {

// Centred differences with the Dirichlet zero outside the mask.
inline std::array<double, 2> centred_gradient(const Eigen::VectorXd& u, const CrossSectionGrid& g, int n) {
  auto at = [&](int m) { return m >= 0 ? u(m) : 0.0; };
  const double inv = 0.5 / g.h();
  return {(at(g.neighbor(n, East)) - at(g.neighbor(n, West))) * inv,
          (at(g.neighbor(n, North)) - at(g.neighbor(n, South))) * inv};
}

}  // namespace detail

/// C(Q) = int |y2 d3 u0 - y3 d2 u0|^2 dy.
inline double rotational_coupling(const CrossSectionMode& mode, const CrossSectionGrid& g) {
  double sum = 0.0;
  for (int n = 0; n < g.size(); ++n) {
    const auto grad = detail::centred_gradient(mode.u0, g, n);
    const auto& y = g.node(n);
    const double v = y.y2 * grad[1] - y.y3 * grad[0];
    sum += v * v;
  }
  return g.h() * g.h() * sum;
}

/// Rebuild an analytic shape at another spacing. Mask files have no finer
/// description and return nothing.
inline std::optional<CrossSectionGrid> remesh(const ShapeDescriptor& s, double h) {
  auto p = [&](const char* k) {
    const auto it = s.params.find(k);
    return it == s.params.end() ? 0.0 : it->second;
  };
  if (s.name == "square") return make_square(p("side"), h, p("c2"), p("c3"));
  if (s.name == "rectangle") return make_rectangle(p("width"), p("height"), h, p("c2"), p("c3"));
  if (s.name == "disk") return make_disk(p("radius"), h, p("c2"), p("c3"));
  return std::nullopt;
}

struct CouplingEstimate {
  double value = 0.0;     // continuum estimate of C(Q)
  double discrete = 0.0;  // node rule on the given grid
  double coarse = 0.0;    // node rule at spacing 2h (extrapolated only)
  std::string method;     // "extrapolated" | "node"
};

/// The node rule ignores the strip between the outermost nodes and the
/// boundary, where the integrand does not vanish, so C_h = C(Q) + O(h). For
/// analytic shapes 2 C_h - C_2h removes the leading term; mask files fall back
/// to C_h. The tube operator itself converges to the C_h coefficient.
inline CouplingEstimate coupling_estimate(const CrossSectionMode& mode, const CrossSectionGrid& g) {
  CouplingEstimate e;
  e.discrete = e.value = mode.C_Q;
  e.method = "node";
  std::optional<CrossSectionGrid> coarse;
  try {
    coarse = remesh(g.shape(), 2.0 * g.h());
  } catch (const Error&) {
    return e;  // too coarse to form a connected mask
  }
  if (!coarse || coarse->size() < 9) return e;
  e.coarse = ground_mode(*coarse).C_Q;
  e.value = std::max(0.0, 2.0 * e.discrete - e.coarse);
  e.method = "extrapolated";
  return e;
}

/// |int u0 <grad u0, R y> dy| with R y = (y3, -y2); zero for the continuous mode.
inline double moment_identity(const CrossSectionMode& mode, const CrossSectionGrid& g) {
  double sum = 0.0;
  for (int n = 0; n < g.size(); ++n) {
    const auto grad = detail::centred_gradient(mode.u0, g, n);
    const auto& y = g.node(n);
    sum += mode.u0(n) * (grad[0] * y.y3 - grad[1] * y.y2);
  }
  return std::abs(g.h() * g.h() * sum);
}

/// Lowest eigenvalue of the magnetic slice operator with the given link phases.
inline double slice_magnetic_ground(const CrossSectionGrid& g, const TransversePhases& p,
                                    const EigenOptions& opts = cross_section_eigen_options()) {
  auto pairs = smallest_eigs(magnetic_laplacian(g, p), 1, opts);
  if (pairs.report.residual_norms[0] > opts.tol * std::max(1.0, std::abs(pairs.report.eigenvalues[0])))
    throw Error(ErrorCode::SolverFailure, "slice eigen-residual above tolerance");
  return pairs.report.eigenvalues[0];
}

inline double slice_magnetic_ground(const CrossSectionGrid& g,
                                    const std::function<std::array<double, 2>(double, double)>& a,
                                    const EigenOptions& opts = cross_section_eigen_options()) {
  return slice_magnetic_ground(g, transverse_phases(g, a), opts);
}

}  // namespace thintube

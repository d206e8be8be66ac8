// SPDX-License-Identifier: Apache-2.0
#pragma once

// Finite-dimensional model of sesquilinear forms on C^n. Inner products are
// conjugate-linear in the first slot: <z, w> = z^H w, and a Hermitian matrix M
// induces b(z, w) = <z, M w>.

#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <functional>
#include <limits>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "thintube/error.hpp"
#include "thintube/hermitian_eigs.hpp"

namespace thintube::forms {

using Matrix = DenseMatrix<cplx>;
using Vector = DenseVector<cplx>;
using Index = Eigen::Index;

/// +inf marks points outside the domain of a form.
inline constexpr double kOutsideDomain = std::numeric_limits<double>::infinity();

namespace detail {

inline double max_abs(const Matrix& m) { return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff(); }

inline Vector gaussian_vector(Index dim, std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  Vector v(dim);
  for (Index i = 0; i < dim; ++i) {
    const double re = g(rng);
    const double im = g(rng);
    v(i) = {re, im};
  }
  return v;
}

inline Matrix hermitian_part(const Matrix& m) { return (m + m.adjoint()) * cplx(0.5); }

}  // namespace detail

class HermitianFormMatrix {
 public:
  explicit HermitianFormMatrix(Matrix entries, double hermitian_tol = 1e-12) : entries_(std::move(entries)) {
    if (entries_.rows() == 0 || entries_.rows() != entries_.cols())
      throw Error(ErrorCode::InvalidArgument, "form matrix must be square and non-empty");
    const double scale = std::max(1.0, detail::max_abs(entries_));
    if (detail::max_abs(entries_ - entries_.adjoint()) > hermitian_tol * scale)
      throw Error(ErrorCode::NotHermitian, "form matrix is not Hermitian");
    entries_ = detail::hermitian_part(entries_);
    Eigen::SelfAdjointEigenSolver<Matrix> es(entries_, Eigen::EigenvaluesOnly);
    lower_bound_ = es.eigenvalues()(0);
    upper_bound_ = es.eigenvalues()(entries_.rows() - 1);
  }

  Index dim() const { return entries_.rows(); }
  const Matrix& entries() const { return entries_; }
  /// Smallest eigenvalue.
  double lower_bound() const { return lower_bound_; }
  double upper_bound() const { return upper_bound_; }

  cplx operator()(const Vector& zeta, const Vector& eta) const { return zeta.dot(entries_ * eta); }
  double quadratic(const Vector& zeta) const { return std::real(zeta.dot(entries_ * zeta)); }

 private:
  Matrix entries_;
  double lower_bound_ = 0.0;
  double upper_bound_ = 0.0;
};

/// F : C^dim -> [0, inf].
struct QuadraticFunctional {
  Index dim = 0;
  std::function<double(const Vector&)> evaluate;

  double operator()(const Vector& z) const { return evaluate(z); }

  static QuadraticFunctional from_matrix(Matrix m) {
    const Index n = m.rows();
    return {n, [m = std::move(m)](const Vector& z) { return std::real(z.dot(m * z)); }};
  }
};

class SubspaceProjector {
 public:
  explicit SubspaceProjector(Matrix p, double tol = 1e-12) : p_(std::move(p)) {
    if (p_.rows() == 0 || p_.rows() != p_.cols())
      throw Error(ErrorCode::InvalidArgument, "projector must be square and non-empty");
    if (detail::max_abs(p_ - p_.adjoint()) > tol || detail::max_abs(p_ * p_ - p_) > tol)
      throw Error(ErrorCode::InvalidArgument, "matrix is not an orthogonal projector");
    Eigen::SelfAdjointEigenSolver<Matrix> es(detail::hermitian_part(p_));
    std::vector<Index> keep;
    for (Index i = 0; i < p_.rows(); ++i)
      if (es.eigenvalues()(i) > 0.5) keep.push_back(i);
    basis_.resize(p_.rows(), static_cast<Index>(keep.size()));
    for (std::size_t k = 0; k < keep.size(); ++k) basis_.col(static_cast<Index>(k)) = es.eigenvectors().col(keep[k]);
  }

  /// Orthogonal projector onto the column span of `columns`.
  static SubspaceProjector onto_span(const Matrix& columns) {
    const Index n = columns.rows();
    Eigen::ColPivHouseholderQR<Matrix> qr(columns);
    const Index rank = qr.rank();
    const Matrix q = Matrix(qr.householderQ()).leftCols(rank);
    return SubspaceProjector(q * q.adjoint() + Matrix::Zero(n, n), 1e-10);
  }

  static SubspaceProjector identity(Index n) { return SubspaceProjector(Matrix::Identity(n, n)); }

  Index dim() const { return p_.rows(); }
  Index rank() const { return basis_.cols(); }
  const Matrix& matrix() const { return p_; }
  /// Orthonormal basis of the range.
  const Matrix& basis() const { return basis_; }
  bool contains(const Vector& z, double tol = 1e-12) const {
    return (z - p_ * z).norm() <= tol * std::max(1.0, z.norm());
  }

 private:
  Matrix p_;
  Matrix basis_;
};

// ---------------------------------------------------------------------------
// Quadratic-form properties and polarization

struct PropertyCheck {
  bool passed = true;
  double worst = 0.0;  // largest violation scaled by max(1, |values|)
};

struct QuadraticReport {
  // a) F(0)=0  b) F(t z) <= t^2 F(z)  c) parallelogram inequality
  // d) F(iz)=F(z)  e) F(cz)=|c|^2 F(z)  f) parallelogram equality
  std::array<PropertyCheck, 6> properties{};
  int samples = 0;

  const PropertyCheck& operator[](char name) const { return properties.at(static_cast<std::size_t>(name - 'a')); }
  bool sufficient() const {  // a) to d) characterise quadratic forms
    return properties[0].passed && properties[1].passed && properties[2].passed && properties[3].passed;
  }
  bool all_passed() const {
    for (const auto& p : properties)
      if (!p.passed) return false;
    return true;
  }
};

namespace detail {

// Comparisons on [0, inf] with a tolerance relative to the finite magnitudes.
inline double violation_le(double lhs, double rhs) {
  if (std::isinf(rhs)) return 0.0;
  if (std::isinf(lhs)) return std::numeric_limits<double>::infinity();
  const double scale = std::max({1.0, std::abs(lhs), std::abs(rhs)});
  return std::max(0.0, lhs - rhs) / scale;
}

inline double violation_eq(double lhs, double rhs) {
  if (std::isinf(lhs) && std::isinf(rhs)) return 0.0;
  if (std::isinf(lhs) || std::isinf(rhs)) return std::numeric_limits<double>::infinity();
  const double scale = std::max({1.0, std::abs(lhs), std::abs(rhs)});
  return std::abs(lhs - rhs) / scale;
}

inline double scaled_by(double factor, double value) { return factor == 0.0 ? 0.0 : factor * value; }

inline void record(PropertyCheck& p, double violation, double tol) {
  p.worst = std::max(p.worst, violation);
  if (violation > tol) p.passed = false;
}

}  // namespace detail

inline QuadraticReport check_quadratic(const QuadraticFunctional& f, int sample_count, std::uint64_t seed,
                                       double tol = 1e-10) {
  if (sample_count < 1) throw Error(ErrorCode::InvalidArgument, "sample_count must be >= 1");
  QuadraticReport rep;
  rep.samples = sample_count;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> t_dist(0.0, 3.0);
  const cplx i(0.0, 1.0);

  detail::record(rep.properties[0], detail::violation_eq(f(Vector::Zero(f.dim)), 0.0), tol);
  for (int k = 0; k < sample_count; ++k) {
    const Vector z = detail::gaussian_vector(f.dim, rng);
    const Vector w = detail::gaussian_vector(f.dim, rng);
    const double t = t_dist(rng);
    const Vector cv = detail::gaussian_vector(1, rng);
    const cplx c = cv(0);
    const double fz = f(z), fw = f(w), fsum = f(z + w), fdiff = f(z - w);

    detail::record(rep.properties[1], detail::violation_le(f(t * z), detail::scaled_by(t * t, fz)), tol);
    const double lhs = (std::isinf(fsum) || std::isinf(fdiff)) ? kOutsideDomain : fsum + fdiff;
    const double rhs = (std::isinf(fz) || std::isinf(fw)) ? kOutsideDomain : 2.0 * fz + 2.0 * fw;
    detail::record(rep.properties[2], detail::violation_le(lhs, rhs), tol);
    detail::record(rep.properties[3], detail::violation_eq(f(i * z), fz), tol);
    detail::record(rep.properties[4], detail::violation_eq(f(c * z), detail::scaled_by(std::norm(c), fz)), tol);
    detail::record(rep.properties[5], detail::violation_eq(lhs, rhs), tol);
  }
  return rep;
}

/// b(z, w) = B(z, w) - i B(z, i w) with B(z, w) = (F(z + w) - F(z - w)) / 4.
inline cplx polarized_value(const QuadraticFunctional& f, const Vector& zeta, const Vector& eta) {
  const cplx i(0.0, 1.0);
  auto real_part = [&](const Vector& a, const Vector& b) {
    const double plus = f(a + b);
    const double minus = f(a - b);
    if (std::isinf(plus) || std::isinf(minus))
      throw Error(ErrorCode::InfiniteValue, "functional is infinite on a polarization point");
    return 0.25 * (plus - minus);
  };
  return real_part(zeta, eta) - i * real_part(zeta, Vector(i * eta));
}

struct PolarizeOptions {
  int samples = 16;
  std::uint64_t seed = 11;
  double tol = 1e-10;
};

/// Recovers the matrix of the sesquilinear form behind F.
inline Matrix polarize(const QuadraticFunctional& f, const PolarizeOptions& opts = {}) {
  const Index n = f.dim;
  if (n < 1) throw Error(ErrorCode::InvalidArgument, "functional dimension must be >= 1");
  const QuadraticFunctional finite{n, [&f](const Vector& z) {
                                      const double v = f(z);
                                      if (!std::isfinite(v))
                                        throw Error(ErrorCode::InfiniteValue, "functional takes the value +inf");
                                      return v;
                                    }};
  Matrix m(n, n);
  for (Index j = 0; j < n; ++j)
    for (Index k = 0; k < n; ++k)
      m(j, k) = polarized_value(finite, Vector::Unit(n, j), Vector::Unit(n, k));

  const QuadraticReport rep = check_quadratic(f, opts.samples, opts.seed, opts.tol);
  for (int p = 0; p < 4; ++p)
    if (std::isinf(rep.properties[p].worst))
      throw Error(ErrorCode::InfiniteValue, "functional takes the value +inf");
  if (!rep.sufficient()) throw Error(ErrorCode::NonQuadratic, "sampled properties a)-d) fail");
  return m;
}

// ---------------------------------------------------------------------------
// Variational characterisation: T z = P0 eta  <=>  z minimises
// g(z) = b(z) - <eta, z> - <z, eta>, with b = +inf off range(P0).

inline double variational_functional(const HermitianFormMatrix& m, const SubspaceProjector& p0, const Vector& eta,
                                     const Vector& zeta) {
  if (!p0.contains(zeta, 1e-12)) return kOutsideDomain;
  return m.quadratic(zeta) - 2.0 * std::real(eta.dot(zeta));
}

struct VariationalSolution {
  Vector zeta;
  double residual = 0.0;           // ||M zeta - P0 eta||
  bool certified = false;          // g(zeta) <= g(zeta + delta) on all sampled delta
  double smallest_increase = 0.0;  // min over samples of g(zeta + delta) - g(zeta)
  int perturbations = 0;
};

struct VariationalOptions {
  double commute_tol = 1e-10;
  double residual_tol = 1e-8;
  int perturbations = 64;
  std::uint64_t seed = 5;
};

inline VariationalSolution solve_variational(const HermitianFormMatrix& m, const Vector& eta,
                                             const SubspaceProjector& p0, const VariationalOptions& opts = {}) {
  const Index n = m.dim();
  if (eta.size() != n || p0.dim() != n) throw Error(ErrorCode::InvalidArgument, "dimension mismatch");
  const Matrix& a = m.entries();
  const Matrix& p = p0.matrix();
  const double scale = std::max(1.0, detail::max_abs(a));
  if (detail::max_abs(a * p - p * a) > opts.commute_tol * scale)
    throw Error(ErrorCode::NotBlock, "form matrix does not commute with the projector");

  VariationalSolution out;
  const Matrix& q = p0.basis();
  if (q.cols() == 0) {
    out.zeta = Vector::Zero(n);
  } else {
    const Matrix restricted = detail::hermitian_part(q.adjoint() * a * q);
    Eigen::SelfAdjointEigenSolver<Matrix> es(restricted);
    if (es.eigenvalues()(0) <= 1e-12 * scale)
      throw Error(ErrorCode::Singular, "restricted block is not positive definite");
    const Vector rhs = q.adjoint() * eta;
    out.zeta = q * (es.eigenvectors() * (es.eigenvalues().cwiseInverse().cast<cplx>().asDiagonal() *
                                         (es.eigenvectors().adjoint() * rhs)));
  }
  out.residual = (a * out.zeta - p * eta).norm();
  if (out.residual > opts.residual_tol * std::max(1.0, eta.norm()))
    throw Error(ErrorCode::Singular, "restricted block is numerically singular");

  // Certificate: sampled perturbations inside range(P0) at several scales, plus
  // some outside (where g = +inf).
  const double g0 = variational_functional(m, p0, eta, out.zeta);
  std::mt19937_64 rng(opts.seed);
  out.certified = true;
  out.smallest_increase = std::numeric_limits<double>::infinity();
  const double gscale = std::max(1.0, std::abs(g0));
  for (int k = 0; k < opts.perturbations; ++k) {
    Vector delta = detail::gaussian_vector(n, rng);
    const bool inside = (k % 8) != 7;
    if (inside) delta = p * delta;
    delta *= std::pow(10.0, -(k % 4));
    const double g1 = variational_functional(m, p0, eta, out.zeta + delta);
    const double inc = g1 - g0;
    out.smallest_increase = std::min(out.smallest_increase, inc);
    if (inc < -1e-12 * gscale) out.certified = false;
    ++out.perturbations;
  }
  return out;
}

/// Independent route to the minimiser: steepest descent with exact line search
/// inside range(P0). Used to cross-check solve_variational.
inline Vector minimize_by_descent(const HermitianFormMatrix& m, const Vector& eta, const SubspaceProjector& p0,
                                  const Vector& start, double gradient_tol = 1e-13, int max_iterations = 200000) {
  const Matrix& a = m.entries();
  const Matrix& p = p0.matrix();
  Vector z = p * start;
  const Vector target = p * eta;
  const double scale = std::max(1.0, target.norm());
  for (int it = 0; it < max_iterations; ++it) {
    const Vector r = p * (a * z) - target;  // half the Wirtinger gradient
    const double rr = r.squaredNorm();
    if (std::sqrt(rr) <= gradient_tol * scale) return z;
    const double curvature = std::real(r.dot(a * r));
    if (curvature <= 0.0) throw Error(ErrorCode::Singular, "functional is not strictly convex on range(P0)");
    z -= (rr / curvature) * r;
  }
  throw Error(ErrorCode::NoConvergence, "descent did not reach the gradient tolerance");
}

// ---------------------------------------------------------------------------
// Quantitative resolvent comparison

namespace detail {

inline Matrix positive_inverse(const HermitianFormMatrix& m) {
  if (m.lower_bound() <= 0.0) throw Error(ErrorCode::NotPositive, "form matrix is not positive definite");
  Eigen::LLT<Matrix> llt(m.entries());
  if (llt.info() != Eigen::Success) throw Error(ErrorCode::NotPositive, "Cholesky failed");
  return llt.solve(Matrix::Identity(m.dim(), m.dim()));
}

inline double hermitian_norm(const Matrix& h) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(hermitian_part(h), Eigen::EigenvaluesOnly);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

}  // namespace detail

/// Sharp q with |b(psi) - m(psi)| <= q m(psi): spectral radius of
/// M^{-1/2} (B - M) M^{-1/2}, computed through the Cholesky factor of M.
inline double form_deviation(const HermitianFormMatrix& b, const HermitianFormMatrix& m) {
  if (b.dim() != m.dim()) throw Error(ErrorCode::InvalidArgument, "dimension mismatch");
  if (m.lower_bound() <= 0.0) throw Error(ErrorCode::NotPositive, "reference form is not positive definite");
  Eigen::LLT<Matrix> llt(m.entries());
  if (llt.info() != Eigen::Success) throw Error(ErrorCode::NotPositive, "Cholesky of reference form failed");
  const Matrix lower = llt.matrixL();
  const Matrix diff = b.entries() - m.entries();
  const Matrix half = lower.triangularView<Eigen::Lower>().solve(diff);
  const Matrix whitened = lower.triangularView<Eigen::Lower>().solve(Matrix(half.adjoint()));
  return detail::hermitian_norm(whitened);
}

/// ||B^{-1} - M^{-1}||.
inline double resolvent_gap(const HermitianFormMatrix& b, const HermitianFormMatrix& m) {
  if (b.dim() != m.dim()) throw Error(ErrorCode::InvalidArgument, "dimension mismatch");
  return detail::hermitian_norm(detail::positive_inverse(b) - detail::positive_inverse(m));
}

struct ResolventBound {
  double q = 0.0;
  double gap = 0.0;
  double bound = 0.0;  // q (||B^{-1}|| / (1 - q) + ||M^{-1}||)
  double margin() const { return bound - gap; }
};

inline ResolventBound resolvent_bound(const HermitianFormMatrix& b, const HermitianFormMatrix& m) {
  ResolventBound out;
  out.q = form_deviation(b, m);
  if (out.q >= 1.0) throw Error(ErrorCode::InvalidArgument, "form deviation q must be < 1");
  out.gap = resolvent_gap(b, m);
  if (b.lower_bound() <= 0.0) throw Error(ErrorCode::NotPositive, "form B is not positive definite");
  const double c1 = 1.0 / (1.0 - out.q);
  out.bound = out.q * (c1 / b.lower_bound() + 1.0 / m.lower_bound());
  return out;
}

// ---------------------------------------------------------------------------
// Penalised family B0 + eps^{-2} P and its limit on ker P.

struct PenalizedLimitTable {
  std::vector<double> eps;
  std::vector<double> errors;  // ||(B0 + P/eps^2 + lambda)^{-1} - (T + lambda)^{-1} P0||
  bool nonincreasing = true;
  Matrix projector;            // P0 onto ker P
  Matrix limit_resolvent;      // (T + lambda)^{-1} P0
};

inline PenalizedLimitTable penalized_resolvent_limit(const HermitianFormMatrix& b0, const HermitianFormMatrix& penalty,
                                                     double lambda, const std::vector<double>& eps_list,
                                                     double kernel_tol = 1e-10) {
  const Index n = b0.dim();
  if (penalty.dim() != n) throw Error(ErrorCode::InvalidArgument, "dimension mismatch");
  if (!(lambda > 0.0)) throw Error(ErrorCode::InvalidArgument, "lambda must be > 0");
  const double pscale = std::max(1.0, std::abs(penalty.upper_bound()));
  if (penalty.lower_bound() < -kernel_tol * pscale)
    throw Error(ErrorCode::InvalidArgument, "penalty must be positive semidefinite");

  Eigen::SelfAdjointEigenSolver<Matrix> pes(penalty.entries());
  std::vector<Index> kernel;
  for (Index i = 0; i < n; ++i)
    if (pes.eigenvalues()(i) <= kernel_tol * pscale) kernel.push_back(i);
  if (kernel.empty()) throw Error(ErrorCode::TrivialKernel, "penalty has trivial kernel");
  Matrix q(n, static_cast<Index>(kernel.size()));
  for (std::size_t k = 0; k < kernel.size(); ++k) q.col(static_cast<Index>(k)) = pes.eigenvectors().col(kernel[k]);

  PenalizedLimitTable out;
  out.projector = q * q.adjoint();
  const Matrix restricted = detail::hermitian_part(q.adjoint() * b0.entries() * q) +
                            cplx(lambda) * Matrix::Identity(q.cols(), q.cols());
  Eigen::LLT<Matrix> rllt(restricted);
  if (rllt.info() != Eigen::Success)
    throw Error(ErrorCode::NotPositive, "limit form plus lambda is not positive on ker P");
  out.limit_resolvent = q * rllt.solve(Matrix(q.adjoint()));

  for (std::size_t k = 0; k < eps_list.size(); ++k) {
    const double e = eps_list[k];
    if (!(e > 0.0)) throw Error(ErrorCode::InvalidArgument, "eps must be > 0");
    const Matrix a = b0.entries() + cplx(1.0 / (e * e)) * penalty.entries() + cplx(lambda) * Matrix::Identity(n, n);
    Eigen::SelfAdjointEigenSolver<Matrix> es(detail::hermitian_part(a));
    const auto& ev = es.eigenvalues();
    if (ev.cwiseAbs().minCoeff() <= 1e-12 * ev.cwiseAbs().maxCoeff())
      throw Error(ErrorCode::NearSingular, "penalised operator is singular at eps = " + std::to_string(e));
    const Matrix resolvent = es.eigenvectors() * ev.cwiseInverse().cast<cplx>().asDiagonal() * es.eigenvectors().adjoint();
    out.eps.push_back(e);
    out.errors.push_back(detail::hermitian_norm(resolvent - out.limit_resolvent));
    if (k > 0 && out.errors[k] > out.errors[k - 1] + 1e-12) out.nonincreasing = false;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Seeded random instances for property sweeps.

inline Matrix random_hermitian(Index dim, std::mt19937_64& rng) {
  Matrix x(dim, dim);
  for (Index j = 0; j < dim; ++j) x.col(j) = detail::gaussian_vector(dim, rng);
  return detail::hermitian_part(x);
}

/// X^H X / dim + shift I.
inline Matrix random_positive(Index dim, std::mt19937_64& rng, double shift = 0.0) {
  Matrix x(dim, dim);
  for (Index j = 0; j < dim; ++j) x.col(j) = detail::gaussian_vector(dim, rng);
  return detail::hermitian_part(x.adjoint() * x / static_cast<double>(dim)) +
         cplx(shift) * Matrix::Identity(dim, dim);
}

inline Vector random_vector(Index dim, std::mt19937_64& rng) { return detail::gaussian_vector(dim, rng); }

}  // namespace thintube::forms

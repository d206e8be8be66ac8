// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <type_traits>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>
#ifdef THINTUBE_HAVE_CHOLMOD
#include <Eigen/CholmodSupport>
#endif

#include "thintube/error.hpp"

namespace thintube {

using cplx = std::complex<double>;

template <class Scalar>
using DenseMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <class Scalar>
using DenseVector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <class Scalar>
using SparseMatrix = Eigen::SparseMatrix<Scalar, Eigen::ColMajor, int>;

/// Lowest part of a Hermitian spectrum plus the evidence that it was found.
struct SpectrumReport {
  std::vector<double> eigenvalues;     // ascending
  std::vector<double> residual_norms;  // ||Hx - lambda x|| / ||x||
  int iterations = 0;
  std::string method;  // "dense" | "lanczos"
  std::size_t dim = 0;
  std::size_t nonzeros = 0;
  double shift = 0.0;
  double tolerance = 0.0;
};

template <class Scalar>
struct EigenPairs {
  SpectrumReport report;
  DenseMatrix<Scalar> vectors;  // unit columns, same order as report.eigenvalues
};

struct EigenOptions {
  double tol = 1e-8;            // residual bound, scaled by max(1, |lambda|)
  int block_size = 0;           // 0 -> max(4, m + 2)
  int max_iterations = 400;     // block expansion steps summed over restarts
  int max_basis = 0;            // 0 -> automatic
  std::optional<double> shift;  // shift-invert pole; default: Gershgorin lower bound
  std::uint64_t seed = 20240501;
  std::size_t dense_threshold = 3000;
  bool force_sparse = false;
  double hermitian_tol = 1e-10;
};

namespace detail {

template <class Scalar>
inline constexpr bool is_complex_v = !std::is_same_v<Scalar, double>;

template <class Scalar>
Scalar random_scalar(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  if constexpr (is_complex_v<Scalar>) {
    const double re = u(rng);
    const double im = u(rng);
    return {re, im};
  } else {
    return u(rng);
  }
}

template <class Scalar>
DenseMatrix<Scalar> random_block(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng) {
  DenseMatrix<Scalar> x(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) x(i, j) = random_scalar<Scalar>(rng);
  return x;
}

/// Cholesky of a sparse Hermitian positive definite matrix.
template <class Scalar>
class SparseLLT {
 public:
  bool compute(const SparseMatrix<Scalar>& a) {
    impl_ = std::make_unique<Impl>();
    impl_->compute(a);
    return impl_->info() == Eigen::Success;
  }

  template <class Rhs>
  DenseMatrix<Scalar> solve(const Rhs& b) const {
    return impl_->solve(b);
  }

 private:
#ifdef THINTUBE_HAVE_CHOLMOD
  using Impl = Eigen::CholmodSupernodalLLT<SparseMatrix<Scalar>, Eigen::Lower>;
#else
  using Impl = Eigen::SimplicialLLT<SparseMatrix<Scalar>, Eigen::Lower>;
#endif
  std::unique_ptr<Impl> impl_;
};

inline const char* factorization_tag() {
#ifdef THINTUBE_HAVE_CHOLMOD
  return "cholmod-supernodal-llt";
#else
  return "eigen-simplicial-llt";
#endif
}

template <class Scalar>
SparseMatrix<Scalar> shifted(const SparseMatrix<Scalar>& h, double shift) {
  SparseMatrix<Scalar> id(h.rows(), h.cols());
  id.setIdentity();
  SparseMatrix<Scalar> a = h - Scalar(shift) * id;
  a.makeCompressed();
  return a;
}

/// Orthonormalise the columns of w against v (assumed orthonormal) and among
/// themselves. Columns that collapse are replaced by fresh random directions.
template <class Scalar>
void orthonormalize_against(const DenseMatrix<Scalar>& v, DenseMatrix<Scalar>& w,
                            std::mt19937_64& rng) {
  for (Eigen::Index j = 0; j < w.cols(); ++j) {
    for (int attempt = 0; attempt < 4; ++attempt) {
      auto col = w.col(j);
      const double before = col.norm();
      for (int pass = 0; pass < 2; ++pass) {
        if (v.cols() > 0) col -= v * (v.adjoint() * col);
        for (Eigen::Index k = 0; k < j; ++k) col -= w.col(k) * w.col(k).dot(col);
      }
      const double after = col.norm();
      if (after > 1e-10 * std::max(before, 1e-300) && after > 0.0) {
        col /= after;
        break;
      }
      col = random_block<Scalar>(w.rows(), 1, rng);
    }
  }
}

template <class Scalar>
double max_abs_coeff(const SparseMatrix<Scalar>& h) {
  double m = 0.0;
  for (int k = 0; k < h.outerSize(); ++k)
    for (typename SparseMatrix<Scalar>::InnerIterator it(h, k); it; ++it)
      m = std::max(m, std::abs(it.value()));
  return m;
}

}  // namespace detail

/// Largest entrywise deviation from Hermitian symmetry, relative to max(1, max|H_ij|).
template <class Scalar>
double hermitian_defect(const SparseMatrix<Scalar>& h) {
  if (h.rows() != h.cols()) return std::numeric_limits<double>::infinity();
  SparseMatrix<Scalar> diff = h - SparseMatrix<Scalar>(h.adjoint());
  return detail::max_abs_coeff(diff) / std::max(1.0, detail::max_abs_coeff(h));
}

template <class Scalar>
double hermitian_defect(const DenseMatrix<Scalar>& h) {
  if (h.rows() != h.cols()) return std::numeric_limits<double>::infinity();
  const double scale = std::max(1.0, h.cwiseAbs().maxCoeff());
  return (h - h.adjoint()).cwiseAbs().maxCoeff() / scale;
}

/// Gershgorin lower bound on the spectrum.
template <class Scalar>
double gershgorin_lower(const SparseMatrix<Scalar>& h) {
  std::vector<double> diag(h.rows(), 0.0), radius(h.rows(), 0.0);
  for (int k = 0; k < h.outerSize(); ++k)
    for (typename SparseMatrix<Scalar>::InnerIterator it(h, k); it; ++it) {
      if (it.row() == it.col())
        diag[it.row()] = std::real(it.value());
      else
        radius[it.row()] += std::abs(it.value());
    }
  double lo = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < diag.size(); ++i) lo = std::min(lo, diag[i] - radius[i]);
  return lo;
}

namespace detail {

/// Solve (T - sigma) x = b in place for the symmetric tridiagonal T = (d, e),
/// Gaussian elimination with partial pivoting; tiny pivots are replaced by
/// `floor`, which is what inverse iteration needs at an exact eigenvalue.
inline void tridiagonal_shifted_solve(const Eigen::VectorXd& d, const Eigen::VectorXd& e, double sigma, double floor,
                                      Eigen::VectorXd& b) {
  const Eigen::Index n = d.size();
  Eigen::VectorXd dl = e, dd = d.array() - sigma, du = e, du2 = Eigen::VectorXd::Zero(std::max<Eigen::Index>(n - 2, 0));
  std::vector<char> swapped(static_cast<std::size_t>(std::max<Eigen::Index>(n - 1, 0)), 0);
  auto guard = [floor](double& x) {
    if (std::abs(x) < floor) x = x < 0.0 ? -floor : floor;
  };
  for (Eigen::Index i = 0; i + 1 < n; ++i) {
    if (std::abs(dd(i)) >= std::abs(dl(i))) {
      guard(dd(i));
      const double f = dl(i) / dd(i);
      dl(i) = f;
      dd(i + 1) -= f * du(i);
    } else {
      const double f = dd(i) / dl(i);
      dd(i) = dl(i);
      dl(i) = f;
      const double t = du(i);
      du(i) = dd(i + 1);
      dd(i + 1) = t - f * dd(i + 1);
      if (i + 2 < n) {
        du2(i) = du(i + 1);
        du(i + 1) = -f * du(i + 1);
      }
      swapped[static_cast<std::size_t>(i)] = 1;
    }
  }
  guard(dd(n - 1));
  for (Eigen::Index i = 0; i + 1 < n; ++i) {
    if (swapped[static_cast<std::size_t>(i)]) {
      const double t = b(i);
      b(i) = b(i + 1);
      b(i + 1) = t - dl(i) * b(i);
    } else {
      b(i + 1) -= dl(i) * b(i);
    }
  }
  b(n - 1) /= dd(n - 1);
  if (n > 1) b(n - 2) = (b(n - 2) - du(n - 2) * b(n - 1)) / dd(n - 2);
  for (Eigen::Index i = n - 3; i >= 0; --i) b(i) = (b(i) - du(i) * b(i + 1) - du2(i) * b(i + 2)) / dd(i);
}

/// Householder tridiagonalisation, eigenvalues of the real tridiagonal, then
/// inverse iteration for the m wanted vectors only. Vectors of eigenvalues
/// closer than 1e-3 ||T|| are orthogonalised against each other.
template <class Scalar>
EigenPairs<Scalar> dense_smallest(const DenseMatrix<Scalar>& h, int m) {
  using Index = Eigen::Index;
  const Index n = h.rows();
  EigenPairs<Scalar> out;
  Eigen::VectorXd values;
  if (n <= 8 || 4 * static_cast<Index>(m) > n) {
    Eigen::SelfAdjointEigenSolver<DenseMatrix<Scalar>> es(h);
    if (es.info() != Eigen::Success) throw Error(ErrorCode::NoConvergence, "dense Hermitian eigensolver failed");
    out.vectors = es.eigenvectors().leftCols(m);
    values = es.eigenvalues().head(m);
  } else {
    Eigen::Tridiagonalization<DenseMatrix<Scalar>> tri(h);
    const Eigen::VectorXd d = tri.diagonal();
    const Eigen::VectorXd e = tri.subDiagonal();
    // The tridiagonal QR iteration expects entries of order one.
    const double unit = std::max({d.cwiseAbs().maxCoeff(), e.cwiseAbs().maxCoeff(), 1e-300});
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es;
    es.computeFromTridiagonal(d / unit, e / unit, Eigen::EigenvaluesOnly);
    if (es.info() != Eigen::Success) throw Error(ErrorCode::NoConvergence, "tridiagonal eigensolver failed");
    values = unit * es.eigenvalues().head(m);
    const double scale = d.cwiseAbs().maxCoeff() + 2.0 * e.cwiseAbs().maxCoeff();
    const double floor = std::numeric_limits<double>::epsilon() * scale;
    Eigen::MatrixXd z(n, m);
    for (int k = 0; k < m; ++k) {
      Eigen::VectorXd x(n);
      std::uint64_t state = 0x9e3779b97f4a7c15ULL + static_cast<std::uint64_t>(k);
      for (Index i = 0; i < n; ++i) {
        state = state * 6364136223846793005ULL + 1442695040888963407ULL;
        x(i) = 0.5 + static_cast<double>(state >> 11) * 0x1.0p-53;
      }
      for (int sweep = 0; sweep < 4; ++sweep) {
        tridiagonal_shifted_solve(d, e, values(k), floor, x);
        for (int j = 0; j < k; ++j)
          if (values(k) - values(j) <= 1e-3 * scale) x -= z.col(j).dot(x) * z.col(j);
        x.normalize();
      }
      z.col(k) = x;
    }
    out.vectors = tri.matrixQ() * z.cast<Scalar>();
  }
  const DenseMatrix<Scalar> hx = h * out.vectors;
  for (int i = 0; i < m; ++i) {
    const double lambda = values(i);
    out.report.eigenvalues.push_back(lambda);
    out.report.residual_norms.push_back((hx.col(i) - lambda * out.vectors.col(i)).norm());
  }
  out.report.method = "dense";
  out.report.dim = static_cast<std::size_t>(n);
  out.report.iterations = 1;
  return out;
}

}  // namespace detail

/// m smallest eigenpairs of a dense Hermitian matrix.
template <class Scalar>
EigenPairs<Scalar> smallest_eigs(const DenseMatrix<Scalar>& h, int m, const EigenOptions& opts = {}) {
  if (m < 1 || m > h.rows()) throw Error(ErrorCode::InvalidArgument, "need 1 <= m <= dim");
  if (hermitian_defect(h) > opts.hermitian_tol)
    throw Error(ErrorCode::NotHermitian, "matrix is not Hermitian within tolerance");
  auto out = detail::dense_smallest<Scalar>(h, m);
  out.report.tolerance = opts.tol;
  out.report.nonzeros = static_cast<std::size_t>(h.size());
  return out;
}

/// m smallest eigenpairs of a sparse Hermitian matrix. Small problems go to the
/// dense solver; larger ones use block shift-invert Lanczos with full
/// reorthogonalisation and a Rayleigh-Ritz refinement in H itself.
template <class Scalar>
EigenPairs<Scalar> smallest_eigs(const SparseMatrix<Scalar>& h, int m, const EigenOptions& opts = {}) {
  using Index = Eigen::Index;
  const Index n = h.rows();
  if (h.rows() != h.cols()) throw Error(ErrorCode::NotHermitian, "matrix is not square");
  if (m < 1 || m > n) throw Error(ErrorCode::InvalidArgument, "need 1 <= m <= dim");
  if (hermitian_defect(h) > opts.hermitian_tol)
    throw Error(ErrorCode::NotHermitian, "matrix is not Hermitian within tolerance");

  if (!opts.force_sparse && static_cast<std::size_t>(n) <= opts.dense_threshold) {
    auto out = detail::dense_smallest<Scalar>(DenseMatrix<Scalar>(h), m);
    out.report.tolerance = opts.tol;
    out.report.nonzeros = static_cast<std::size_t>(h.nonZeros());
    return out;
  }

  const Index block = std::min<Index>(n, opts.block_size > 0 ? opts.block_size : std::max(4, m + 2));
  if (block < m) throw Error(ErrorCode::InvalidArgument, "block size smaller than m");
  const Index max_basis = std::min<Index>(
      n, opts.max_basis > 0 ? opts.max_basis : std::max<Index>(12 * block, 80));

  double shift = 0.0;
  if (opts.shift) {
    shift = *opts.shift;
  } else {
    const double g = gershgorin_lower(h);
    shift = g - 1e-6 * std::max(1.0, std::abs(g));
  }
  detail::SparseLLT<Scalar> factor;
  SparseMatrix<Scalar> hs;
  bool factored = false;
  for (int attempt = 0; attempt < 8 && !factored; ++attempt) {
    hs = detail::shifted(h, shift);
    factored = factor.compute(hs);
    if (!factored) shift -= std::max(1.0, std::abs(shift));
  }
  if (!factored) throw Error(ErrorCode::NoConvergence, "could not factor H - sigma I for any shift");

  std::mt19937_64 rng(opts.seed);
  DenseMatrix<Scalar> v(n, 0), av(n, 0), t(0, 0);
  DenseMatrix<Scalar> w = detail::random_block<Scalar>(n, block, rng);

  EigenPairs<Scalar> out;
  int steps = 0;
  while (true) {
    const Index room = n - v.cols();
    if (room <= 0) throw Error(ErrorCode::NoConvergence, "Krylov basis exhausted without convergence");
    if (w.cols() > room) w.conservativeResize(Eigen::NoChange, room);
    detail::orthonormalize_against(v, w, rng);
    DenseMatrix<Scalar> aw = factor.solve(w);
    aw += factor.solve(DenseMatrix<Scalar>(w - hs * aw));  // one refinement step
    ++steps;

    // Extend the projected operator T = V^H (H - sigma)^{-1} V by the new block.
    const Index k0 = v.cols();
    const Index kb = w.cols();
    DenseMatrix<Scalar> t_new(k0 + kb, k0 + kb);
    t_new.topLeftCorner(k0, k0) = t;
    t_new.topRightCorner(k0, kb) = v.adjoint() * aw;
    t_new.bottomLeftCorner(kb, k0) = t_new.topRightCorner(k0, kb).adjoint();
    t_new.bottomRightCorner(kb, kb) = w.adjoint() * aw;
    t = (t_new + t_new.adjoint()) * Scalar(0.5);
    v.conservativeResize(Eigen::NoChange, k0 + kb);
    v.rightCols(kb) = w;
    av.conservativeResize(Eigen::NoChange, k0 + kb);
    av.rightCols(kb) = aw;

    Eigen::SelfAdjointEigenSolver<DenseMatrix<Scalar>> es(t);
    const Index k = t.rows();
    const Index take = std::min(block, k);
    // Largest theta of the inverse <-> smallest lambda of H.
    DenseMatrix<Scalar> y = es.eigenvectors().rightCols(take).rowwise().reverse();

    // Purify the Ritz block with one more inverse application (already in av):
    // components along large eigenvalues of H are damped by theta_high / theta.
    DenseMatrix<Scalar> x = av * y;
    x = Eigen::HouseholderQR<DenseMatrix<Scalar>>(x).householderQ() * DenseMatrix<Scalar>::Identity(n, take);
    DenseMatrix<Scalar> hx = h * x;
    DenseMatrix<Scalar> g = x.adjoint() * hx;
    g = (g + g.adjoint()) * Scalar(0.5);
    Eigen::SelfAdjointEigenSolver<DenseMatrix<Scalar>> refine(g);
    const DenseMatrix<Scalar>& z = refine.eigenvectors();
    x = x * z;
    hx = hx * z;

    const Index have = std::min<Index>(m, take);
    bool converged = have == m;
    std::vector<double> lambdas(have), residuals(have);
    for (Index i = 0; i < have; ++i) {
      lambdas[i] = refine.eigenvalues()(i);
      residuals[i] = (hx.col(i) - lambdas[i] * x.col(i)).norm() / x.col(i).norm();
      if (residuals[i] > opts.tol * std::max(1.0, std::abs(lambdas[i]))) converged = false;
    }
    if (converged || k == n) {
      if (!converged)
        throw Error(ErrorCode::NoConvergence, "full basis reached but residuals exceed tolerance");
      out.vectors = x.leftCols(m);
      out.report.eigenvalues = lambdas;
      out.report.residual_norms = residuals;
      break;
    }
    if (steps >= opts.max_iterations)
      throw Error(ErrorCode::NoConvergence, "block Lanczos did not converge within max_iterations");

    // Next block: the purified, H-refined Ritz block.
    DenseMatrix<Scalar> next = x;
    if (k + block > max_basis) {
      // Thick restart on the leading Ritz vectors of the inverse.
      const Index keep = std::min<Index>(k, std::max<Index>(2 * block, m + block));
      const DenseMatrix<Scalar> yk = es.eigenvectors().rightCols(keep).rowwise().reverse();
      v = v * yk;
      av = av * yk;
      const DenseVector<double> theta = es.eigenvalues().tail(keep).reverse();
      t = theta.template cast<Scalar>().asDiagonal();
    }
    w = std::move(next);
  }

  out.report.method = "lanczos";
  out.report.iterations = steps;
  out.report.dim = static_cast<std::size_t>(n);
  out.report.nonzeros = static_cast<std::size_t>(h.nonZeros());
  out.report.shift = shift;
  out.report.tolerance = opts.tol;
  return out;
}

/// Largest singular value.
template <class Scalar>
double operator_norm(const DenseMatrix<Scalar>& a, double tol = 1e-10, std::uint64_t seed = 7,
                     std::size_t dense_threshold = 3000) {
  if (a.size() == 0) return 0.0;
  if (!a.allFinite()) throw Error(ErrorCode::InvalidArgument, "matrix has non-finite entries");
  if (static_cast<std::size_t>(std::max(a.rows(), a.cols())) <= dense_threshold) {
    Eigen::BDCSVD<DenseMatrix<Scalar>> svd(a);
    return svd.singularValues()(0);
  }
  std::mt19937_64 rng(seed);
  DenseVector<Scalar> x = detail::random_block<Scalar>(a.cols(), 1, rng);
  x.normalize();
  double estimate = 0.0;
  for (int it = 0; it < 20000; ++it) {
    DenseVector<Scalar> y = a.adjoint() * (a * x);
    const double next = std::sqrt(y.norm());
    if (next == 0.0) return 0.0;
    x = y / y.norm();
    if (std::abs(next - estimate) <= tol * next) return next;
    estimate = next;
  }
  throw Error(ErrorCode::NoConvergence, "power iteration for operator norm did not converge");
}

namespace detail {

template <class Scalar>
DenseVector<Scalar> refine_solve(const SparseMatrix<Scalar>& a, const SparseLLT<Scalar>& f,
                                 const DenseVector<Scalar>& v) {
  DenseVector<Scalar> x = f.solve(v);
  for (int it = 0; it < 3; ++it) {
    const DenseVector<Scalar> r = v - a * x;
    if (r.norm() <= 1e-12 * std::max(1.0, v.norm())) break;
    x += f.solve(r);
  }
  return x;
}

}  // namespace detail

/// (H + lambda I)^{-1} v for Hermitian H with lambda_min(H) + lambda > 1e-10.
template <class Scalar>
DenseVector<Scalar> apply_resolvent(const SparseMatrix<Scalar>& h, double lambda, const DenseVector<Scalar>& v) {
  if (h.rows() != h.cols() || h.rows() != v.size())
    throw Error(ErrorCode::InvalidArgument, "dimension mismatch in apply_resolvent");
  detail::SparseLLT<Scalar> probe;
  if (!probe.compute(detail::shifted(h, -(lambda - 1e-10))))
    throw Error(ErrorCode::NearSingular, "H + lambda I is not positive definite beyond 1e-10");
  const SparseMatrix<Scalar> a = detail::shifted(h, -lambda);
  detail::SparseLLT<Scalar> f;
  if (!f.compute(a)) throw Error(ErrorCode::NearSingular, "factorization of H + lambda I failed");
  return detail::refine_solve(a, f, v);
}

template <class Scalar>
DenseVector<Scalar> apply_resolvent(const DenseMatrix<Scalar>& h, double lambda, const DenseVector<Scalar>& v) {
  if (h.rows() != h.cols() || h.rows() != v.size())
    throw Error(ErrorCode::InvalidArgument, "dimension mismatch in apply_resolvent");
  const DenseMatrix<Scalar> id = DenseMatrix<Scalar>::Identity(h.rows(), h.cols());
  Eigen::LLT<DenseMatrix<Scalar>> probe(h + Scalar(lambda - 1e-10) * id);
  if (probe.info() != Eigen::Success)
    throw Error(ErrorCode::NearSingular, "H + lambda I is not positive definite beyond 1e-10");
  const DenseMatrix<Scalar> a = h + Scalar(lambda) * id;
  Eigen::LLT<DenseMatrix<Scalar>> f(a);
  DenseVector<Scalar> x = f.solve(v);
  x += f.solve(DenseVector<Scalar>(v - a * x));
  return x;
}

/// Writes "row,col,re,im" lines (0-based) for every stored entry.
template <class Scalar, class Stream>
void write_triplets(Stream& os, const SparseMatrix<Scalar>& h) {
  os << "# rows=" << h.rows() << " cols=" << h.cols() << " nnz=" << h.nonZeros() << "\n";
  os << "row,col,re,im\n";
  os.precision(17);
  for (int k = 0; k < h.outerSize(); ++k)
    for (typename SparseMatrix<Scalar>::InnerIterator it(h, k); it; ++it)
      os << it.row() << ',' << it.col() << ',' << std::real(it.value()) << ',' << std::imag(it.value()) << '\n';
}

}  // namespace thintube

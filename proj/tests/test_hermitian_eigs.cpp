// SPDX-License-Identifier: Apache-2.0
#include <catch_amalgamated.hpp>

#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "support/oracles.hpp"
#include "thintube/hermitian_eigs.hpp"

using namespace thintube;
using Catch::Matchers::WithinAbs;

namespace {

SparseMatrix<double> diagonal(int n) {
  SparseMatrix<double> d(n, n);
  for (int i = 0; i < n; ++i) d.insert(i, i) = i + 1.0;
  d.makeCompressed();
  return d;
}

SparseMatrix<double> periodic_laplacian(int n) {
  const double inv = static_cast<double>(n) * n;  // h = 1 / n
  std::vector<Eigen::Triplet<double>> t;
  for (int i = 0; i < n; ++i) {
    t.emplace_back(i, i, 2.0 * inv);
    t.emplace_back(i, (i + 1) % n, -inv);
    t.emplace_back((i + 1) % n, i, -inv);
  }
  SparseMatrix<double> a(n, n);
  a.setFromTriplets(t.begin(), t.end());
  return a;
}

// Sparse random Hermitian matrix: a banded complex pattern plus a diagonal.
SparseMatrix<cplx> random_sparse_hermitian(int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  std::uniform_int_distribution<int> col(0, n - 1);
  std::vector<Eigen::Triplet<cplx>> t;
  for (int i = 0; i < n; ++i) {
    t.emplace_back(i, i, cplx(4.0 + g(rng)));
    for (int k = 0; k < 3; ++k) {
      const int j = col(rng);
      if (j == i) continue;
      const cplx v(g(rng), g(rng));
      t.emplace_back(i, j, v);
      t.emplace_back(j, i, std::conj(v));
    }
  }
  SparseMatrix<cplx> a(n, n);
  a.setFromTriplets(t.begin(), t.end());
  return a;
}

}  // namespace

TEST_CASE("diagonal matrix: three smallest eigenvalues", "[eigs]") {
  for (bool sparse : {false, true}) {
    EigenOptions o;
    o.force_sparse = sparse;
    const auto r = smallest_eigs(diagonal(10), 3, o).report;
    REQUIRE(r.eigenvalues.size() == 3);
    for (int i = 0; i < 3; ++i) {
      CHECK_THAT(r.eigenvalues[i], WithinAbs(i + 1.0, 1e-10));
      CHECK(r.residual_norms[i] <= 1e-10);
    }
    CHECK(r.method == (sparse ? "lanczos" : "dense"));
  }
}

TEST_CASE("periodic Laplacian matches the circulant spectrum", "[eigs]") {
  const int n = 64;
  EigenOptions o;
  o.force_sparse = true;
  o.shift = -1.0;
  const auto r = smallest_eigs(periodic_laplacian(n), 5, o).report;
  std::vector<double> exact;
  for (int k = -3; k <= 3; ++k) exact.push_back(2.0 * n * n * (1.0 - std::cos(2.0 * std::numbers::pi * k / n)));
  std::sort(exact.begin(), exact.end());
  for (int i = 0; i < 5; ++i) CHECK_THAT(r.eigenvalues[i], WithinAbs(exact[i], 1e-10 * std::max(1.0, exact[i])));
}

TEST_CASE("dense path resolves degenerate pairs with orthonormal vectors", "[eigs][dense]") {
  // Periodic Laplacian: every nonzero eigenvalue is double.
  const int n = 400;
  for (double scale : {1.0, 1e6}) {
    const SparseMatrix<double> a = periodic_laplacian(n) * scale;
    const auto pairs = smallest_eigs(a, 7);
    CHECK(pairs.report.method == "dense");
    for (int i = 0; i < 7; ++i) {
      const int k = (i + 1) / 2;
      const double exact = scale * 2.0 * n * n * (1.0 - std::cos(2.0 * std::numbers::pi * k / n));
      CHECK_THAT(pairs.report.eigenvalues[i], WithinAbs(exact, 1e-9 * scale * n * n));
      // Backward-stable floor: a few ulps of ||A|| = 4 n^2 scale.
      const double norm = 4.0 * n * n * scale;
      CHECK(pairs.report.residual_norms[i] <= std::max(1e-8 * std::max(1.0, exact), 1e-15 * norm));
    }
    const DenseMatrix<double> gram = pairs.vectors.transpose() * pairs.vectors;
    CHECK((gram - DenseMatrix<double>::Identity(7, 7)).norm() <= 1e-10);
  }
}

TEST_CASE("dense path matches a full dense eigensolve", "[eigs][dense]") {
  const DenseMatrix<cplx> a(random_sparse_hermitian(300, 11));
  const auto pairs = smallest_eigs(a, 5);
  const Eigen::VectorXd ref = oracle::eigenvalues(a);
  for (int i = 0; i < 5; ++i) {
    CHECK_THAT(pairs.report.eigenvalues[i], WithinAbs(ref(i), 1e-10));
    CHECK(pairs.report.residual_norms[i] <= 1e-10);
  }
}

TEST_CASE("dense and Lanczos paths agree near the threshold", "[eigs]") {
  const auto a = random_sparse_hermitian(500, 5);
  EigenOptions sparse;
  sparse.force_sparse = true;
  const auto l = smallest_eigs(a, 6, sparse).report;
  const Eigen::VectorXd dense = oracle::eigenvalues(DenseMatrix<cplx>(a));
  for (int i = 0; i < 6; ++i) CHECK_THAT(l.eigenvalues[i], WithinAbs(dense(i), 1e-8));
}

TEST_CASE("large sparse Hermitian matrix is certified by residuals", "[eigs]") {
  const auto a = random_sparse_hermitian(5000, 9);
  const auto pairs = smallest_eigs(a, 4);
  CHECK(pairs.report.method == "lanczos");
  for (int i = 0; i < 4; ++i) {
    const double lam = pairs.report.eigenvalues[i];
    const DenseVector<cplx> x = pairs.vectors.col(i);
    const double res = (a * x - lam * x).norm() / x.norm();
    CHECK(res <= 1e-8 * std::max(1.0, std::abs(lam)));
    if (i > 0) CHECK(lam >= pairs.report.eigenvalues[i - 1]);
  }
}

TEST_CASE("identical seeds give identical runs", "[eigs]") {
  const auto a = random_sparse_hermitian(800, 3);
  EigenOptions o;
  o.force_sparse = true;
  const auto r1 = smallest_eigs(a, 4, o).report;
  const auto r2 = smallest_eigs(a, 4, o).report;
  CHECK(r1.iterations == r2.iterations);
  for (int i = 0; i < 4; ++i) CHECK(std::abs(r1.eigenvalues[i] - r2.eigenvalues[i]) <= 1e-12);
}

TEST_CASE("non-Hermitian input is rejected", "[eigs]") {
  SparseMatrix<cplx> a(3, 3);
  a.insert(0, 1) = cplx(1.0, 0.0);
  a.insert(1, 1) = 1.0;
  a.insert(2, 2) = 1.0;
  CHECK_THROWS_MATCHES(smallest_eigs(a, 1), Error, Catch::Matchers::Predicate<Error>([](const Error& e) {
                         return e.code() == ErrorCode::NotHermitian;
                       }));
  CHECK(hermitian_defect(a) > 0.1);
}

TEST_CASE("operator_norm examples", "[eigs][norm]") {
  DenseMatrix<double> d = DenseMatrix<double>::Zero(2, 2);
  d(0, 0) = 3.0;
  d(1, 1) = -1.0;
  CHECK_THAT(operator_norm(d), WithinAbs(3.0, 1e-14));

  DenseMatrix<cplx> x = DenseMatrix<cplx>::Random(6, 6);
  const DenseMatrix<cplx> u = Eigen::HouseholderQR<DenseMatrix<cplx>>(x).householderQ();
  CHECK_THAT(operator_norm(u), WithinAbs(1.0, 1e-12));

  const DenseMatrix<cplx> r = DenseMatrix<cplx>::Random(50, 50);
  CHECK_THAT(operator_norm(r), WithinAbs(oracle::largest_singular_value(r), 1e-10));
  // Power-iteration branch.
  CHECK_THAT(operator_norm(r, 1e-13, 7, 0), WithinAbs(oracle::largest_singular_value(r), 1e-8));
}

TEST_CASE("apply_resolvent examples", "[eigs][resolvent]") {
  DenseVector<double> v(2);
  v << 1.0, 1.0;
  const DenseMatrix<double> zero = DenseMatrix<double>::Zero(2, 2);
  CHECK((apply_resolvent(zero, 1.0, v) - v).norm() <= 1e-14);
  DenseMatrix<double> h = DenseMatrix<double>::Zero(2, 2);
  h(0, 0) = 1.0;
  h(1, 1) = 3.0;
  const auto x = apply_resolvent(h, 1.0, v);
  CHECK_THAT(x(0), WithinAbs(0.5, 1e-14));
  CHECK_THAT(x(1), WithinAbs(0.25, 1e-14));
  CHECK_THROWS_MATCHES(apply_resolvent(h, -1.0, v), Error, Catch::Matchers::Predicate<Error>([](const Error& e) {
                         return e.code() == ErrorCode::NearSingular;
                       }));
}

TEST_CASE("apply_resolvent matches a dense inverse", "[eigs][resolvent]") {
  const auto a = random_sparse_hermitian(300, 4);
  const DenseMatrix<cplx> dense(a);
  const double lam = 1.0 - oracle::eigenvalues(dense)(0);
  const DenseVector<cplx> v = DenseVector<cplx>::Random(300);
  const DenseVector<cplx> ref = oracle::inverse(dense + lam * DenseMatrix<cplx>::Identity(300, 300)) * v;
  CHECK((apply_resolvent(a, lam, v) - ref).norm() <= 1e-10 * ref.norm());
  CHECK((apply_resolvent(dense, lam, v) - ref).norm() <= 1e-10 * ref.norm());
}

TEST_CASE("triplet export lists every stored entry", "[eigs][export]") {
  std::ostringstream os;
  write_triplets(os, periodic_laplacian(8));
  const std::string s = os.str();
  CHECK(s.find("row,col,re,im") != std::string::npos);
  CHECK(std::count(s.begin(), s.end(), '\n') == 2 + 24);
}

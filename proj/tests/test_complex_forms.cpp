// SPDX-License-Identifier: Apache-2.0
#include <catch_amalgamated.hpp>

#include <cmath>
#include <limits>
#include <random>

#include "support/oracles.hpp"
#include "thintube/complex_forms.hpp"

using namespace thintube;
using namespace thintube::forms;
using Catch::Matchers::WithinAbs;

namespace {

const cplx I(0.0, 1.0);

double max_entry(const Matrix& m) { return m.cwiseAbs().maxCoeff(); }

Matrix two_by_two(cplx a, cplx b, cplx c, cplx d) {
  Matrix m(2, 2);
  m << a, b, c, d;
  return m;
}

// Block-diagonal positive definite matrix commuting with the projector p.
Matrix block_positive(const Matrix& p, std::mt19937_64& rng) {
  const Index n = p.rows();
  const Matrix id = Matrix::Identity(n, n);
  return p * random_positive(n, rng, 1.0) * p + (id - p) * random_positive(n, rng, 1.0) * (id - p);
}

}  // namespace

TEST_CASE("polarize recovers a 2x2 Hermitian matrix", "[forms][polarize]") {
  const Matrix m = two_by_two(2.0, I, -I, 3.0);
  const Matrix back = polarize(QuadraticFunctional::from_matrix(m));
  CHECK(max_entry(back - m) <= 1e-10);
}

TEST_CASE("polarize of the zero functional is the zero matrix", "[forms][polarize]") {
  const QuadraticFunctional zero{3, [](const Vector&) { return 0.0; }};
  CHECK(max_entry(polarize(zero)) == 0.0);
}

TEST_CASE("polarize recovers seeded positive matrices", "[forms][polarize]") {
  std::mt19937_64 rng(8);
  for (int dim : {2, 5, 8, 16}) {
    const Matrix m = random_positive(dim, rng);
    // Direct evaluation of <z, M z> is the oracle for the functional.
    const QuadraticFunctional f{dim, [m](const Vector& z) { return std::real(z.dot(m * z)); }};
    CHECK(max_entry(polarize(f) - m) <= 1e-10);
  }
}

TEST_CASE("polarize rejects infinite and non-quadratic functionals", "[forms][polarize]") {
  const QuadraticFunctional inf{2, [](const Vector& z) {
                                  return z(1) != cplx(0.0) ? std::numeric_limits<double>::infinity() : std::norm(z(0));
                                }};
  CHECK_THROWS_MATCHES(polarize(inf), Error, Catch::Matchers::Predicate<Error>([](const Error& e) {
                         return e.code() == ErrorCode::InfiniteValue;
                       }));
  const QuadraticFunctional quartic{2, [](const Vector& z) { return z.squaredNorm() * z.squaredNorm(); }};
  CHECK_THROWS_MATCHES(polarize(quartic), Error, Catch::Matchers::Predicate<Error>([](const Error& e) {
                         return e.code() == ErrorCode::NonQuadratic;
                       }));
}

TEST_CASE("check_quadratic flags the expected properties", "[forms][quadratic]") {
  const QuadraticFunctional quartic{3, [](const Vector& z) { return z.squaredNorm() * z.squaredNorm(); }};
  const auto q = check_quadratic(quartic, 32, 3, 1e-10);
  CHECK_FALSE(q.properties[1].passed);  // b) F(t z) <= t^2 F(z)
  CHECK_FALSE(q.properties[4].passed);  // e) F(w z) = |w|^2 F(z)

  std::mt19937_64 rng(4);
  const auto good = check_quadratic(QuadraticFunctional::from_matrix(random_positive(4, rng)), 32, 3, 1e-10);
  for (const auto& p : good.properties) CHECK(p.passed);

  const QuadraticFunctional re_sq{1, [](const Vector& z) { return std::real(z(0)) * std::real(z(0)); }};
  const auto d = check_quadratic(re_sq, 32, 3, 1e-10);
  CHECK_FALSE(d.properties[3].passed);  // d) F(i z) = F(z)
}

TEST_CASE("reconstructed sesquilinear form has the conjugation symmetries", "[forms][polarize][property]") {
  std::mt19937_64 rng(12);
  for (int dim = 2; dim <= 16; dim *= 2) {
    const auto f = QuadraticFunctional::from_matrix(random_positive(dim, rng));
    for (int trial = 0; trial < 10; ++trial) {
      const Vector z = random_vector(dim, rng), e = random_vector(dim, rng);
      const cplx b = polarized_value(f, z, e);
      const double scale = std::max(1.0, std::abs(b));
      CHECK(std::abs(polarized_value(f, z, Vector(I * e)) - I * b) <= 1e-10 * scale);
      CHECK(std::abs(polarized_value(f, e, z) - std::conj(b)) <= 1e-10 * scale);
      CHECK(std::abs(polarized_value(f, Vector(I * z), Vector(I * e)) - b) <= 1e-10 * scale);
    }
  }
}

TEST_CASE("solve_variational small cases", "[forms][variational]") {
  SECTION("identity operator returns eta") {
    std::mt19937_64 rng(1);
    const Vector eta = random_vector(4, rng);
    const auto sol = solve_variational(HermitianFormMatrix(Matrix::Identity(4, 4)), eta, SubspaceProjector::identity(4));
    CHECK((sol.zeta - eta).norm() <= 1e-12);
    CHECK(sol.certified);
  }
  SECTION("decoupled diagonal solve") {
    const Matrix m = two_by_two(1.0, 0.0, 0.0, 2.0);
    const Matrix p = two_by_two(1.0, 0.0, 0.0, 0.0);
    Vector eta(2);
    eta << 3.0, 5.0;
    const auto sol = solve_variational(HermitianFormMatrix(m), eta, SubspaceProjector(p));
    CHECK(std::abs(sol.zeta(0) - cplx(3.0)) <= 1e-12);
    CHECK(std::abs(sol.zeta(1)) <= 1e-12);
  }
}

TEST_CASE("solve_variational agrees with a direct solve and with descent", "[forms][variational]") {
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 5; ++trial) {
    Matrix cols(6, 3);
    for (Index j = 0; j < 3; ++j) cols.col(j) = random_vector(6, rng);
    const SubspaceProjector p0 = SubspaceProjector::onto_span(cols);
    const Matrix m = block_positive(p0.matrix(), rng);
    const Vector eta = random_vector(6, rng);
    const auto sol = solve_variational(HermitianFormMatrix(m, 1e-10), eta, p0);
    // Direct oracle: solve on range(P0) through the restricted block.
    const Matrix q = p0.basis();
    const Matrix block = q.adjoint() * m * q;
    const Vector direct = q * block.fullPivLu().solve(Matrix(q.adjoint() * eta));
    CHECK((sol.zeta - direct).norm() <= 1e-10 * std::max(1.0, direct.norm()));
    CHECK(sol.residual <= 1e-10 * std::max(1.0, eta.norm()));
    CHECK(sol.certified);
    for (int start = 0; start < 20; ++start) {
      const Vector z = minimize_by_descent(HermitianFormMatrix(m, 1e-10), eta, p0, random_vector(6, rng));
      CHECK((z - sol.zeta).norm() <= 1e-6);
    }
  }
}

TEST_CASE("solve_variational rejects non-block and singular inputs", "[forms][variational]") {
  const Matrix m = two_by_two(2.0, 1.0, 1.0, 2.0);
  const Matrix p = two_by_two(1.0, 0.0, 0.0, 0.0);
  Vector eta(2);
  eta << 1.0, 1.0;
  CHECK_THROWS_MATCHES(solve_variational(HermitianFormMatrix(m), eta, SubspaceProjector(p)), Error,
                       Catch::Matchers::Predicate<Error>([](const Error& e) { return e.code() == ErrorCode::NotBlock; }));
  const Matrix sing = two_by_two(0.0, 0.0, 0.0, 1.0);
  CHECK_THROWS_MATCHES(solve_variational(HermitianFormMatrix(sing), eta, SubspaceProjector(p)), Error,
                       Catch::Matchers::Predicate<Error>([](const Error& e) { return e.code() == ErrorCode::Singular; }));
}

TEST_CASE("variational functional is infinite off range(P0)", "[forms][variational]") {
  const Matrix p = two_by_two(1.0, 0.0, 0.0, 0.0);
  Vector z(2);
  z << 1.0, 1.0;
  CHECK(std::isinf(variational_functional(HermitianFormMatrix(Matrix::Identity(2, 2)), SubspaceProjector(p), z, z)));
}

TEST_CASE("form_deviation examples", "[forms][deviation]") {
  std::mt19937_64 rng(21);
  const Matrix m = random_positive(5, rng, 0.5);
  CHECK_THAT(form_deviation(HermitianFormMatrix(Matrix(1.1 * m), 1e-10), HermitianFormMatrix(m, 1e-10)),
             WithinAbs(0.1, 1e-12));
  CHECK_THAT(form_deviation(HermitianFormMatrix(m, 1e-10), HermitianFormMatrix(m, 1e-10)), WithinAbs(0.0, 1e-14));
}

TEST_CASE("form_deviation matches the generalized eigenvalue oracle", "[forms][deviation]") {
  std::mt19937_64 rng(22);
  for (int dim : {2, 4, 8, 16}) {
    const Matrix m = random_positive(dim, rng, 0.5), b = random_positive(dim, rng, 0.5);
    Eigen::GeneralizedSelfAdjointEigenSolver<Matrix> ges(b, m, Eigen::EigenvaluesOnly);
    const double q = (ges.eigenvalues().array() - 1.0).abs().maxCoeff();
    CHECK_THAT(form_deviation(HermitianFormMatrix(b, 1e-10), HermitianFormMatrix(m, 1e-10)), WithinAbs(q, 1e-10));
  }
  const Matrix neg = -Matrix::Identity(2, 2);
  CHECK_THROWS_MATCHES(form_deviation(HermitianFormMatrix(Matrix::Identity(2, 2)), HermitianFormMatrix(neg)), Error,
                       Catch::Matchers::Predicate<Error>([](const Error& e) { return e.code() == ErrorCode::NotPositive; }));
}

TEST_CASE("resolvent_gap examples and SVD oracle", "[forms][gap]") {
  const Matrix id = Matrix::Identity(4, 4);
  CHECK_THAT(resolvent_gap(HermitianFormMatrix(Matrix(2.0 * id)), HermitianFormMatrix(id)), WithinAbs(0.5, 1e-14));
  CHECK_THAT(resolvent_gap(HermitianFormMatrix(id), HermitianFormMatrix(id)), WithinAbs(0.0, 1e-14));
  std::mt19937_64 rng(23);
  for (int dim : {3, 7, 12}) {
    const Matrix b = random_positive(dim, rng, 0.3), m = random_positive(dim, rng, 0.3);
    const double svd = oracle::largest_singular_value(oracle::inverse(b) - oracle::inverse(m));
    CHECK_THAT(resolvent_gap(HermitianFormMatrix(b, 1e-10), HermitianFormMatrix(m, 1e-10)), WithinAbs(svd, 1e-10));
  }
}

TEST_CASE("resolvent bound holds whenever q < 1/2", "[forms][gap][property]") {
  std::mt19937_64 rng(24);
  int checked = 0;
  for (int dim : {2, 4, 8, 16})
    for (int trial = 0; trial < 25; ++trial) {
      const Matrix m = random_positive(dim, rng, 0.2);
      const Matrix k = random_hermitian(dim, rng) * cplx(0.1 / std::sqrt(dim));
      const Eigen::LLT<Matrix> llt(m);
      const Matrix l = llt.matrixL();
      const Matrix b = l * (Matrix::Identity(dim, dim) + k) * l.adjoint();
      const auto rb = resolvent_bound(HermitianFormMatrix(b, 1e-10), HermitianFormMatrix(m, 1e-10));
      if (rb.q >= 0.5) continue;
      ++checked;
      // Bound recomputed from oracle norms, not from the library's pieces.
      const double binv = oracle::largest_singular_value(oracle::inverse(b));
      const double minv = oracle::largest_singular_value(oracle::inverse(m));
      const double bound = rb.q * (binv / (1.0 - rb.q) + minv);
      CHECK(rb.gap <= bound * (1.0 + 1e-12));
      CHECK_THAT(rb.bound, WithinAbs(bound, 1e-9 * bound));
    }
  CHECK(checked >= 50);
}

TEST_CASE("penalized_resolvent_limit diagonal example", "[forms][penalized]") {
  const Matrix b0 = two_by_two(1.0, 0.0, 0.0, 3.0);
  const Matrix p = two_by_two(0.0, 0.0, 0.0, 1.0);
  const std::vector<double> eps{1e-1, 1e-2, 1e-3};
  const auto t = penalized_resolvent_limit(HermitianFormMatrix(b0), HermitianFormMatrix(p), 1.0, eps);
  CHECK(max_entry(t.limit_resolvent - two_by_two(0.5, 0.0, 0.0, 0.0)) <= 1e-14);
  for (std::size_t i = 0; i < eps.size(); ++i)
    CHECK_THAT(t.errors[i], WithinAbs(1.0 / (4.0 + 1.0 / (eps[i] * eps[i])), 1e-14));
  CHECK(t.nonincreasing);
}

TEST_CASE("penalized_resolvent_limit coupled example against dense inverses", "[forms][penalized]") {
  const Matrix b0 = two_by_two(1.0, 1.0, 1.0, 2.0);
  const Matrix p = two_by_two(0.0, 0.0, 0.0, 1.0);
  const std::vector<double> eps{1e-1, 3e-2, 1e-2};
  const auto t = penalized_resolvent_limit(HermitianFormMatrix(b0), HermitianFormMatrix(p), 1.0, eps);
  const Matrix limit = two_by_two(0.5, 0.0, 0.0, 0.0);  // (b0_11 + 1)^{-1} on ker P = span(e1)
  for (std::size_t i = 0; i < eps.size(); ++i) {
    const Matrix a = b0 + p / (eps[i] * eps[i]) + Matrix::Identity(2, 2);
    CHECK_THAT(t.errors[i], WithinAbs(oracle::largest_singular_value(oracle::inverse(a) - limit), 1e-12));
  }
  CHECK(t.nonincreasing);
  CHECK(t.errors.back() <= 1e-3);
}

TEST_CASE("penalized_resolvent_limit edge cases", "[forms][penalized]") {
  std::mt19937_64 rng(31);
  const Matrix b0 = random_positive(3, rng, 0.5);
  const auto none = penalized_resolvent_limit(HermitianFormMatrix(b0, 1e-10), HermitianFormMatrix(Matrix::Zero(3, 3)),
                                              1.0, {1e-1, 1e-2});
  CHECK(max_entry(none.projector - Matrix::Identity(3, 3)) <= 1e-12);
  for (double e : none.errors) CHECK(e <= 1e-12);
  CHECK(penalized_resolvent_limit(HermitianFormMatrix(b0, 1e-10), HermitianFormMatrix(Matrix::Zero(3, 3)), 1.0, {})
            .errors.empty());
  CHECK_THROWS_MATCHES(
      penalized_resolvent_limit(HermitianFormMatrix(b0, 1e-10), HermitianFormMatrix(Matrix::Identity(3, 3)), 1.0, {0.1}),
      Error, Catch::Matchers::Predicate<Error>([](const Error& e) { return e.code() == ErrorCode::TrivialKernel; }));
}

TEST_CASE("penalized errors decrease and fall below 1e-6 on seeded instances", "[forms][penalized][property]") {
  std::mt19937_64 rng(32);
  for (int dim : {2, 4, 8, 16})
    for (int trial = 0; trial < 10; ++trial) {
      Matrix kc(dim, std::max(1, dim / 2));
      for (Index j = 0; j < kc.cols(); ++j) kc.col(j) = random_vector(dim, rng);
      const Matrix pk = SubspaceProjector::onto_span(kc).matrix();
      const Matrix id = Matrix::Identity(dim, dim);
      const Matrix pen = (id - pk) * random_positive(dim, rng, 1.0) * (id - pk);
      const auto t = penalized_resolvent_limit(HermitianFormMatrix(random_positive(dim, rng, 0.1), 1e-10),
                                               HermitianFormMatrix(pen, 1e-10), 1.0, {1e-1, 1e-2, 1e-3, 1e-4});
      CHECK(t.nonincreasing);
      CHECK(t.errors.back() <= 1e-6);
    }
}

TEST_CASE("form types validate their inputs", "[forms][types]") {
  CHECK_THROWS_AS(HermitianFormMatrix(two_by_two(1.0, 1.0, 0.0, 1.0)), Error);
  CHECK_THROWS_AS(SubspaceProjector(two_by_two(1.0, 1.0, 0.0, 0.0)), Error);
  const auto p = SubspaceProjector::onto_span(Matrix::Identity(3, 1));
  CHECK(p.rank() == 1);
  CHECK(max_entry(p.matrix() * p.matrix() - p.matrix()) <= 1e-12);
  const HermitianFormMatrix d(two_by_two(1.0, 0.0, 0.0, 4.0));
  CHECK_THAT(d.lower_bound(), WithinAbs(1.0, 1e-14));
  CHECK_THAT(d.upper_bound(), WithinAbs(4.0, 1e-14));
}

//
// Copyright 2026 The rmlab Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <sstream>

#include "doctest.h"
#include "rmlab/dataset.hpp"
#include "rmlab/linalg.hpp"
#include "rmlab/rng.hpp"
#include "test_util.hpp"

using namespace rmlab;

TEST_CASE("rng streams are reproducible and distinct") {
  RngStream a(42, 7);
  RngStream b(42, 7);
  for (int i = 0; i < 1000; ++i) CHECK(a.next_u64() == b.next_u64());

  RngStream c(42, 8);
  RngStream d(42, 7);
  std::size_t same = 0;
  for (int i = 0; i < 1000; ++i)
    if (c.next_u64() == d.next_u64()) ++same;
  CHECK(same == 0);

  // Substreams are deterministic too.
  RngStream s1 = RngStream(1, 2).substream(3);
  RngStream s2 = RngStream(1, 2).substream(3);
  CHECK(s1.next_u64() == s2.next_u64());
}

TEST_CASE("rng basic distribution sanity") {
  RngStream rng(7, 0);
  double sum = 0, sum2 = 0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double z = rng.normal();
    sum += z;
    sum2 += z * z;
  }
  CHECK(std::abs(sum / n) < 0.01);
  CHECK(sum2 / n == doctest::Approx(1.0).epsilon(0.02));

  double lsum2 = 0;
  for (int i = 0; i < n; ++i) {
    const double l = rng.laplace(0.5);
    lsum2 += l * l;
  }
  CHECK(lsum2 / n == doctest::Approx(2 * 0.25).epsilon(0.05));

  // Gamma(shape, scale) mean = shape * scale.
  double gsum = 0;
  for (int i = 0; i < n; ++i) gsum += rng.gamma(1.5, 2.0);
  CHECK(gsum / n == doctest::Approx(3.0).epsilon(0.03));
}

TEST_CASE("dataset validation") {
  CHECK_THROWS_WITH_AS(Dataset(0, 1, {}), "Dataset: empty input", std::invalid_argument);
  CHECK_THROWS_AS(Dataset(1, 2, {1.0}), std::invalid_argument);
  CHECK_THROWS_AS(Dataset(1, 1, {std::nan("")}), std::invalid_argument);
  CHECK_THROWS_AS(Dataset(1, 1, {INFINITY}), std::invalid_argument);
  CHECK_THROWS_AS(Dataset::from_rows({{1.0, 2.0}, {3.0}}), std::invalid_argument);
}

TEST_CASE("dataset file round trips") {
  RngStream rng(5, 1);
  Vector data(7 * 3);
  for (auto& v : data) v = rng.normal() * 1e3;
  const Dataset x(7, 3, data);

  std::stringstream bin;
  io::write_binary(bin, x);
  const Dataset back = io::read_binary(bin);
  REQUIRE(back.n() == x.n());
  REQUIRE(back.dim() == x.dim());
  CHECK(back.raw() == x.raw());  // binary is bit exact

  std::stringstream csv;
  io::write_csv(csv, x);
  const Dataset csv_back = io::read_csv(csv);
  REQUIRE(csv_back.n() == x.n());
  CHECK(csv_back.raw() == x.raw());  // 17 significant digits round-trip doubles

  std::stringstream bad;
  bad << "1.0,2.0\n3.0,oops\n";
  CHECK_THROWS_AS(io::read_csv(bad), std::invalid_argument);
}

TEST_CASE("empirical mean examples") {
  CHECK(empirical_mean(Dataset(2, 2, {1, 2, 3, 4})) == Vector{2.0, 3.0});
  const Vector p = {3.5, -1.25, 0.75};
  CHECK(empirical_mean(Dataset(1, 3, p)) == p);
  // The d standard basis vectors average to (1/d, ..., 1/d).
  const std::size_t d = 4;
  Vector basis(d * d, 0.0);
  for (std::size_t i = 0; i < d; ++i) basis[i * d + i] = 1.0;
  CHECK(empirical_mean(Dataset(d, d, basis)) == Vector(d, 0.25));
}

TEST_CASE("empirical covariance examples") {
  // Identical rows: zero matrix.
  const Matrix z = empirical_covariance(Dataset(3, 2, {5, 7, 5, 7, 5, 7}));
  for (double v : z.data) CHECK(v == 0.0);

  const Matrix one = empirical_covariance(Dataset(2, 1, {-1, 1}));
  CHECK(one(0, 0) == 1.0);

  const Matrix diag =
      empirical_covariance(Dataset(4, 2, {1, 0, -1, 0, 0, 1, 0, -1}));
  CHECK(diag(0, 0) == 0.5);
  CHECK(diag(1, 1) == 0.5);
  CHECK(diag(0, 1) == 0.0);
}

TEST_CASE("mean translation equivariance and covariance equivariances") {
  RngStream rng(11, 0);
  for (int rep = 0; rep < 20; ++rep) {
    const std::size_t n = 3 + rng.uniform_below(20);
    const std::size_t d = 1 + rng.uniform_below(4);
    Vector data(n * d);
    for (auto& v : data) v = 3.0 * rng.normal();
    const Dataset x(n, d, data);
    Vector c(d);
    for (auto& v : c) v = rng.normal();

    const Vector m1 = empirical_mean(testutil::translate(x, c));
    const Vector m0 = empirical_mean(x);
    for (std::size_t j = 0; j < d; ++j)
      CHECK(m1[j] == doctest::Approx(m0[j] + c[j]).epsilon(1e-12));

    // Covariance: translation invariant, rotation equivariant (1e-10).
    const Matrix cov_t = empirical_covariance(testutil::translate(x, c));
    const Matrix cov = empirical_covariance(x);
    for (std::size_t i = 0; i < d * d; ++i)
      CHECK(cov_t.data[i] == doctest::Approx(cov.data[i]).epsilon(1e-10));

    const Matrix r = testutil::random_orthogonal(d, rng);
    const Matrix cov_r = empirical_covariance(testutil::apply_matrix(x, r));
    // cov(xR) = R^T cov(x) R with rows of r as basis: entry (a,b) below.
    for (std::size_t a = 0; a < d; ++a)
      for (std::size_t b = 0; b < d; ++b) {
        double expect = 0;
        for (std::size_t i = 0; i < d; ++i)
          for (std::size_t j = 0; j < d; ++j)
            expect += r(a, i) * cov(i, j) * r(b, j);
        CHECK(cov_r(a, b) == doctest::Approx(expect).epsilon(1e-10).scale(1.0));
      }
  }
}

TEST_CASE("top eigenpair examples") {
  RngStream rng(3, 0);
  SUBCASE("identity") {
    const auto e = top_eigenpair(Matrix::identity(5), 1e-10, rng);
    CHECK(e.lambda == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(norm2(e.v) == doctest::Approx(1.0).epsilon(1e-12));
  }
  SUBCASE("diagonal") {
    Matrix m(2, 2);
    m(0, 0) = 3;
    m(1, 1) = 1;
    const auto e = top_eigenpair(m, 1e-10, rng);
    CHECK(e.lambda == doctest::Approx(3.0).epsilon(1e-9));
    CHECK(std::abs(e.v[0]) == doctest::Approx(1.0).epsilon(1e-8));
    CHECK(std::abs(e.v[1]) == doctest::Approx(0.0).epsilon(1e-6).scale(1.0));
  }
  SUBCASE("rank one") {
    const Vector u = {1.0, 2.0, -2.0};
    Matrix m(3, 3);
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) m(i, j) = u[i] * u[j];
    const auto e = top_eigenpair(m, 1e-10, rng);
    CHECK(e.lambda == doctest::Approx(9.0).epsilon(1e-9));
    CHECK(std::abs(dot(e.v, u)) == doctest::Approx(3.0).epsilon(1e-8));
  }
  SUBCASE("negative dominant eigenvalue still returns the largest") {
    Matrix m(2, 2);
    m(0, 0) = -5;
    m(1, 1) = 2;
    const auto e = top_eigenpair(m, 1e-10, rng);
    CHECK(e.lambda == doctest::Approx(2.0).epsilon(1e-8));
  }
}

TEST_CASE("top eigenpair residual contract and determinism") {
  RngStream rng(9, 0);
  for (int rep = 0; rep < 25; ++rep) {
    const std::size_t d = 1 + rng.uniform_below(8);
    Matrix m(d, d);
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = i; j < d; ++j) {
        m(i, j) = rng.normal();
        m(j, i) = m(i, j);
      }
    const double tol = 1e-8;
    RngStream r1 = rng.substream(rep);
    RngStream r2 = r1;
    const auto e = top_eigenpair(m, tol, r1);
    const Vector mv = matvec(m, e.v);
    double res = 0;
    for (std::size_t j = 0; j < d; ++j) {
      const double t = mv[j] - e.lambda * e.v[j];
      res += t * t;
    }
    CHECK(std::sqrt(res) <= tol * std::max(1.0, std::abs(e.lambda)));
    CHECK(norm2(e.v) == doctest::Approx(1.0).epsilon(1e-12));
    // lambda is the Rayleigh quotient.
    CHECK(e.lambda >= dot(e.v, matvec(m, e.v)) - tol);
    // Against the Jacobi oracle.
    const Vector eigs = jacobi_eigenvalues(m);
    CHECK(e.lambda == doctest::Approx(eigs.back()).epsilon(1e-6));
    // Same stream, same output.
    const auto e2 = top_eigenpair(m, tol, r2);
    CHECK(e2.lambda == e.lambda);
    CHECK(e2.v == e.v);
  }
}

TEST_CASE("top eigenpair non-convergence carries the best iterate") {
  // A spectral gap of 1e-9 cannot be resolved within the iteration cap at
  // tol = 1e-12; the error object still carries a near-answer iterate.
  Matrix m(2, 2);
  m(0, 0) = 1.0;
  m(1, 1) = 1.0 - 1e-9;
  RngStream rng(17, 3);
  try {
    top_eigenpair(m, 1e-12, rng);
    FAIL("expected PowerIterationError");
  } catch (const PowerIterationError& e) {
    CHECK(e.best_iterate.lambda == doctest::Approx(1.0).epsilon(1e-8));
    CHECK_FALSE(e.best_iterate.converged);
  }
}

TEST_CASE("top eigenpair rejects bad input") {
  RngStream rng(1, 1);
  Matrix m(2, 2);
  m(0, 1) = 1.0;  // not symmetric
  CHECK_THROWS_AS(top_eigenpair(m, 1e-8, rng), std::invalid_argument);
  CHECK_THROWS_AS(top_eigenpair(Matrix::identity(2), 0.0, rng), std::invalid_argument);
  Matrix bad = Matrix::identity(2);
  bad(0, 0) = std::nan("");
  CHECK_THROWS_AS(top_eigenpair(bad, 1e-8, rng), std::invalid_argument);
}

TEST_CASE("jacobi eigenvalues against closed form 2x2") {
  RngStream rng(13, 0);
  for (int rep = 0; rep < 50; ++rep) {
    const double a = rng.normal(), b = rng.normal(), c = rng.normal();
    Matrix m(2, 2);
    m(0, 0) = a;
    m(0, 1) = b;
    m(1, 0) = b;
    m(1, 1) = c;
    const auto [lo, hi] = testutil::sym2x2_eigs(a, b, c);
    const Vector eigs = jacobi_eigenvalues(m);
    CHECK(eigs[0] == doctest::Approx(lo).epsilon(1e-10).scale(1.0));
    CHECK(eigs[1] == doctest::Approx(hi).epsilon(1e-10).scale(1.0));
  }
}

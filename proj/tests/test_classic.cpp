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
#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "rmlab/classic.hpp"
#include "rmlab/synth.hpp"
#include "test_util.hpp"

using namespace rmlab;
using namespace rmlab::classic;

TEST_CASE("median examples and conventions") {
  CHECK(median({1, 2, 3}) == 2.0);
  CHECK(median({0, 0, 0, 100}) == 0.0);
  CHECK(median({1, 2, 3, 4}) == 2.5);
  CHECK_THROWS_AS(median({}), std::invalid_argument);
}

TEST_CASE("median is permutation invariant and translation equivariant") {
  RngStream rng(21, 0);
  for (int rep = 0; rep < 30; ++rep) {
    const std::size_t n = 1 + rng.uniform_below(25);
    std::vector<double> xs(n);
    for (auto& v : xs) v = rng.normal() * 4.0;
    std::vector<double> shuffled = xs;
    rng.shuffle(shuffled);
    CHECK(median(shuffled) == median(xs));
    const double c = rng.normal();
    std::vector<double> moved = xs;
    for (auto& v : moved) v += c;
    CHECK(median(moved) == doctest::Approx(median(xs) + c).epsilon(1e-12));
  }
}

TEST_CASE("coordinate-wise median examples") {
  CHECK(coordinate_wise_median(Dataset(3, 2, {1, 10, 2, 20, 3, 30})) ==
        Vector{2.0, 20.0});
  const Vector row = {4.0, -7.0};
  CHECK(coordinate_wise_median(Dataset(1, 2, row)) == row);
  CHECK(coordinate_wise_median(Dataset(3, 1, {3, 1, 2}))[0] == median({1, 2, 3}));
}

TEST_CASE("geometric median trivial geometry") {
  SUBCASE("all points equal") {
    const Dataset x(4, 2, {2, -1, 2, -1, 2, -1, 2, -1});
    const auto r = geometric_median(x, 1e-9);
    CHECK(r.estimate == Vector{2.0, -1.0});
    CHECK(r.warnings == 0);
  }
  SUBCASE("equilateral triangle centered at origin") {
    const double s = std::sqrt(3.0) / 2.0;
    const Dataset x(3, 2, {1, 0, -0.5, s, -0.5, -s});
    const auto r = geometric_median(x, 1e-8, 5000);
    CHECK(norm2(r.estimate) < 1e-6);
  }
  SUBCASE("strict majority point is optimal") {
    const Dataset x(4, 2, {0, 0, 0, 0, 0, 0, 10, 0});
    const auto r = geometric_median(x, 1e-9);
    CHECK(norm2(r.estimate) < 1e-9);
  }
  SUBCASE("duplicate majority point is recognized through its multiplicity") {
    const Dataset x(5, 2, {0, 0, 0, 0, 10, 0, 10, 0, 10, 0});
    const auto r = geometric_median(x, 1e-9);
    CHECK(distance(r.estimate, Vector{10.0, 0.0}) < 1e-9);
    CHECK(r.warnings == 0);
  }
}

TEST_CASE("geometric median rotation equivariance within 2 tol") {
  // The Weiszfeld map commutes with rotations, so the two runs track each
  // other step for step; only floating-point noise separates them.
  RngStream rng(22, 0);
  const double tol = 1e-9;
  for (int rep = 0; rep < 10; ++rep) {
    const std::size_t n = 5 + rng.uniform_below(30);
    const std::size_t d = 2 + rng.uniform_below(3);
    Vector data(n * d);
    for (auto& v : data) v = rng.normal() * 2.0;
    const Dataset x(n, d, data);
    const Matrix r = testutil::random_orthogonal(d, rng);
    const Vector g = geometric_median(x, tol, 20000).estimate;
    const Vector gr = geometric_median(testutil::apply_matrix(x, r), tol, 20000).estimate;
    Vector expected(d, 0.0);
    for (std::size_t j = 0; j < d; ++j)
      for (std::size_t c = 0; c < d; ++c) expected[j] += g[c] * r(j, c);
    CHECK(distance(gr, expected) < 2.0 * tol);
  }
}

TEST_CASE("weiszfeld converges against a brute-force grid in 2d") {
  // Independent oracle: dense grid search refined once.
  RngStream rng(23, 0);
  Vector data;
  const std::size_t n = 15;
  for (std::size_t i = 0; i < 2 * n; ++i) data.push_back(rng.normal());
  const Dataset x(n, 2, data);
  const auto r = geometric_median(x, 1e-10, 50000);

  double best = 1e300;
  Vector arg(2, 0.0);
  for (double cx = -2; cx <= 2; cx += 0.01)
    for (double cy = -2; cy <= 2; cy += 0.01) {
      const Vector nu = {cx, cy};
      const double obj = l1_objective(x, nu);
      if (obj < best) {
        best = obj;
        arg = nu;
      }
    }
  CHECK(l1_objective(x, r.estimate) <= best + 1e-6);
  CHECK(distance(r.estimate, arg) < 0.02);
}

TEST_CASE("tukey depth examples") {
  RngStream rng(24, 0);
  SUBCASE("d=1 exact") {
    const Dataset x(3, 1, {1, 2, 3});
    CHECK(tukey_depth(x, Vector{2.0}, 1, rng) == doctest::Approx(2.0 / 3.0));
    CHECK(tukey_depth(x, Vector{0.0}, 1, rng) == 0.0);
  }
  SUBCASE("unit square corners, center has depth 1/2") {
    const Dataset x(4, 2, {1, 1, 1, -1, -1, 1, -1, -1});
    CHECK(tukey_depth(x, Vector{0.0, 0.0}, 200, rng) == doctest::Approx(0.5));
  }
}

TEST_CASE("tukey depth is monotone in the direction count on a fixed stream") {
  RngStream rng(25, 0);
  auto spec = synth::DistributionSpec::standard_gaussian(3);
  RngStream data_rng = rng.substream(0);
  const Dataset x = synth::sample(spec, 60, data_rng);
  const Vector theta = empirical_mean(x);
  double prev = 1.0;
  for (std::size_t dirs : {1u, 5u, 25u, 125u}) {
    RngStream dir_rng(77, 5);  // same stream start: direction sets are nested
    const double depth = tukey_depth(x, theta, dirs, dir_rng);
    CHECK(depth <= prev + 1e-15);
    prev = depth;
  }
}

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
#include <functional>
#include <sstream>

#include "doctest.h"
#include "rmlab/audit.hpp"
#include "rmlab/dp.hpp"
#include "rmlab/synth.hpp"

using namespace rmlab;
using namespace rmlab::dp;

TEST_CASE("clip worked examples and properties") {
  CHECK(clip({0.3, -0.4}, 2.5) == Vector{0.3, -0.4});
  const Vector clipped = clip({3.0, 4.0}, 2.5);
  CHECK(clipped[0] == doctest::Approx(1.5));
  CHECK(clipped[1] == doctest::Approx(2.0));

  RngStream rng(70, 0);
  for (int rep = 0; rep < 50; ++rep) {
    const std::size_t d = 1 + rng.uniform_below(5);
    Vector x(d);
    for (auto& v : x) v = 5.0 * rng.normal();
    const double tau = 0.1 + 3.0 * rng.uniform01();
    const Vector c = clip(x, tau);
    CHECK(norm2(c) <= std::min(norm2(x), tau) + 1e-12);
    CHECK(clip(c, tau) == c);  // idempotent
  }
}

TEST_CASE("choose_tau balances bias and noise") {
  SUBCASE("worked example") {
    const double tau = choose_tau(10000, 16, {1.0, 0.0});
    CHECK(tau == doctest::Approx(50.0));
    CHECK(std::sqrt(16.0) / tau == doctest::Approx(0.08));  // predicted bias term
  }
  SUBCASE("grid-search oracle for the pure path") {
    // Minimize predicted bias + noise, sqrt(d)/t + t*d/(n*eps), over a grid.
    const std::size_t n = 10000, d = 16;
    double best_t = 1, best = 1e300;
    for (double t = 1; t <= 1000; t += 0.25) {
      const double obj = std::sqrt(static_cast<double>(d)) / t +
                         t * static_cast<double>(d) / (static_cast<double>(n) * 1.0);
      if (obj < best) {
        best = obj;
        best_t = t;
      }
    }
    CHECK(choose_tau(n, d, {1.0, 0.0}) == doctest::Approx(best_t).epsilon(0.01));
  }
  SUBCASE("approximate path balances against gaussian noise") {
    const std::size_t n = 4096, d = 64;
    const PrivacyBudget budget{1.0, 1e-6};
    const double tau = choose_tau(n, d, budget);
    double best_t = 1, best = 1e300;
    for (double t = 1; t <= 1000; t += 0.25) {
      const double obj =
          std::sqrt(static_cast<double>(d)) / t +
          t * std::sqrt(static_cast<double>(d) * std::log(1.0 / budget.delta)) /
              (static_cast<double>(n) * budget.epsilon);
      if (obj < best) {
        best = obj;
        best_t = t;
      }
    }
    CHECK(tau == doctest::Approx(best_t).epsilon(0.01));
  }
  SUBCASE("pure predicted error equals the d^{3/4}/sqrt(n eps) rate") {
    for (std::size_t d : {4u, 16u, 64u}) {
      const double tau = choose_tau(5000, d, {0.5, 0.0});
      const double predicted = std::sqrt(static_cast<double>(d)) / tau;
      const double rate = std::sqrt(std::pow(static_cast<double>(d), 1.5) / (5000 * 0.5));
      CHECK(predicted == doctest::Approx(rate).epsilon(1e-12));
    }
  }
  SUBCASE("doubling n scales tau by sqrt(2)") {
    CHECK(choose_tau(2000, 9, {1.0, 0.0}) ==
          doctest::Approx(std::sqrt(2.0) * choose_tau(1000, 9, {1.0, 0.0})));
  }
}

TEST_CASE("clipped mean statistic equals the empirical mean when tau is large") {
  RngStream rng(71, 0);
  auto spec = synth::DistributionSpec::standard_gaussian(3);
  const Dataset x = synth::sample(spec, 50, rng);
  double max_norm = 0;
  for (std::size_t i = 0; i < x.n(); ++i)
    max_norm = std::max(max_norm, norm2(Vector(x.row(i).begin(), x.row(i).end())));
  CHECK(clipped_mean_statistic(x, max_norm + 1.0) == empirical_mean(x));
}

TEST_CASE("l1 sensitivity bound is tight under antipodal swaps") {
  // Oracle: brute force over random neighboring pairs of tiny datasets.
  RngStream rng(72, 0);
  const std::size_t n = 4, d = 3;
  const double tau = 1.0;
  const ClipConfig cfg = ClipConfig::for_dataset(tau, n, d);
  CHECK(cfg.l1_sensitivity == doctest::Approx(2.0 * std::sqrt(3.0) / 4.0));
  CHECK(ClipConfig::for_dataset(1.0, 100, 4).l1_sensitivity == doctest::Approx(0.04));

  double worst = 0;
  for (int rep = 0; rep < 300; ++rep) {
    Vector base(n * d);
    for (auto& v : base) v = 2.0 * rng.normal();
    const Dataset x(n, d, base);
    Vector mod = base;
    const std::size_t row = rng.uniform_below(n);
    for (std::size_t j = 0; j < d; ++j) mod[row * d + j] = 2.0 * rng.normal();
    const Dataset xp(n, d, mod);
    const Vector fa = clipped_mean_statistic(x, tau);
    const Vector fb = clipped_mean_statistic(xp, tau);
    double l1 = 0;
    for (std::size_t j = 0; j < d; ++j) l1 += std::abs(fa[j] - fb[j]);
    worst = std::max(worst, l1);
    CHECK(l1 <= cfg.l1_sensitivity + 1e-12);
  }
  // Antipodal swap achieves the bound exactly.
  Vector flat(n * d, 0.0);
  const double c = tau / std::sqrt(static_cast<double>(d));
  for (std::size_t j = 0; j < d; ++j) flat[j] = c;
  const Dataset x(n, d, flat);
  Vector anti = flat;
  for (std::size_t j = 0; j < d; ++j) anti[j] = -c;
  const Dataset xp(n, d, anti);
  const Vector fa = clipped_mean_statistic(x, tau);
  const Vector fb = clipped_mean_statistic(xp, tau);
  double l1 = 0;
  for (std::size_t j = 0; j < d; ++j) l1 += std::abs(fa[j] - fb[j]);
  CHECK(l1 == doctest::Approx(cfg.l1_sensitivity).epsilon(1e-12));
}

TEST_CASE("laplace noise calibration over 1e5 seeded draws") {
  const Dataset x(2, 1, {0.25, -0.25});
  const double tau = 1.0, eps = 0.7;
  const ClipConfig cfg = ClipConfig::for_dataset(tau, 2, 1);
  const PrivacyBudget budget{eps, 0.0};
  RngStream rng(73, 0);
  const double center = clipped_mean_statistic(x, tau)[0];
  double s2 = 0;
  const int draws = 100000;
  for (int i = 0; i < draws; ++i) {
    const auto rep = clipped_mean(x, cfg, budget, rng);
    const double noise = rep.estimate[0] - center;
    s2 += noise * noise;
  }
  const double expected = 2.0 * std::pow(cfg.l1_sensitivity / eps, 2.0);
  CHECK(s2 / draws == doctest::Approx(expected).epsilon(0.05));
}

TEST_CASE("gaussian mechanism noise calibration") {
  const Dataset x(2, 1, {0.25, -0.25});
  const ClipConfig cfg = ClipConfig::for_dataset(1.0, 2, 1);
  const PrivacyBudget budget{1.0, 1e-5};
  RngStream rng(74, 0);
  const double center = clipped_mean_statistic(x, 1.0)[0];
  double s2 = 0;
  const int draws = 100000;
  for (int i = 0; i < draws; ++i) {
    const auto rep = clipped_mean(x, cfg, budget, rng);
    s2 += (rep.estimate[0] - center) * (rep.estimate[0] - center);
  }
  const double sigma = gaussian_mechanism_sigma(cfg.l2_sensitivity, budget);
  CHECK(s2 / draws == doctest::Approx(sigma * sigma).epsilon(0.05));
}

TEST_CASE("exponential mechanism worked examples") {
  RngStream rng(75, 0);
  SUBCASE("two candidates") {
    ScoredCandidateSet s;
    s.candidates = {{0.0}, {1.0}};
    s.scores = {0.0, -1.0};
    s.sensitivity = 1.0;
    const auto res = exponential_mechanism(s, 2.0, rng);
    CHECK(res.probabilities[0] == doctest::Approx(1.0 / (1.0 + std::exp(-1.0))).epsilon(1e-12));
    CHECK(res.probabilities[0] + res.probabilities[1] == doctest::Approx(1.0).epsilon(1e-12));
  }
  SUBCASE("equal scores give the uniform distribution") {
    ScoredCandidateSet s;
    for (int i = 0; i < 7; ++i) {
      s.candidates.push_back({static_cast<double>(i)});
      s.scores.push_back(3.5);
    }
    const auto res = exponential_mechanism(s, 1.0, rng);
    for (double p : res.probabilities) CHECK(p == doctest::Approx(1.0 / 7.0).epsilon(1e-12));
  }
  SUBCASE("huge epsilon selects the argmax") {
    ScoredCandidateSet s;
    s.candidates = {{0.0}, {1.0}, {2.0}};
    s.scores = {-3.0, 5.0, 4.0};
    for (int rep = 0; rep < 50; ++rep) {
      const auto res = exponential_mechanism(s, 1e6, rng);
      CHECK(res.index == 1);
      CHECK(res.probabilities[1] >= 1.0 - 1e-6 * 3);
    }
  }
}

TEST_CASE("exponential mechanism probabilities sum to one") {
  RngStream rng(76, 0);
  for (int rep = 0; rep < 200; ++rep) {
    const std::size_t m = 1 + rng.uniform_below(100);
    ScoredCandidateSet s;
    s.sensitivity = 0.5 + rng.uniform01();
    for (std::size_t i = 0; i < m; ++i) {
      s.candidates.push_back({0.0});
      s.scores.push_back(1000.0 * (rng.uniform01() - 0.5));
    }
    const auto res = exponential_mechanism(s, 0.1 + 5.0 * rng.uniform01(), rng);
    double total = 0;
    for (double p : res.probabilities) total += p;
    CHECK(std::abs(total - 1.0) <= 1e-12);
  }
}

TEST_CASE("audit_mechanism worked examples") {
  SUBCASE("identical distributions") {
    CHECK(audit_mechanism(Vector{0.25, 0.75}, Vector{0.25, 0.75}) == 0.0);
  }
  SUBCASE("two-candidate exponential mechanism pair") {
    const Vector p = em_probabilities(Vector{0.0, -1.0}, 1.0, 1.0);
    const Vector q = em_probabilities(Vector{-1.0, 0.0}, 1.0, 1.0);
    CHECK(p[0] == doctest::Approx(0.622459331201855).epsilon(1e-12));
    CHECK(audit_mechanism(p, q) == doctest::Approx(0.5).epsilon(1e-12));
  }
  SUBCASE("one-sided zero is an infinite loss") {
    CHECK_THROWS_WITH_AS(audit_mechanism(Vector{1.0, 0.0}, Vector{0.5, 0.5}),
                         "infinite privacy loss", std::runtime_error);
    CHECK(audit_mechanism(Vector{1.0, 0.0}, Vector{1.0, 0.0}) == 0.0);  // 0/0 ignored
  }
  SUBCASE("unnormalized input is rejected") {
    CHECK_THROWS_AS(audit_mechanism(Vector{0.5, 0.4}, Vector{0.5, 0.5}),
                    std::invalid_argument);
  }
}

TEST_CASE("exponential mechanism audits below epsilon on random neighbors") {
  const auto outcome = dp::audit::audit_exponential_mechanism(300, RngStream(77, 0));
  CHECK(outcome.instances == 300);
  CHECK(outcome.within(1e-9));
}

TEST_CASE("build_cover worked examples") {
  SUBCASE("d=1") {
    const Cover c = build_cover(1, 1.0, 0.5);
    REQUIRE(c.points.size() == 5);
    Vector flat;
    for (const auto& p : c.points) flat.push_back(p[0]);
    std::sort(flat.begin(), flat.end());
    CHECK(flat == Vector{-1.0, -0.5, 0.0, 0.5, 1.0});
  }
  SUBCASE("d=2 grid intersects the ball") {
    const Cover c = build_cover(2, 1.0, 1.0);
    CHECK(c.points.size() == 5);  // origin and the four axis points
  }
  SUBCASE("points never leave the ball; origin included") {
    RngStream rng(78, 0);
    for (int rep = 0; rep < 10; ++rep) {
      const std::size_t d = 1 + rng.uniform_below(3);
      const double radius = 0.5 + 2.0 * rng.uniform01();
      const double spacing = 0.05 + 0.3 * rng.uniform01();
      const Cover c = build_cover(d, radius, spacing);
      bool has_origin = false;
      for (const auto& p : c.points) {
        CHECK(norm2(p) <= radius * (1 + 1e-9));
        if (norm2(p) == 0.0) has_origin = true;
      }
      CHECK(has_origin);
    }
  }
  SUBCASE("dimension gate") {
    CHECK_THROWS_WITH_AS(build_cover(4, 1.0, 0.5), "cover is exponential in d",
                         std::invalid_argument);
  }
}

TEST_CASE("private mom at huge epsilon returns a maximal-score cover point") {
  RngStream rng(79, 0);
  auto spec = synth::DistributionSpec::gaussian({0.4}, {0.25});
  RngStream data_rng = rng.substream(0);
  const Dataset x = synth::sample(spec, 200, data_rng);
  PrivateMoMConfig cfg;
  RngStream mech = rng.substream(1);
  const auto res = private_mom_mean(x, {1e6, 0.0}, cfg, mech);

  double best = -1e300;
  for (std::size_t i = 0; i < res.cover.points.size(); ++i)
    best = std::max(best, res.scores[i]);
  const std::size_t chosen = [&] {
    for (std::size_t i = 0; i < res.cover.points.size(); ++i)
      if (res.cover.points[i] == res.report.estimate) return i;
    return res.cover.points.size();
  }();
  REQUIRE(chosen < res.cover.points.size());
  CHECK(res.scores[chosen] == best);
}

TEST_CASE("private mom scores match the exact d=1 scan for every cover point") {
  RngStream rng(80, 0);
  auto spec = synth::DistributionSpec::standard_gaussian(1);
  RngStream data_rng = rng.substream(0);
  const Dataset x = synth::sample(spec, 300, data_rng);
  const dp::PrivacyBudget budget{2.0, 0.0};
  PrivateMoMConfig cfg;
  RngStream mech = rng.substream(1);
  RngStream mech_copy = mech;
  const auto res = private_mom_mean(x, budget, cfg, mech);

  // Reconstruct the bucket means with the identical substream and rescore
  // each cover point with the exact d=1 oracle.
  RngStream shuffle = mech_copy.substream(0);
  const auto y = mom::bucket_means(x, res.k, shuffle);
  const double lambda = cfg.c2 * cfg.c2 * std::log(300.0) / (budget.epsilon * 300.0);
  for (std::size_t i = 0; i < res.cover.points.size(); ++i) {
    const auto exact = mom::combinatorial_score_exact(y, res.cover.points[i], lambda);
    CHECK(res.scores[i] == -static_cast<double>(exact.cert.score));
  }
}

TEST_CASE("private mom concentrates near the origin when all data sit there") {
  // With every sample at 0, all cover points within sqrt(lambda) of the
  // origin score exactly 0 (ties) and everything else scores -k; the
  // mechanism therefore lands in that ball with overwhelming probability.
  const std::size_t n = 10000;
  const Dataset x(n, 1, Vector(n, 0.0));
  const dp::PrivacyBudget budget{2.0, 0.0};
  PrivateMoMConfig cfg;
  RngStream mech(81, 0);
  const auto res = private_mom_mean(x, budget, cfg, mech);
  const double lambda =
      cfg.c2 * cfg.c2 * std::log(static_cast<double>(n)) / (budget.epsilon * n);
  double zero_mass = 0;
  for (std::size_t i = 0; i < res.cover.points.size(); ++i) {
    if (res.scores[i] == 0.0) {
      zero_mass += res.probabilities[i];
      // Perfect scores occur only within sqrt(lambda) of the data.
      CHECK(std::abs(res.cover.points[i][0]) < std::sqrt(lambda) + 1e-12);
    }
  }
  CHECK(zero_mass >= 0.99);
  CHECK(std::abs(res.report.estimate[0]) <= std::sqrt(lambda) + 1e-12);
}

TEST_CASE("private mom score sensitivity is at most one per changed sample") {
  RngStream rng(82, 0);
  for (int rep = 0; rep < 15; ++rep) {
    RngStream inst = rng.substream(rep);
    const std::size_t n = 12 + inst.uniform_below(9);
    Vector data(n);
    for (auto& v : data) v = 3.0 * (inst.uniform01() - 0.5);
    Vector mod = data;
    mod[inst.uniform_below(n)] = 30.0 * (inst.uniform01() - 0.5);
    PrivateMoMConfig cfg;
    cfg.c1 = 2.0;
    cfg.c2 = 0.5;
    const dp::PrivacyBudget budget{1.0, 0.0};
    RngStream m1 = inst.substream(1);
    RngStream m2 = m1;
    const auto r1 = private_mom_mean(Dataset(n, 1, data), budget, cfg, m1);
    const auto r2 = private_mom_mean(Dataset(n, 1, mod), budget, cfg, m2);
    REQUIRE(r1.scores.size() == r2.scores.size());
    for (std::size_t i = 0; i < r1.scores.size(); ++i)
      CHECK(std::abs(r1.scores[i] - r2.scores[i]) <= 1.0);
  }
}

TEST_CASE("private mom and inverse-sensitivity audits stay below epsilon") {
  const auto pm = dp::audit::audit_private_mom(150, RngStream(83, 0));
  CHECK(pm.within(1e-9));
  const auto ism = dp::audit::audit_inverse_sensitivity_median(150, RngStream(83, 1));
  CHECK(ism.within(1e-9));
}

TEST_CASE("inverse sensitivity median scores: worked examples") {
  const std::vector<double> xs = {1, 2, 3, 4, 5};
  CHECK(inverse_sensitivity_median_score(xs, 3.0) == 0.0);
  CHECK(inverse_sensitivity_median_score(xs, 3.5) == -1.0);
  CHECK(inverse_sensitivity_median_score(xs, 4.5) == -2.0);
  CHECK(inverse_sensitivity_median_score(xs, -100.0) == -3.0);  // outside everything
}

TEST_CASE("inverse sensitivity score equals the brute-force replacement count") {
  // Oracle: fewest replacements (new values from {h, +-BIG}) after which the
  // median equals h exactly; odd n so the median is an order statistic.
  const auto oracle = [](std::vector<double> xs, double h) -> double {
    const std::size_t n = xs.size();
    const double big = 1e9;
    for (std::size_t m = 0; m <= n; ++m) {
      // Iterate all index subsets of size m and value assignments.
      std::vector<std::size_t> idx(m);
      const std::function<bool(std::size_t, std::size_t)> choose =
          [&](std::size_t start, std::size_t slot) -> bool {
        if (slot == m) {
          const std::size_t combos = 1;
          std::vector<std::size_t> assign(m, 0);
          for (;;) {
            std::vector<double> mod = xs;
            for (std::size_t t = 0; t < m; ++t)
              mod[idx[t]] = assign[t] == 0 ? h : (assign[t] == 1 ? big : -big);
            if (std::abs(classic::median(mod) - h) < 1e-9) return true;
            std::size_t carry = 0;
            for (; carry < m; ++carry) {
              if (++assign[carry] < 3) break;
              assign[carry] = 0;
            }
            if (carry == m) break;
          }
          (void)combos;
          return false;
        }
        for (std::size_t i = start; i < n; ++i) {
          idx[slot] = i;
          if (choose(i + 1, slot + 1)) return true;
        }
        return false;
      };
      if (m == 0) {
        if (std::abs(classic::median(xs) - h) < 1e-9) return 0.0;
        continue;
      }
      if (choose(0, 0)) return -static_cast<double>(m);
    }
    return -static_cast<double>(n);
  };

  RngStream rng(84, 0);
  for (int rep = 0; rep < 25; ++rep) {
    std::vector<double> xs(5);
    for (auto& v : xs) v = std::round(10.0 * (rng.uniform01() - 0.5));
    std::vector<double> sorted = xs;
    std::sort(sorted.begin(), sorted.end());
    const double h = std::round(10.0 * (rng.uniform01() - 0.5)) + 0.5;
    CHECK(inverse_sensitivity_median_score(sorted, h) == oracle(xs, h));
  }
}

TEST_CASE("inverse sensitivity score is maximal at the median and monotone") {
  const std::vector<double> xs = {-4, -1, 0, 2, 7, 9, 12};
  std::vector<double> sorted = xs;
  std::sort(sorted.begin(), sorted.end());
  const double med = classic::median(xs);
  CHECK(inverse_sensitivity_median_score(sorted, med) == 0.0);
  double prev = 0.0;
  for (double h = med; h <= 30.0; h += 0.25) {
    const double s = inverse_sensitivity_median_score(sorted, h);
    CHECK(s <= prev + 1e-12);
    prev = s;
  }
  prev = 0.0;
  for (double h = med; h >= -30.0; h -= 0.25) {
    const double s = inverse_sensitivity_median_score(sorted, h);
    CHECK(s <= prev + 1e-12);
    prev = s;
  }
}

TEST_CASE("probability vectors export as index,probability csv rows") {
  std::stringstream out;
  write_probabilities_csv(out, Vector{0.25, 0.5, 0.25});
  CHECK(out.str() == "0,0.25\n1,0.5\n2,0.25\n");
}

TEST_CASE("inverse sensitivity median returns a grid point with its distribution") {
  RngStream rng(85, 0);
  const std::vector<double> xs = {1, 2, 3, 4, 5};
  std::vector<double> grid;
  for (double g = 0; g <= 6.0; g += 0.5) grid.push_back(g);
  const auto res = inverse_sensitivity_median(xs, {2.0, 0.0}, grid, rng);
  CHECK(std::find(grid.begin(), grid.end(), res.value) != grid.end());
  double total = 0;
  for (double p : res.probabilities) total += p;
  CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
  // The exact median grid point carries the top score.
  double best = -1e300;
  std::size_t best_i = 0;
  for (std::size_t i = 0; i < grid.size(); ++i)
    if (res.scores[i] > best) {
      best = res.scores[i];
      best_i = i;
    }
  CHECK(grid[best_i] == 3.0);
  CHECK(best == 0.0);
}

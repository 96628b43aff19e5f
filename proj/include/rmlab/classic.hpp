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

#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "rmlab/dataset.hpp"
#include "rmlab/report.hpp"
#include "rmlab/rng.hpp"

namespace rmlab::classic {

// Sample median: average of the order statistics at ranks floor((n+1)/2) and
// ceil((n+1)/2), so the even-n convention is the midpoint of the middle pair.
inline double median(std::vector<double> xs) {
  if (xs.empty()) throw std::invalid_argument("median: empty input");
  const std::size_t n = xs.size();
  const std::size_t lo = (n + 1) / 2 - 1;  // 0-based floor((n+1)/2)
  std::nth_element(xs.begin(), xs.begin() + lo, xs.end());
  const double a = xs[lo];
  if (n % 2 == 1) return a;
  const double b = *std::min_element(xs.begin() + lo + 1, xs.end());
  return 0.5 * (a + b);
}

inline Vector coordinate_wise_median(const Dataset& x) {
  const std::size_t d = x.dim();
  Vector out(d);
  std::vector<double> column(x.n());
  for (std::size_t j = 0; j < d; ++j) {
    for (std::size_t i = 0; i < x.n(); ++i) column[i] = x(i, j);
    out[j] = median(column);
  }
  return out;
}

inline double l1_objective(const Dataset& x, std::span<const double> nu) {
  double obj = 0;
  for (std::size_t i = 0; i < x.n(); ++i) obj += distance(x.row(i), nu);
  return obj;
}

inline double dataset_diameter_bound(const Dataset& x) {
  // Coordinate bounding box diagonal; cheap upper bound on the diameter.
  double s = 0;
  for (std::size_t j = 0; j < x.dim(); ++j) {
    double lo = x(0, j), hi = x(0, j);
    for (std::size_t i = 1; i < x.n(); ++i) {
      lo = std::min(lo, x(i, j));
      hi = std::max(hi, x(i, j));
    }
    s += (hi - lo) * (hi - lo);
  }
  return std::sqrt(s);
}

// Geometric median by Weiszfeld iteration started from the coordinate-wise
// median. Stops when the subgradient norm falls below tol, which bounds the
// objective gap by tol * diameter. If the iterate lands on a data point, the
// subgradient optimality condition is checked there; when not optimal the
// iterate steps off along the descent direction with step tol.
// Non-convergence returns the best iterate with the max-iterations warning.
inline EstimatorReport geometric_median(const Dataset& x, double tol = 1e-9,
                                        std::size_t max_iters = 1000) {
  if (tol <= 0) throw std::invalid_argument("geometric_median: tol must be positive");
  const std::size_t n = x.n();
  const std::size_t d = x.dim();
  Vector nu = coordinate_wise_median(x);

  EstimatorReport report;
  double scale = 1.0;
  for (double v : x.raw()) scale = std::max(scale, std::abs(v));
  const double snap = 1e-12 * scale;
  double prev_obj = l1_objective(x, nu);

  for (std::size_t it = 1; it <= max_iters; ++it) {
    report.iterations = it;
    Vector pull(d, 0.0);  // sum over non-coincident points of (x_i - nu)/dist
    double weight_sum = 0;
    Vector weighted(d, 0.0);
    std::size_t coincident = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const auto row = x.row(i);
      const double dist = distance(row, nu);
      if (dist <= snap) {
        ++coincident;
        continue;
      }
      const double w = 1.0 / dist;
      weight_sum += w;
      for (std::size_t j = 0; j < d; ++j) {
        weighted[j] += w * row[j];
        pull[j] += (row[j] - nu[j]) * w;
      }
    }
    const double pull_norm = norm2(pull);
    if (coincident > 0) {
      // At a data point of multiplicity c, optimality is |pull| <= c.
      if (pull_norm <= static_cast<double>(coincident) + 1e-12)
        return report.estimate = nu, report;
      for (std::size_t j = 0; j < d; ++j) nu[j] += tol * pull[j] / pull_norm;
      prev_obj = l1_objective(x, nu);
      continue;
    }
    if (pull_norm <= tol) return report.estimate = nu, report;
    Vector next(d);
    for (std::size_t j = 0; j < d; ++j) next[j] = weighted[j] / weight_sum;
    const double obj = l1_objective(x, next);
    if (obj > prev_obj + 1e-9 * (1.0 + prev_obj))
      throw std::logic_error("geometric_median: objective increased");
    if (distance(next, nu) <= 1e-17 * (scale + 1.0) && pull_norm <= std::sqrt(tol)) {
      return report.estimate = std::move(next), report;  // numerically stalled
    }
    nu = std::move(next);
    prev_obj = obj;
  }
  report.estimate = nu;
  report.warnings |= warning::kMaxIterations;
  return report;
}

// Approximate Tukey depth of theta: the minimum, over a direction set, of the
// fraction of points in the closed halfspace {z : <v,z> <= <v,theta>}. For
// d = 1 the direction set {+1,-1} makes the value exact; for d >= 2 the set
// is all signed axes plus n_directions random unit vectors drawn sequentially
// from the stream (so extending n_directions refines the same set).
inline double tukey_depth(const Dataset& x, std::span<const double> theta,
                          std::size_t n_directions, RngStream& rng) {
  if (theta.size() != x.dim())
    throw std::invalid_argument("tukey_depth: theta dimension mismatch");
  if (n_directions == 0)
    throw std::invalid_argument("tukey_depth: n_directions must be >= 1");
  const std::size_t n = x.n();
  const std::size_t d = x.dim();

  const auto fraction_at = [&](std::span<const double> v) {
    const double t = dot(v, theta);
    std::size_t count = 0;
    for (std::size_t i = 0; i < n; ++i)
      if (dot(v, x.row(i)) <= t) ++count;
    return static_cast<double>(count) / static_cast<double>(n);
  };

  double depth = 1.0;
  Vector v(d, 0.0);
  for (std::size_t j = 0; j < d; ++j) {
    v[j] = 1.0;
    depth = std::min(depth, fraction_at(v));
    v[j] = -1.0;
    depth = std::min(depth, fraction_at(v));
    v[j] = 0.0;
  }
  if (d == 1) return depth;
  for (std::size_t s = 0; s < n_directions; ++s)
    depth = std::min(depth, fraction_at(rng.unit_vector(d)));
  return depth;
}

}  // namespace rmlab::classic

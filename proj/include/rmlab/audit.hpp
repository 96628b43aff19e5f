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
#include <string>
#include <vector>

#include "rmlab/dp.hpp"
#include "rmlab/rng.hpp"

namespace rmlab::dp::audit {

// Randomized neighboring-pair audits of the library's pure-DP mechanisms.
// Each instance draws its own budget and a pair of inputs differing in one
// entry, builds the two exact output distributions, and measures the worst
// log-probability ratio. `worst_excess` is max over instances of
// (audit - epsilon); a correct mechanism keeps it at numerical noise.

struct AuditOutcome {
  std::size_t instances = 0;
  double worst_excess = -std::numeric_limits<double>::infinity();
  double worst_audit = 0;
  double worst_epsilon = 0;

  void absorb(double audit_value, double epsilon) {
    ++instances;
    const double excess = audit_value - epsilon;
    if (excess > worst_excess) {
      worst_excess = excess;
      worst_audit = audit_value;
      worst_epsilon = epsilon;
    }
  }

  bool within(double slack = 1e-9) const { return worst_excess <= slack; }
};

namespace detail {
inline void require_instances(std::size_t instances) {
  if (instances == 0)
    throw std::invalid_argument("audit: need at least one instance");
}
}  // namespace detail

// Exponential mechanism over random score vectors whose per-candidate drift
// is bounded by the declared sensitivity.
inline AuditOutcome audit_exponential_mechanism(std::size_t instances, RngStream rng) {
  detail::require_instances(instances);
  AuditOutcome out;
  for (std::size_t i = 0; i < instances; ++i) {
    RngStream inst = rng.substream(i);
    const std::size_t m = 2 + inst.uniform_below(48);
    const double epsilon = 0.1 + 2.9 * inst.uniform01();
    const double sensitivity = 0.5 + 2.0 * inst.uniform01();
    Vector s1(m);
    Vector s2(m);
    for (std::size_t c = 0; c < m; ++c) {
      s1[c] = 20.0 * (inst.uniform01() - 0.5);
      s2[c] = s1[c] + sensitivity * (2.0 * inst.uniform01() - 1.0);
    }
    const Vector p = em_probabilities(s1, sensitivity, epsilon);
    const Vector q = em_probabilities(s2, sensitivity, epsilon);
    out.absorb(audit_mechanism(p, q), epsilon);
  }
  return out;
}

// Inverse-sensitivity private median on replace-one neighbors over a shared
// data-independent output grid.
inline AuditOutcome audit_inverse_sensitivity_median(std::size_t instances,
                                                     RngStream rng) {
  detail::require_instances(instances);
  AuditOutcome out;
  for (std::size_t i = 0; i < instances; ++i) {
    RngStream inst = rng.substream(i);
    const std::size_t n = 5 + inst.uniform_below(36);  // n <= 40
    const double epsilon = 0.2 + 2.8 * inst.uniform01();
    std::vector<double> xs(n);
    for (auto& v : xs) v = 10.0 * (inst.uniform01() - 0.5);
    std::vector<double> neighbor = xs;
    neighbor[inst.uniform_below(n)] = 50.0 * (inst.uniform01() - 0.5);
    const std::size_t grid_size = 8 + inst.uniform_below(25);
    std::vector<double> grid(grid_size);
    for (auto& g : grid) g = 30.0 * (inst.uniform01() - 0.5);
    std::sort(grid.begin(), grid.end());
    PrivacyBudget budget{epsilon, 0.0};
    RngStream pick1 = inst.substream(1000);
    RngStream pick2 = inst.substream(1001);
    const auto r1 = inverse_sensitivity_median(xs, budget, grid, pick1);
    const auto r2 = inverse_sensitivity_median(neighbor, budget, grid, pick2);
    out.absorb(audit_mechanism(r1.probabilities, r2.probabilities), epsilon);
  }
  return out;
}

// Private median-of-means mean at desk scale (d = 1, n <= 40): replace-one
// neighbors, the same bucket shuffle stream on both sides, exact output
// distributions over the shared cover.
inline AuditOutcome audit_private_mom(std::size_t instances, RngStream rng) {
  detail::require_instances(instances);
  AuditOutcome out;
  for (std::size_t i = 0; i < instances; ++i) {
    RngStream inst = rng.substream(i);
    const std::size_t n = 16 + inst.uniform_below(25);  // 16..40
    const double epsilon = 0.5 + 1.5 * inst.uniform01();
    PrivateMoMConfig cfg;
    cfg.c1 = 2.0;   // keeps k <= n at these tiny n
    cfg.c2 = 0.5;   // keeps the cover nondegenerate (several points)
    Vector data(n);
    for (auto& v : data) {
      // Mix of in-range points and gross outliers; privacy must not care.
      v = inst.uniform01() < 0.8 ? 2.0 * (inst.uniform01() - 0.5)
                                 : 40.0 * (inst.uniform01() - 0.5);
    }
    Vector neighbor_data = data;
    neighbor_data[inst.uniform_below(n)] = 40.0 * (inst.uniform01() - 0.5);
    const Dataset x(n, 1, data);
    const Dataset xp(n, 1, neighbor_data);
    PrivacyBudget budget{epsilon, 0.0};
    RngStream mech = inst.substream(2000);  // same stream for both sides
    RngStream mech_copy = mech;
    const auto r1 = private_mom_mean(x, budget, cfg, mech);
    const auto r2 = private_mom_mean(xp, budget, cfg, mech_copy);
    out.absorb(audit_mechanism(r1.probabilities, r2.probabilities), epsilon);
  }
  return out;
}

}  // namespace rmlab::dp::audit

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
#include <numeric>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "rmlab/dataset.hpp"
#include "rmlab/rng.hpp"

namespace rmlab::synth {

enum class DistKind { gaussian, student_t };

// Clean data source. Gaussian uses the per-coordinate variances in
// covariance_diag. Student-t draws each coordinate independently and rescales
// by sqrt((dof-2)/dof), so every coordinate has unit variance and the
// covariance is the identity; dof must exceed 2 for the variance to exist.
struct DistributionSpec {
  DistKind kind = DistKind::gaussian;
  Vector mean;
  Vector covariance_diag;
  double dof = 0;

  static DistributionSpec gaussian(Vector mean, Vector covariance_diag) {
    DistributionSpec s;
    s.kind = DistKind::gaussian;
    s.mean = std::move(mean);
    s.covariance_diag = std::move(covariance_diag);
    s.validate();
    return s;
  }

  static DistributionSpec standard_gaussian(std::size_t d) {
    return gaussian(Vector(d, 0.0), Vector(d, 1.0));
  }

  static DistributionSpec student_t(Vector mean, double dof) {
    DistributionSpec s;
    s.kind = DistKind::student_t;
    s.covariance_diag.assign(mean.size(), 1.0);
    s.mean = std::move(mean);
    s.dof = dof;
    s.validate();
    return s;
  }

  std::size_t dim() const { return mean.size(); }

  void validate() const {
    if (mean.empty()) throw std::invalid_argument("DistributionSpec: empty mean");
    if (covariance_diag.size() != mean.size())
      throw std::invalid_argument("DistributionSpec: covariance_diag size mismatch");
    for (double v : covariance_diag)
      if (!(v >= 0)) throw std::invalid_argument("DistributionSpec: negative variance");
    if (kind == DistKind::student_t && !(dof > 2))
      throw std::invalid_argument("infinite variance");
  }
};

enum class AttackKind {
  none,
  mean_shift,
  spike_first_coordinate,
  variance_inflation,
  subtractive_tail,
};

inline const char* to_string(AttackKind k) {
  switch (k) {
    case AttackKind::none: return "none";
    case AttackKind::mean_shift: return "mean_shift";
    case AttackKind::spike_first_coordinate: return "spike_first_coordinate";
    case AttackKind::variance_inflation: return "variance_inflation";
    case AttackKind::subtractive_tail: return "subtractive_tail";
  }
  return "?";
}

// Strong-contamination adversary: inspects the clean sample and replaces
// exactly ceil(eta*n) rows. `direction` must be a unit vector for the attacks
// that use one (mean_shift, variance_inflation, subtractive_tail).
struct AttackSpec {
  AttackKind kind = AttackKind::none;
  double eta = 0;
  double magnitude = 0;
  Vector direction;

  static AttackSpec none() { return {}; }

  static AttackSpec make(AttackKind kind, double eta, double magnitude,
                         Vector direction = {}) {
    AttackSpec a{kind, eta, magnitude, std::move(direction)};
    a.validate();
    return a;
  }

  bool needs_direction() const {
    return kind == AttackKind::mean_shift || kind == AttackKind::variance_inflation ||
           kind == AttackKind::subtractive_tail;
  }

  void validate() const {
    if (!(eta >= 0 && eta < 1))
      throw std::invalid_argument("AttackSpec: eta must lie in [0,1)");
    if (magnitude < 0) throw std::invalid_argument("AttackSpec: magnitude must be >= 0");
    if (needs_direction()) {
      if (direction.empty())
        throw std::invalid_argument("AttackSpec: attack requires a direction");
      const double n = norm2(direction);
      if (std::abs(n - 1.0) > 1e-9)
        throw std::invalid_argument("AttackSpec: direction must be a unit vector");
    }
  }
};

// Number of rows the adversary replaces: ceil(eta*n), nudged so that exact
// integer products do not round up and eta > 0 always corrupts at least one.
inline std::size_t corruption_count(double eta, std::size_t n) {
  if (eta <= 0) return 0;
  const double t = eta * static_cast<double>(n);
  double m = std::ceil(t - 1e-9 * std::max(1.0, t));
  if (m < 1) m = 1;
  return static_cast<std::size_t>(m);
}

// n i.i.d. draws from the distribution; bit-reproducible given the stream.
inline Dataset sample(const DistributionSpec& spec, std::size_t n, RngStream& rng) {
  spec.validate();
  if (n == 0) throw std::invalid_argument("sample: n must be >= 1");
  const std::size_t d = spec.dim();
  Vector scale(d);
  for (std::size_t j = 0; j < d; ++j) scale[j] = std::sqrt(spec.covariance_diag[j]);
  const double t_scale =
      spec.kind == DistKind::student_t ? std::sqrt((spec.dof - 2.0) / spec.dof) : 0.0;
  Vector data(n * d);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      double z;
      if (spec.kind == DistKind::gaussian) {
        z = scale[j] * rng.normal();
      } else {
        z = t_scale * rng.student_t(spec.dof);
      }
      data[i * d + j] = spec.mean[j] + z;
    }
  }
  return Dataset(n, d, std::move(data));
}

struct ContaminationResult {
  Dataset data;
  std::vector<std::size_t> corrupted;  // sorted indices of replaced rows
};

// Applies the attack, replacing exactly ceil(eta*n) rows. mean_shift and
// variance_inflation pick a seeded uniformly random subset; subtractive_tail
// replaces the rows with the largest projection on the attack direction.
// Replacement values reference the pre-attack empirical mean, matching an
// adversary who inspects the samples first. Unreplaced rows are bit-identical
// to the input.
inline ContaminationResult contaminate(const Dataset& x, const AttackSpec& attack,
                                       RngStream& rng) {
  attack.validate();
  const std::size_t n = x.n();
  const std::size_t d = x.dim();
  const std::size_t m = corruption_count(attack.eta, n);
  if (m > n) throw std::invalid_argument("contaminate: eta*n exceeds n");
  if (attack.kind == AttackKind::none || m == 0)
    return {Dataset(n, d, x.copy_raw()), {}};
  if (attack.needs_direction() && attack.direction.size() != d)
    throw std::invalid_argument("contaminate: direction dimension mismatch");
  if (attack.kind == AttackKind::spike_first_coordinate && d < 1)
    throw std::invalid_argument("contaminate: spike needs d >= 1");

  const Vector mu = empirical_mean(x);
  Vector data = x.copy_raw();
  std::vector<std::size_t> targets;

  switch (attack.kind) {
    case AttackKind::subtractive_tail: {
      std::vector<std::size_t> order(n);
      std::iota(order.begin(), order.end(), 0);
      std::vector<double> proj(n);
      for (std::size_t i = 0; i < n; ++i) proj[i] = dot(x.row(i), attack.direction);
      std::stable_sort(order.begin(), order.end(),
                       [&proj](std::size_t a, std::size_t b) { return proj[a] > proj[b]; });
      targets.assign(order.begin(), order.begin() + m);
      for (std::size_t idx : targets)
        for (std::size_t j = 0; j < d; ++j) data[idx * d + j] = mu[j];
      break;
    }
    case AttackKind::mean_shift:
    case AttackKind::spike_first_coordinate:
    case AttackKind::variance_inflation: {
      std::vector<std::size_t> order(n);
      std::iota(order.begin(), order.end(), 0);
      rng.shuffle(order);
      targets.assign(order.begin(), order.begin() + m);
      Vector dir(d, 0.0);
      if (attack.kind == AttackKind::spike_first_coordinate)
        dir[0] = 1.0;
      else
        dir = attack.direction;
      const std::size_t plus = (m + 1) / 2;  // variance_inflation split
      for (std::size_t t = 0; t < m; ++t) {
        const std::size_t idx = targets[t];
        double sign = 1.0;
        if (attack.kind == AttackKind::variance_inflation && t >= plus) sign = -1.0;
        for (std::size_t j = 0; j < d; ++j)
          data[idx * d + j] = mu[j] + sign * attack.magnitude * dir[j];
      }
      break;
    }
    case AttackKind::none:
      break;
  }
  std::sort(targets.begin(), targets.end());
  return {Dataset(n, d, std::move(data)), std::move(targets)};
}

}  // namespace rmlab::synth

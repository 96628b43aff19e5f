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
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <utility>
#include <vector>

#include "rmlab/dataset.hpp"
#include "rmlab/report.hpp"
#include "rmlab/rng.hpp"

namespace rmlab::filter {

// Parameters of the subset-stability definition: every subset keeping at
// least a (1-gamma) fraction must have mean within delta1 of the reference
// vector and covariance within delta2 of the identity in spectral norm.
struct StabilityParams {
  double gamma;
  double delta1;
  double delta2;

  void validate() const {
    if (!(gamma > 0 && gamma <= 0.5))
      throw std::invalid_argument("StabilityParams: gamma must lie in (0, 1/2]");
    if (delta1 < 0 || delta2 < 0)
      throw std::invalid_argument("StabilityParams: drift bounds must be >= 0");
  }
};

// Evidence that nu is a (gamma, lambda)-spectral center: a feasible weighting
// w (simplex, entries capped at 1/((1-gamma)n)) whose weighted second-moment
// matrix about nu has spectral norm lambda. lambda is an upper bound on the
// true minimum over all feasible weightings.
struct SpectralCertificate {
  Vector nu;
  double gamma = 0;
  double lambda = 0;
  Vector weights;
};

enum class TailModel { gaussian, bounded_covariance };

// Configuration of the iterative eigenvalue filter. The eigenvalue gate is
//   lambda <= gate_scale * (1 + C eta log(1/eta)),
// and the tail comparison assumes clean per-direction variance
// variance_scale. Both scales default to 1 (unit-covariance data); the
// median-of-means stability aggregator rescales them by k/n.
struct FilterConfig {
  static constexpr double kEtaMax = 1.0 / 3.0;

  double eta;
  double threshold_constant = 9.0;
  double tail_slack = 0.01;
  double removal_cap_multiplier = 3.0;
  TailModel tail_model = TailModel::gaussian;
  double variance_scale = 1.0;
  double gate_scale = 1.0;
  double eig_tol = 1e-6;

  double gate() const {
    return gate_scale * (1.0 + threshold_constant * eta * std::log(1.0 / eta));
  }

  // Reference tail probability of |<v, X - mu>| >= L for clean data, with the
  // "much greater than" margin folded in as a factor 8 plus additive slack.
  double predicted_tail(double level) const {
    const double s = variance_scale;
    if (tail_model == TailModel::gaussian)
      return 8.0 * std::exp(-level * level / (2.0 * s)) + tail_slack;
    return 8.0 * s / (level * level) + tail_slack;
  }

  void validate() const {
    if (!(eta > 0 && eta < kEtaMax))
      throw std::invalid_argument("FilterConfig: eta must lie in (0, 1/3)");
    if (threshold_constant <= 0)
      throw std::invalid_argument("FilterConfig: threshold constant must be positive");
    if (tail_slack < 0 || removal_cap_multiplier < 0)
      throw std::invalid_argument("FilterConfig: negative slack or cap");
    if (variance_scale <= 0 || gate_scale <= 0)
      throw std::invalid_argument("FilterConfig: scales must be positive");
    if (eig_tol <= 0) throw std::invalid_argument("FilterConfig: eig_tol must be positive");
  }
};

namespace detail {

inline std::size_t min_subset_size(double gamma, std::size_t n) {
  const double t = (1.0 - gamma) * static_cast<double>(n);
  double m = std::ceil(t - 1e-9 * std::max(1.0, t));
  if (m < 1) m = 1;
  return static_cast<std::size_t>(std::min<double>(m, static_cast<double>(n)));
}

}  // namespace detail

// Brute-force stability oracle: enumerates every subset S with
// |S| >= (1-gamma) n and checks both drift conditions directly. The spectral
// norm of Sigma_S - I is taken from a dense symmetric eigensolve, which is
// why the oracle is gated to n <= 20.
inline bool check_stability(const Dataset& x, std::span<const double> mu,
                            const StabilityParams& params) {
  params.validate();
  if (x.n() > 20) throw std::invalid_argument("oracle scale exceeded");
  if (mu.size() != x.dim())
    throw std::invalid_argument("check_stability: mu dimension mismatch");
  const std::size_t n = x.n();
  const std::size_t d = x.dim();
  const std::size_t min_size = detail::min_subset_size(params.gamma, n);

  Vector sum(d, 0.0);
  Matrix second(d, d);
  bool ok = true;

  const auto check_subset = [&](std::size_t size) {
    const double inv = 1.0 / static_cast<double>(size);
    Vector mean(d);
    for (std::size_t j = 0; j < d; ++j) mean[j] = sum[j] * inv;
    double drift2 = 0;
    for (std::size_t j = 0; j < d; ++j) {
      const double t = mean[j] - mu[j];
      drift2 += t * t;
    }
    if (drift2 > params.delta1 * params.delta1) return false;
    Matrix sigma(d, d);
    for (std::size_t a = 0; a < d; ++a)
      for (std::size_t b = 0; b < d; ++b) {
        sigma(a, b) = second(a, b) * inv - mean[a] * mean[b];
        if (a == b) sigma(a, b) -= 1.0;
      }
    return spectral_norm_small(sigma) <= params.delta2;
  };

  // Include/exclude recursion with incremental sums; prunes branches that can
  // no longer reach the minimum subset size.
  const auto recurse = [&](auto&& self, std::size_t idx, std::size_t included,
                           std::size_t excluded) -> void {
    if (!ok) return;
    if (idx == n) {
      if (included >= min_size && included > 0 && !check_subset(included)) ok = false;
      return;
    }
    const auto row = x.row(idx);
    for (std::size_t a = 0; a < d; ++a) {
      sum[a] += row[a];
      for (std::size_t b = 0; b < d; ++b) second(a, b) += row[a] * row[b];
    }
    self(self, idx + 1, included + 1, excluded);
    for (std::size_t a = 0; a < d; ++a) {
      sum[a] -= row[a];
      for (std::size_t b = 0; b < d; ++b) second(a, b) -= row[a] * row[b];
    }
    if (excluded + 1 <= n - min_size) self(self, idx + 1, included, excluded + 1);
  };
  recurse(recurse, 0, 0, 0);
  return ok;
}

// Greedy spectral-center certification. Starting from uniform weights, the
// point with the largest squared projection on the current top eigenvector is
// zeroed out and the remaining weights renormalized, until the weight cap
// 1/((1-gamma)n) binds; at the boundary the residual below the cap is parked
// on the worst surviving point. The best (smallest) spectral norm seen is
// returned; it upper-bounds the true minimum over the capped simplex.
inline SpectralCertificate certify_spectral_center(const Dataset& x,
                                                   std::span<const double> nu,
                                                   double gamma, RngStream& rng,
                                                   double eig_tol = 1e-9) {
  if (!(gamma >= 0 && gamma <= 0.5))
    throw std::invalid_argument("certify_spectral_center: gamma must lie in [0, 1/2]");
  if (nu.size() != x.dim())
    throw std::invalid_argument("certify_spectral_center: nu dimension mismatch");
  const std::size_t n = x.n();
  const std::size_t d = x.dim();
  const std::size_t min_active = detail::min_subset_size(gamma, n);

  std::vector<std::size_t> active(n);
  std::iota(active.begin(), active.end(), 0);

  // Second moment about nu of the active points, uniform weights.
  Matrix m(d, d);
  Vector z(d);
  for (std::size_t i = 0; i < n; ++i) {
    const auto row = x.row(i);
    for (std::size_t j = 0; j < d; ++j) z[j] = row[j] - nu[j];
    for (std::size_t a = 0; a < d; ++a)
      for (std::size_t b = a; b < d; ++b) m(a, b) += z[a] * z[b];
  }

  const auto top_of = [&](const Matrix& accum, std::size_t count) -> Eigenpair {
    Matrix scaled(d, d);
    const double inv = 1.0 / static_cast<double>(count);
    for (std::size_t a = 0; a < d; ++a)
      for (std::size_t b = a; b < d; ++b) {
        scaled(a, b) = accum(a, b) * inv;
        scaled(b, a) = scaled(a, b);
      }
    try {
      return top_eigenpair(scaled, eig_tol, rng);
    } catch (const PowerIterationError& e) {
      return e.best_iterate;
    }
  };

  Eigenpair top = top_of(m, active.size());
  double best_lambda = top.lambda;
  Vector best_weights(n, 0.0);
  for (std::size_t i : active) best_weights[i] = 1.0 / static_cast<double>(n);

  const auto worst_of = [&](const Eigenpair& pair) {
    std::size_t worst_pos = 0;
    double worst_score = -1;
    for (std::size_t pos = 0; pos < active.size(); ++pos) {
      const auto row = x.row(active[pos]);
      double p = 0;
      for (std::size_t j = 0; j < d; ++j) p += pair.v[j] * (row[j] - nu[j]);
      if (p * p > worst_score) {
        worst_score = p * p;
        worst_pos = pos;
      }
    }
    return worst_pos;
  };

  while (active.size() > min_active) {
    // Drop the active point with the largest squared projection on v.
    const std::size_t worst_pos = worst_of(top);
    const auto row = x.row(active[worst_pos]);
    for (std::size_t j = 0; j < d; ++j) z[j] = row[j] - nu[j];
    for (std::size_t a = 0; a < d; ++a)
      for (std::size_t b = a; b < d; ++b) m(a, b) -= z[a] * z[b];
    active.erase(active.begin() + static_cast<std::ptrdiff_t>(worst_pos));

    top = top_of(m, active.size());
    if (top.lambda < best_lambda) {
      best_lambda = top.lambda;
      std::fill(best_weights.begin(), best_weights.end(), 0.0);
      for (std::size_t i : active) best_weights[i] = 1.0 / static_cast<double>(active.size());
    }
  }

  // At the cap boundary uniform weights may still be far from it; push every
  // survivor to the cap and park the residual on the worst one.
  const double cap = 1.0 / ((1.0 - gamma) * static_cast<double>(n));
  const double residual = 1.0 - cap * static_cast<double>(active.size() - 1);
  if (active.size() >= 1 && residual >= 0 && residual < cap * (1.0 - 1e-12)) {
    const std::size_t worst_pos = worst_of(top);
    Vector weights(n, 0.0);
    for (std::size_t pos = 0; pos < active.size(); ++pos)
      weights[active[pos]] = pos == worst_pos ? residual : cap;
    Matrix capped(d, d);
    for (std::size_t pos = 0; pos < active.size(); ++pos) {
      const auto row = x.row(active[pos]);
      for (std::size_t j = 0; j < d; ++j) z[j] = row[j] - nu[j];
      const double w = weights[active[pos]];
      for (std::size_t a = 0; a < d; ++a)
        for (std::size_t b = a; b < d; ++b) capped(a, b) += w * z[a] * z[b];
    }
    for (std::size_t a = 0; a < d; ++a)
      for (std::size_t b = a; b < d; ++b) capped(b, a) = capped(a, b);
    Eigenpair capped_top;
    try {
      capped_top = top_eigenpair(capped, eig_tol, rng);
    } catch (const PowerIterationError& e) {
      capped_top = e.best_iterate;
    }
    if (capped_top.lambda < best_lambda) {
      best_lambda = capped_top.lambda;
      best_weights = weights;
    }
  }

  SpectralCertificate cert;
  cert.nu.assign(nu.begin(), nu.end());
  cert.gamma = gamma;
  cert.lambda = std::max(0.0, best_lambda);
  cert.weights = std::move(best_weights);
  return cert;
}

// Iterative eigenvalue filter for contamination-robust mean estimation.
//
// Loop: compute the empirical mean and covariance of the surviving rows and
// the top eigenpair (lambda, v). If lambda passes the gate, return the mean.
// Otherwise compare the empirical tail of t_i = |<v, X_i - mu>| against the
// clean tail model over the observed values of t and cut at the largest
// level L >= 2*sqrt(variance_scale) where the empirical tail fraction beyond
// L exceeds the prediction, removing every point with t_i > L. (Cutting at
// the largest qualifying level removes the far excess while sparing points
// the clean model can account for; the displaced empirical mean makes small
// levels qualify spuriously.) When no level qualifies, the single farthest
// point is removed so the loop always progresses. Removals are capped at
// removal_cap_multiplier * eta * n + log n; hitting the cap returns the
// current mean with a warning instead of deleting further mass.
inline EstimatorReport filter_mean(const Dataset& x, const FilterConfig& cfg,
                                   RngStream& rng) {
  cfg.validate();
  if (x.n() < 2) throw std::invalid_argument("filter_mean: need n >= 2");
  const std::size_t n = x.n();
  const std::size_t d = x.dim();
  const double gate = cfg.gate();
  const double level_floor = 2.0 * std::sqrt(cfg.variance_scale);
  const double removal_cap = cfg.removal_cap_multiplier * cfg.eta * static_cast<double>(n) +
                             std::log(static_cast<double>(n));

  std::vector<std::size_t> active(n);
  std::iota(active.begin(), active.end(), 0);
  EstimatorReport report;

  for (;;) {
    if (active.empty()) throw std::runtime_error("filter exhausted dataset");
    ++report.iterations;

    const std::size_t m = active.size();
    // Covariance and projections are anchored at the first surviving row,
    // which makes every removal decision translation invariant; the reported
    // estimate is the plain empirical mean of the survivors.
    const auto anchor = x.row(active[0]);
    Vector mean_z(d, 0.0);
    Vector mu(d, 0.0);
    for (std::size_t i : active) {
      const auto row = x.row(i);
      for (std::size_t j = 0; j < d; ++j) {
        mean_z[j] += row[j] - anchor[j];
        mu[j] += row[j];
      }
    }
    for (auto& v : mean_z) v /= static_cast<double>(m);
    for (auto& v : mu) v /= static_cast<double>(m);

    Matrix cov(d, d);
    Vector centered(d);
    for (std::size_t i : active) {
      const auto row = x.row(i);
      for (std::size_t j = 0; j < d; ++j)
        centered[j] = (row[j] - anchor[j]) - mean_z[j];
      for (std::size_t a = 0; a < d; ++a) {
        const double ca = centered[a];
        double* out = cov.data.data() + a * d;
        for (std::size_t b = a; b < d; ++b) out[b] += ca * centered[b];
      }
    }
    for (std::size_t a = 0; a < d; ++a)
      for (std::size_t b = a; b < d; ++b) {
        cov(a, b) /= static_cast<double>(m);
        cov(b, a) = cov(a, b);
      }

    Eigenpair top;
    if (m == 1) {
      top = {0.0, Vector(d, 0.0), 0, true};
      top.v[0] = 1.0;
    } else {
      try {
        top = top_eigenpair(cov, cfg.eig_tol, rng);
      } catch (const PowerIterationError& e) {
        top = e.best_iterate;
        report.warnings |= warning::kEigenSolverSlack;
      }
    }

    report.estimate = mu;
    report.final_top_eigenvalue = top.lambda;
    if (top.lambda <= gate) return report;

    // Centered absolute projections on the top eigenvector.
    std::vector<double> t(m);
    for (std::size_t pos = 0; pos < m; ++pos) {
      const auto row = x.row(active[pos]);
      double p = 0;
      for (std::size_t j = 0; j < d; ++j)
        p += top.v[j] * ((row[j] - anchor[j]) - mean_z[j]);
      t[pos] = std::abs(p);
    }
    std::vector<double> sorted = t;
    std::sort(sorted.begin(), sorted.end());

    // Largest observed level L >= floor whose strict tail beats the model.
    // Candidates walk the distinct sorted values from the top; `idx` is one
    // past the current tie group, so m - idx counts values strictly above it.
    double cut = -1.0;
    std::size_t idx = m;
    while (idx > 0) {
      const double level = sorted[idx - 1];
      std::size_t first = idx - 1;
      while (first > 0 && sorted[first - 1] == level) --first;
      if (level < level_floor) break;
      const double frac = static_cast<double>(m - idx) / static_cast<double>(m);
      if (frac > cfg.predicted_tail(level)) {
        cut = level;
        break;
      }
      idx = first;
    }

    std::vector<std::size_t> victims;
    if (cut >= 0) {
      for (std::size_t pos = 0; pos < m; ++pos)
        if (t[pos] > cut) victims.push_back(pos);
    } else {
      const std::size_t farthest = static_cast<std::size_t>(
          std::max_element(t.begin(), t.end()) - t.begin());
      victims.push_back(farthest);
    }

    if (static_cast<double>(report.removed_indices.size() + victims.size()) >
        removal_cap) {
      report.warnings |= warning::kRemovalCap;
      return report;
    }
    for (std::size_t pos : victims) report.removed_indices.push_back(active[pos]);
    // Erase victims back to front so positions stay valid.
    for (std::size_t vi = victims.size(); vi-- > 0;)
      active.erase(active.begin() + static_cast<std::ptrdiff_t>(victims[vi]));
    std::sort(report.removed_indices.begin(), report.removed_indices.end());
  }
}

}  // namespace rmlab::filter

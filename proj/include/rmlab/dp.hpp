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
#include <iomanip>
#include <limits>
#include <ostream>
#include <stdexcept>
#include <utility>
#include <vector>

#include "rmlab/dataset.hpp"
#include "rmlab/mom.hpp"
#include "rmlab/report.hpp"
#include "rmlab/rng.hpp"

namespace rmlab::dp {

// (epsilon, delta) privacy budget; delta = 0 denotes pure DP.
struct PrivacyBudget {
  double epsilon;
  double delta = 0.0;

  void validate() const {
    if (!(epsilon > 0)) throw std::invalid_argument("PrivacyBudget: epsilon must be > 0");
    if (!(delta >= 0 && delta < 1))
      throw std::invalid_argument("PrivacyBudget: delta must lie in [0,1)");
  }

  bool pure() const { return delta == 0.0; }
};

// Clip radius plus the sensitivities of the tau-clipped mean under the
// replace-one neighboring relation: l1 = 2 tau sqrt(d) / n, l2 = 2 tau / n.
struct ClipConfig {
  double tau;
  double l1_sensitivity;
  double l2_sensitivity;

  static ClipConfig for_dataset(double tau, std::size_t n, std::size_t d) {
    if (!(tau > 0)) throw std::invalid_argument("ClipConfig: tau must be > 0");
    if (n == 0 || d == 0) throw std::invalid_argument("ClipConfig: empty shape");
    ClipConfig c;
    c.tau = tau;
    c.l2_sensitivity = 2.0 * tau / static_cast<double>(n);
    c.l1_sensitivity = c.l2_sensitivity * std::sqrt(static_cast<double>(d));
    return c;
  }
};

// Projects x onto the l2 ball of radius tau. The hair of slack keeps the
// operation exactly idempotent under floating-point rescaling.
inline Vector clip(Vector x, double tau) {
  if (!(tau > 0)) throw std::invalid_argument("clip: tau must be > 0");
  const double norm = norm2(x);
  if (norm <= tau * (1.0 + 1e-12)) return x;
  const double scale = tau / norm;
  for (auto& v : x) v *= scale;
  return x;
}

// Clip radius balancing clipping bias sqrt(d)/tau against mechanism noise:
// tau = sqrt(n eps) / d^{1/4} for pure DP (Laplace noise tau d/(n eps)) and
// tau = sqrt(n eps) / ln(1/delta)^{1/4} for approximate DP (Gaussian noise
// tau sqrt(d ln(1/delta))/(n eps)).
inline double choose_tau(std::size_t n, std::size_t d, const PrivacyBudget& budget) {
  budget.validate();
  if (n == 0 || d == 0) throw std::invalid_argument("choose_tau: empty shape");
  const double ne = static_cast<double>(n) * budget.epsilon;
  if (budget.pure()) return std::sqrt(ne) / std::pow(static_cast<double>(d), 0.25);
  return std::sqrt(ne) / std::pow(std::log(1.0 / budget.delta), 0.25);
}

// Mean of the tau-clipped rows, before any noise.
inline Vector clipped_mean_statistic(const Dataset& x, double tau) {
  Vector acc(x.dim(), 0.0);
  for (std::size_t i = 0; i < x.n(); ++i) {
    const Vector c = clip(Vector(x.row(i).begin(), x.row(i).end()), tau);
    for (std::size_t j = 0; j < x.dim(); ++j) acc[j] += c[j];
  }
  for (auto& v : acc) v /= static_cast<double>(x.n());
  return acc;
}

// Gaussian-mechanism noise scale: the standard analytic calibration
// sigma = Delta_2 sqrt(2 ln(1.25/delta)) / eps.
inline double gaussian_mechanism_sigma(double l2_sensitivity, const PrivacyBudget& budget) {
  return l2_sensitivity * std::sqrt(2.0 * std::log(1.25 / budget.delta)) / budget.epsilon;
}

// Private clipped mean. Pure budgets add per-coordinate Laplace(Delta_1/eps)
// noise; budgets with delta > 0 add Gaussian noise at the analytic sigma.
inline EstimatorReport clipped_mean(const Dataset& x, const ClipConfig& cfg,
                                    const PrivacyBudget& budget, RngStream& rng) {
  budget.validate();
  EstimatorReport report;
  report.estimate = clipped_mean_statistic(x, cfg.tau);
  if (budget.pure()) {
    const double b = cfg.l1_sensitivity / budget.epsilon;
    for (auto& v : report.estimate) v += rng.laplace(b);
  } else {
    const double sigma = gaussian_mechanism_sigma(cfg.l2_sensitivity, budget);
    for (auto& v : report.estimate) v += rng.normal(0.0, sigma);
  }
  return report;
}

// Finite candidate set with per-candidate quality scores and the score
// sensitivity Delta (worst-case per-candidate change across neighbors).
struct ScoredCandidateSet {
  std::vector<Vector> candidates;
  Vector scores;
  double sensitivity = 1.0;

  void validate() const {
    if (candidates.empty()) throw std::invalid_argument("ScoredCandidateSet: empty");
    if (scores.size() != candidates.size())
      throw std::invalid_argument("ScoredCandidateSet: score count mismatch");
    if (!(sensitivity > 0))
      throw std::invalid_argument("ScoredCandidateSet: sensitivity must be > 0");
  }
};

// Normalized exponential-mechanism distribution over candidates:
// p_h proportional to exp(eps * s_h / (2 Delta)), computed with a max-score
// shift so large scores cannot overflow.
inline Vector em_probabilities(std::span<const double> scores, double sensitivity,
                               double epsilon) {
  if (scores.empty()) throw std::invalid_argument("em_probabilities: empty scores");
  const double top = *std::max_element(scores.begin(), scores.end());
  Vector p(scores.size());
  double z = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    p[i] = std::exp(epsilon * (scores[i] - top) / (2.0 * sensitivity));
    z += p[i];
  }
  for (auto& v : p) v /= z;
  return p;
}

struct ExpMechResult {
  std::size_t index = 0;
  Vector probabilities;
};

// Exponential mechanism over a finite candidate set. Returns both the drawn
// index and the full probability vector so audits can work from the exact
// output distribution.
inline ExpMechResult exponential_mechanism(const ScoredCandidateSet& s, double epsilon,
                                           RngStream& rng) {
  s.validate();
  if (!(epsilon > 0)) throw std::invalid_argument("exponential_mechanism: epsilon <= 0");
  ExpMechResult out;
  out.probabilities = em_probabilities(s.scores, s.sensitivity, epsilon);
  const double u = rng.uniform01();
  double acc = 0;
  out.index = out.probabilities.size() - 1;
  for (std::size_t i = 0; i < out.probabilities.size(); ++i) {
    acc += out.probabilities[i];
    if (u < acc) {
      out.index = i;
      break;
    }
  }
  return out;
}

// Axis-aligned grid with the given spacing intersected with the closed l2
// ball of the given radius, origin always included.
struct Cover {
  std::vector<Vector> points;
  double radius = 0;
  double spacing = 0;
};

inline Cover build_cover(std::size_t d, double radius, double spacing) {
  if (d > 3) throw std::invalid_argument("cover is exponential in d");
  if (d == 0) throw std::invalid_argument("build_cover: d must be >= 1");
  if (!(spacing > 0)) throw std::invalid_argument("build_cover: spacing must be > 0");
  if (!(radius >= 0)) throw std::invalid_argument("build_cover: radius must be >= 0");
  const long long half = static_cast<long long>(std::floor(radius / spacing + 1e-12));
  Cover cover;
  cover.radius = radius;
  cover.spacing = spacing;
  const double r2 = radius * radius * (1.0 + 1e-12);
  Vector p(d);
  std::vector<long long> idx(d, -half);
  for (;;) {
    double n2 = 0;
    for (std::size_t j = 0; j < d; ++j) {
      p[j] = static_cast<double>(idx[j]) * spacing;
      n2 += p[j] * p[j];
    }
    if (n2 <= r2) cover.points.push_back(p);
    std::size_t j = 0;
    for (; j < d; ++j) {
      if (idx[j] < half) {
        ++idx[j];
        break;
      }
      idx[j] = -half;
    }
    if (j == d) break;
  }
  return cover;
}

struct PrivateMoMConfig {
  double c1 = 10.0;  // bucket-count constant: k = ceil(c1 d ln(n) / eps)
  double c2 = 8.0;   // cover-spacing constant: r = c2 sqrt(d / (eps n))
  std::size_t direction_steps = 360;
};

struct PrivateMoMResult {
  EstimatorReport report;
  Cover cover;
  Vector scores;          // per cover point, negated combinatorial score
  Vector probabilities;   // exponential-mechanism distribution over the cover
  std::size_t k = 0;
};

// Pure-DP mean estimation over a finite cover (desk scale, d <= 3). Bucket
// means are scored at every cover point by the negated combinatorial score
// over a fixed deterministic direction net, and a point is drawn by the
// exponential mechanism with sensitivity 1: one changed sample changes one
// bucket mean, which moves each cover point's score by at most 1.
inline PrivateMoMResult private_mom_mean(const Dataset& x, const PrivacyBudget& budget,
                                         const PrivateMoMConfig& cfg, RngStream& rng) {
  budget.validate();
  if (!budget.pure())
    throw std::invalid_argument("private_mom_mean: requires a pure (delta = 0) budget");
  const std::size_t d = x.dim();
  const std::size_t n = x.n();
  if (d > 3) throw std::invalid_argument("cover is exponential in d");

  const double kf = cfg.c1 * static_cast<double>(d) *
                    std::log(static_cast<double>(n)) / budget.epsilon;
  double kc = std::ceil(kf - 1e-9 * std::max(1.0, kf));
  if (kc < 1) kc = 1;
  if (kc > static_cast<double>(n))
    throw std::invalid_argument("private_mom_mean: bucket count exceeds n");
  const std::size_t k = static_cast<std::size_t>(kc);

  const double root_d = std::sqrt(static_cast<double>(d));
  const double spacing =
      cfg.c2 * std::sqrt(static_cast<double>(d) / (budget.epsilon * static_cast<double>(n)));
  const double lambda = cfg.c2 * cfg.c2 * static_cast<double>(d) *
                        std::log(static_cast<double>(n)) /
                        (budget.epsilon * static_cast<double>(n));

  RngStream shuffle_rng = rng.substream(0);
  RngStream pick_rng = rng.substream(1);
  const mom::BucketMeans y = mom::bucket_means(x, k, shuffle_rng);

  PrivateMoMResult out;
  out.k = k;
  out.cover = build_cover(d, root_d, spacing);
  const std::vector<Vector> directions = mom::angular_grid(d, cfg.direction_steps);
  const std::vector<std::size_t> raw =
      mom::combinatorial_scores_batch(y, out.cover.points, lambda, directions);
  out.scores.resize(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i)
    out.scores[i] = -static_cast<double>(raw[i]);

  ScoredCandidateSet set;
  set.candidates = out.cover.points;
  set.scores = out.scores;
  set.sensitivity = 1.0;
  const ExpMechResult pick = exponential_mechanism(set, budget.epsilon, pick_rng);
  out.probabilities = pick.probabilities;
  out.report.estimate = out.cover.points[pick.index];
  out.report.iterations = 1;
  return out;
}

struct InverseSensitivityResult {
  double value = 0;
  Vector scores;
  Vector probabilities;
};

// Inverse-sensitivity score of a candidate h for the median of xs: the
// negated minimum number of datapoints that must change before h can be the
// median, i.e. -min{m >= 0 : x_(lo-m) <= h <= x_(hi+m)} with lo/hi the middle
// ranks and out-of-range order statistics reading as -inf/+inf.
inline double inverse_sensitivity_median_score(const std::vector<double>& sorted_xs,
                                               double h) {
  const std::size_t n = sorted_xs.size();
  const std::size_t lo = (n + 1) / 2;  // 1-based floor((n+1)/2)
  const std::size_t hi = n / 2 + 1;    // 1-based ceil((n+1)/2)
  constexpr double kInf = std::numeric_limits<double>::infinity();
  for (std::size_t m = 0;; ++m) {
    const double lower = lo > m ? sorted_xs[lo - m - 1] : -kInf;
    const double upper = hi + m <= n ? sorted_xs[hi + m - 1] : kInf;
    if (lower <= h && h <= upper) return -static_cast<double>(m);
  }
}

// Pure-DP median over a fixed output grid via the exponential mechanism with
// the inverse-sensitivity score (sensitivity 1).
inline InverseSensitivityResult inverse_sensitivity_median(
    const std::vector<double>& xs, const PrivacyBudget& budget,
    const std::vector<double>& output_grid, RngStream& rng) {
  budget.validate();
  if (!budget.pure())
    throw std::invalid_argument("inverse_sensitivity_median: requires delta = 0");
  if (xs.empty()) throw std::invalid_argument("inverse_sensitivity_median: empty input");
  if (output_grid.empty())
    throw std::invalid_argument("inverse_sensitivity_median: empty grid");
  std::vector<double> sorted = xs;
  std::sort(sorted.begin(), sorted.end());

  ScoredCandidateSet set;
  set.sensitivity = 1.0;
  set.scores.resize(output_grid.size());
  set.candidates.resize(output_grid.size());
  for (std::size_t i = 0; i < output_grid.size(); ++i) {
    set.candidates[i] = {output_grid[i]};
    set.scores[i] = inverse_sensitivity_median_score(sorted, output_grid[i]);
  }
  const ExpMechResult pick = exponential_mechanism(set, budget.epsilon, rng);
  return {output_grid[pick.index], set.scores, pick.probabilities};
}

// Exact pure-DP audit of two output distributions on the same finite
// candidate set: max over candidates of |ln(p_i/q_i)|, with 0/0 contributing
// nothing. A one-sided zero is an infinite privacy loss and throws.
inline double audit_mechanism(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size())
    throw std::invalid_argument("audit_mechanism: size mismatch");
  double sp = 0, sq = 0;
  for (double v : p) sp += v;
  for (double v : q) sq += v;
  if (std::abs(sp - 1.0) > 1e-12 || std::abs(sq - 1.0) > 1e-12)
    throw std::invalid_argument("audit_mechanism: inputs must be normalized");
  double worst = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] == 0.0 && q[i] == 0.0) continue;
    if (p[i] == 0.0 || q[i] == 0.0)
      throw std::runtime_error("infinite privacy loss");
    worst = std::max(worst, std::abs(std::log(p[i] / q[i])));
  }
  return worst;
}

// Audit-record export: one row per candidate, "index,probability".
inline void write_probabilities_csv(std::ostream& out, std::span<const double> probs) {
  out << std::setprecision(17);
  for (std::size_t i = 0; i < probs.size(); ++i)
    out << i << ',' << probs[i] << '\n';
}

}  // namespace rmlab::dp

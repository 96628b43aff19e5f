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
#include <limits>
#include <numeric>
#include <stdexcept>
#include <utility>
#include <vector>

#include "rmlab/classic.hpp"
#include "rmlab/dataset.hpp"
#include "rmlab/filter.hpp"
#include "rmlab/report.hpp"
#include "rmlab/rng.hpp"

namespace rmlab::mom {

struct BucketAssignment {
  std::vector<std::size_t> order;    // permutation of [n] actually used
  std::vector<std::size_t> offsets;  // k+1 bucket boundaries into `order`
};

// Bucket means Y_1..Y_k of a partition of the n samples. Bucket sizes differ
// by at most one; the first (n mod k) buckets hold the extra element.
struct BucketMeans {
  Matrix y;  // k x d
  std::size_t k = 0;
  std::size_t n = 0;
  BucketAssignment assignment;

  std::size_t dim() const { return y.cols; }

  Dataset as_dataset() const { return Dataset(k, dim(), y.data); }

  Vector row_vector(std::size_t j) const {
    return Vector(y.row(j).begin(), y.row(j).end());
  }
};

namespace detail {

inline BucketMeans bucket_with_order(const Dataset& x, std::size_t k,
                                     std::vector<std::size_t> order) {
  const std::size_t n = x.n();
  const std::size_t d = x.dim();
  BucketMeans out;
  out.k = k;
  out.n = n;
  out.y = Matrix(k, d);
  out.assignment.order = std::move(order);
  out.assignment.offsets.resize(k + 1);
  const std::size_t base = n / k;
  const std::size_t extra = n % k;
  std::size_t at = 0;
  for (std::size_t j = 0; j < k; ++j) {
    out.assignment.offsets[j] = at;
    const std::size_t size = base + (j < extra ? 1 : 0);
    double* mean = out.y.data.data() + j * d;
    for (std::size_t t = 0; t < size; ++t) {
      const auto row = x.row(out.assignment.order[at + t]);
      for (std::size_t c = 0; c < d; ++c) mean[c] += row[c];
    }
    for (std::size_t c = 0; c < d; ++c) mean[c] /= static_cast<double>(size);
    at += size;
  }
  out.assignment.offsets[k] = at;
  return out;
}

}  // namespace detail

// Contiguous partition in dataset order.
inline BucketMeans bucket_means(const Dataset& x, std::size_t k) {
  if (k == 0 || k > x.n())
    throw std::invalid_argument("bucket_means: need 1 <= k <= n");
  std::vector<std::size_t> order(x.n());
  std::iota(order.begin(), order.end(), 0);
  return detail::bucket_with_order(x, k, std::move(order));
}

// Seeded shuffle, then contiguous partition.
inline BucketMeans bucket_means(const Dataset& x, std::size_t k, RngStream& rng) {
  if (k == 0 || k > x.n())
    throw std::invalid_argument("bucket_means: need 1 <= k <= n");
  std::vector<std::size_t> order(x.n());
  std::iota(order.begin(), order.end(), 0);
  rng.shuffle(order);
  return detail::bucket_with_order(x, k, std::move(order));
}

inline double mom_univariate(const std::vector<double>& xs, std::size_t k) {
  const Dataset x(xs.size(), 1, xs);
  return classic::median(bucket_means(x, k).y.data);
}

inline double mom_univariate(const std::vector<double>& xs, std::size_t k,
                             RngStream& rng) {
  const Dataset x(xs.size(), 1, xs);
  return classic::median(bucket_means(x, k, rng).y.data);
}

// Simple median: the bucket mean whose ceil(0.6 k)-th smallest distance to
// the bucket means (its own zero distance included) is minimal. With a
// majority of buckets in a tight cluster this lands inside the cluster.
inline Vector simple_median(const BucketMeans& y) {
  const std::size_t k = y.k;
  if (k == 0) throw std::invalid_argument("simple_median: empty buckets");
  const std::size_t rank = static_cast<std::size_t>(
      std::ceil(0.6 * static_cast<double>(k) - 1e-12));  // 1-based, <= k
  std::size_t best = 0;
  double best_score = std::numeric_limits<double>::infinity();
  std::vector<double> dists(k);
  for (std::size_t j = 0; j < k; ++j) {
    for (std::size_t i = 0; i < k; ++i) dists[i] = distance(y.y.row(j), y.y.row(i));
    std::nth_element(dists.begin(), dists.begin() + (rank - 1), dists.end());
    const double score = dists[rank - 1];
    if (score < best_score) {
      best_score = score;
      best = j;
    }
  }
  return y.row_vector(best);
}

// Certificate that nu is a combinatorial center of the bucket means at level
// (gamma, lambda): over the direction set used, at most `score` buckets lie
// sqrt(lambda) beyond nu in any single direction. gamma records score/k, the
// tightest level this evidence supports.
struct CombinatorialCertificate {
  Vector nu;
  double gamma = 0;
  double lambda = 0;
  std::size_t score = 0;
  Vector witness_direction;
  std::vector<std::size_t> far_set;
};

// Max over the given directions of #{j : <Y_j - nu, v> >= sqrt(lambda)}.
// Exact for d = 1 with directions {+1, -1}; a finite net lower-bounds the
// all-directions value in general.
inline CombinatorialCertificate combinatorial_score(
    const BucketMeans& y, std::span<const double> nu, double lambda,
    std::span<const Vector> directions) {
  if (lambda < 0) throw std::invalid_argument("combinatorial_score: lambda < 0");
  if (directions.empty())
    throw std::invalid_argument("combinatorial_score: empty direction set");
  if (nu.size() != y.dim())
    throw std::invalid_argument("combinatorial_score: nu dimension mismatch");
  const double threshold = std::sqrt(lambda);
  const std::size_t k = y.k;
  const std::size_t d = y.dim();

  CombinatorialCertificate cert;
  cert.nu.assign(nu.begin(), nu.end());
  cert.lambda = lambda;
  bool first = true;
  std::vector<std::size_t> far;
  for (const Vector& v : directions) {
    if (v.size() != d)
      throw std::invalid_argument("combinatorial_score: direction dimension mismatch");
    far.clear();
    for (std::size_t j = 0; j < k; ++j) {
      double p = 0;
      const auto row = y.y.row(j);
      for (std::size_t c = 0; c < d; ++c) p += (row[c] - nu[c]) * v[c];
      if (p >= threshold) far.push_back(j);
    }
    if (first || far.size() > cert.score) {
      cert.score = far.size();
      cert.witness_direction = v;
      cert.far_set = far;
      first = false;
    }
  }
  cert.gamma = static_cast<double>(cert.score) / static_cast<double>(k);
  return cert;
}

inline const std::vector<Vector>& sign_directions_1d() {
  static const std::vector<Vector> dirs = {{1.0}, {-1.0}};
  return dirs;
}

// Deterministic angular direction grid: {+1,-1} for d=1, `steps` equally
// spaced angles for d=2, and a steps^2 spherical-angle grid for d=3.
inline std::vector<Vector> angular_grid(std::size_t d, std::size_t steps = 360) {
  if (steps == 0) throw std::invalid_argument("angular_grid: steps must be >= 1");
  constexpr double kPi = 3.14159265358979323846;
  std::vector<Vector> dirs;
  if (d == 1) return sign_directions_1d();
  if (d == 2) {
    dirs.reserve(steps);
    for (std::size_t i = 0; i < steps; ++i) {
      const double a = 2.0 * kPi * static_cast<double>(i) / static_cast<double>(steps);
      dirs.push_back({std::cos(a), std::sin(a)});
    }
    return dirs;
  }
  if (d == 3) {
    dirs.reserve(steps * steps);
    for (std::size_t i = 0; i < steps; ++i) {
      const double theta = 2.0 * kPi * static_cast<double>(i) / static_cast<double>(steps);
      for (std::size_t j = 0; j < steps; ++j) {
        const double phi = kPi * (static_cast<double>(j) + 0.5) / static_cast<double>(steps);
        dirs.push_back({std::sin(phi) * std::cos(theta),
                        std::sin(phi) * std::sin(theta), std::cos(phi)});
      }
    }
    return dirs;
  }
  throw std::invalid_argument("angular_grid: only d <= 3 is supported");
}

struct ExactScore {
  CombinatorialCertificate cert;
  // Width (radians) of the widest angular interval attaining the maximum in
  // d = 2; 2*pi for d = 1. Zero when the maximum is attained only at
  // isolated angles.
  double margin = 0;
};

// Exact combinatorial score for d <= 2. In d = 2 each bucket contributes a
// closed arc of directions that see it beyond sqrt(lambda); the maximum
// coverage is located by a sweep over the 2k arc endpoints and re-verified
// with exact dot products at endpoint and midpoint angles.
inline ExactScore combinatorial_score_exact(const BucketMeans& y,
                                            std::span<const double> nu,
                                            double lambda) {
  const std::size_t d = y.dim();
  constexpr double kTwoPi = 2.0 * 3.14159265358979323846;
  if (d == 1) {
    ExactScore out{combinatorial_score(y, nu, lambda, sign_directions_1d()), kTwoPi};
    return out;
  }
  if (d != 2)
    throw std::invalid_argument("combinatorial_score_exact: only d <= 2");
  if (lambda < 0) throw std::invalid_argument("combinatorial_score_exact: lambda < 0");
  const double threshold = std::sqrt(lambda);
  const std::size_t k = y.k;

  struct Arc {
    double lo, hi;  // may wrap past 2*pi
  };
  std::vector<Arc> arcs;
  std::size_t always = 0;  // buckets counted in every direction (z=0, lambda=0)
  for (std::size_t j = 0; j < k; ++j) {
    const double zx = y.y(j, 0) - nu[0];
    const double zy = y.y(j, 1) - nu[1];
    const double r = std::hypot(zx, zy);
    if (r < threshold) continue;
    if (r == 0.0) {
      ++always;  // threshold is 0 here, and <0,v> >= 0 for every v
      continue;
    }
    const double phi = std::atan2(zy, zx);
    const double alpha = std::acos(std::clamp(threshold / r, 0.0, 1.0));
    arcs.push_back({phi - alpha, phi + alpha});
  }

  ExactScore out;
  out.cert.nu.assign(nu.begin(), nu.end());
  out.cert.lambda = lambda;
  if (arcs.empty()) {
    // Only the always-counting buckets (z = 0 with lambda = 0) remain; every
    // direction sees the same set.
    out.cert.score = always;
    out.cert.witness_direction = {1.0, 0.0};
    out.cert.gamma = static_cast<double>(always) / static_cast<double>(k);
    out.margin = kTwoPi;
    for (std::size_t j = 0; j < k; ++j)
      if ((y.y(j, 0) - nu[0]) >= threshold) out.cert.far_set.push_back(j);
    return out;
  }

  // Candidate angles: endpoints and midpoints of the circular partition they
  // induce. Interior midpoints count their covering arcs with slack, so the
  // verified maximum is the true one.
  std::vector<double> events;
  events.reserve(arcs.size() * 2);
  const auto wrap = [&](double a) {
    a = std::fmod(a, kTwoPi);
    if (a < 0) a += kTwoPi;
    return a;
  };
  for (const Arc& a : arcs) {
    events.push_back(wrap(a.lo));
    events.push_back(wrap(a.hi));
  }
  std::sort(events.begin(), events.end());
  std::vector<double> candidates = events;
  for (std::size_t i = 0; i < events.size(); ++i) {
    const double a = events[i];
    const double b = i + 1 < events.size() ? events[i + 1] : events.front() + kTwoPi;
    candidates.push_back(wrap(0.5 * (a + b)));
  }

  const auto count_at = [&](double angle, std::vector<std::size_t>* far) {
    const Vector v = {std::cos(angle), std::sin(angle)};
    std::size_t c = 0;
    for (std::size_t j = 0; j < k; ++j) {
      const double p = (y.y(j, 0) - nu[0]) * v[0] + (y.y(j, 1) - nu[1]) * v[1];
      if (p >= threshold) {
        ++c;
        if (far) far->push_back(j);
      }
    }
    return c;
  };

  double best_angle = candidates.front();
  std::size_t best = 0;
  for (double a : candidates) {
    const std::size_t c = count_at(a, nullptr);
    if (c > best) {
      best = c;
      best_angle = a;
    }
  }
  out.cert.score = best;
  out.cert.witness_direction = {std::cos(best_angle), std::sin(best_angle)};
  count_at(best_angle, &out.cert.far_set);
  out.cert.gamma = static_cast<double>(best) / static_cast<double>(k);

  // Margin: widest inter-event interval whose midpoint attains the maximum.
  double margin = 0;
  for (std::size_t i = 0; i < events.size(); ++i) {
    const double a = events[i];
    const double b = i + 1 < events.size() ? events[i + 1] : events.front() + kTwoPi;
    if (b - a <= 0) continue;
    if (count_at(wrap(0.5 * (a + b)), nullptr) == best) margin = std::max(margin, b - a);
  }
  out.margin = margin;
  return out;
}

// Scores of many candidate centers against one bucket set, sharing the
// per-direction sorted projections. Equivalent to calling
// combinatorial_score per candidate, at O(log k) per (candidate, direction).
inline std::vector<std::size_t> combinatorial_scores_batch(
    const BucketMeans& y, std::span<const Vector> candidates, double lambda,
    std::span<const Vector> directions) {
  if (lambda < 0) throw std::invalid_argument("combinatorial_scores_batch: lambda < 0");
  const double threshold = std::sqrt(lambda);
  const std::size_t k = y.k;
  std::vector<std::size_t> scores(candidates.size(), 0);
  std::vector<double> proj(k);
  for (const Vector& v : directions) {
    for (std::size_t j = 0; j < k; ++j) proj[j] = dot(y.y.row(j), v);
    std::sort(proj.begin(), proj.end());
    for (std::size_t c = 0; c < candidates.size(); ++c) {
      const double t = dot(candidates[c], v) + threshold;
      const auto it = std::lower_bound(proj.begin(), proj.end(), t);
      const std::size_t count = static_cast<std::size_t>(proj.end() - it);
      scores[c] = std::max(scores[c], count);
    }
  }
  return scores;
}

enum class StepRule { median_projection };

struct DescentConfig {
  StepRule step_rule = StepRule::median_projection;
  std::size_t max_iters = 100;
  double gamma = 0.05;
  double lambda = 1.0;

  void validate() const {
    if (max_iters < 1) throw std::invalid_argument("DescentConfig: max_iters >= 1");
    if (!(gamma > 0 && gamma < 0.5))
      throw std::invalid_argument("DescentConfig: gamma must lie in (0, 1/2)");
    if (lambda < 0) throw std::invalid_argument("DescentConfig: lambda < 0");
  }
};

struct DescentResult {
  EstimatorReport report;
  CombinatorialCertificate certificate;
};

// Descent search for a combinatorial center of the bucket means. Starts at
// the coordinate-wise median. Each round scores the current point over the
// direction pair from the greedily down-weighted spectral center plus a
// cycling signed axis; a passing score (<= gamma k) returns immediately,
// otherwise the point steps along the witness direction by the median
// projection of all buckets, a scale-free step that the far buckets cannot
// hijack. Exceeding max_iters returns the best-scoring iterate, flagged.
inline DescentResult descent_center(const BucketMeans& y, const DescentConfig& cfg,
                                    RngStream& rng) {
  cfg.validate();
  if (y.k < 3) throw std::invalid_argument("descent_center: need k >= 3");
  const std::size_t k = y.k;
  const std::size_t d = y.dim();
  const Dataset yset = y.as_dataset();
  const double pass_level = cfg.gamma * static_cast<double>(k);

  Vector nu = classic::coordinate_wise_median(yset);
  DescentResult best;
  bool have_best = false;

  for (std::size_t iter = 0; iter < cfg.max_iters; ++iter) {
    // Witness directions: down-weighted top eigenvector and a probe axis.
    const filter::SpectralCertificate spectral =
        filter::certify_spectral_center(yset, nu, cfg.gamma, rng);
    Matrix weighted(d, d);
    Vector z(d);
    for (std::size_t j = 0; j < k; ++j) {
      const double w = spectral.weights[j];
      if (w == 0.0) continue;
      const auto row = y.y.row(j);
      for (std::size_t c = 0; c < d; ++c) z[c] = row[c] - nu[c];
      for (std::size_t a = 0; a < d; ++a)
        for (std::size_t b = a; b < d; ++b) weighted(a, b) += w * z[a] * z[b];
    }
    for (std::size_t a = 0; a < d; ++a)
      for (std::size_t b = a; b < d; ++b) weighted(b, a) = weighted(a, b);
    Eigenpair top;
    try {
      top = top_eigenpair(weighted, 1e-9, rng);
    } catch (const PowerIterationError& e) {
      top = e.best_iterate;
    }

    std::vector<Vector> dirs;
    dirs.push_back(top.v);
    dirs.push_back(-1.0 * top.v);
    Vector axis(d, 0.0);
    axis[iter % d] = 1.0;
    dirs.push_back(axis);
    axis[iter % d] = -1.0;
    dirs.push_back(axis);

    CombinatorialCertificate cert = combinatorial_score(y, nu, cfg.lambda, dirs);
    if (static_cast<double>(cert.score) <= pass_level) {
      DescentResult out;
      out.report.estimate = nu;
      out.report.iterations = iter + 1;
      out.report.final_top_eigenvalue = spectral.lambda;
      out.certificate = std::move(cert);
      return out;
    }
    if (!have_best || cert.score < best.certificate.score) {
      best.report.estimate = nu;
      best.report.iterations = iter + 1;
      best.report.final_top_eigenvalue = spectral.lambda;
      best.certificate = cert;
      have_best = true;
    }

    // Step along the witness by the median projection of all buckets.
    std::vector<double> projections(k);
    for (std::size_t j = 0; j < k; ++j) {
      double p = 0;
      const auto row = y.y.row(j);
      for (std::size_t c = 0; c < d; ++c) p += (row[c] - nu[c]) * cert.witness_direction[c];
      projections[j] = p;
    }
    const double step = classic::median(projections);
    for (std::size_t c = 0; c < d; ++c) nu[c] += step * cert.witness_direction[c];
  }
  best.report.warnings |= warning::kMaxIterations;
  return best;
}

// Stability-based aggregation: run the eigenvalue filter on the bucket means
// themselves, with the bounded-covariance tail model and both the variance
// and the gate rescaled by k/n (clean bucket means have per-direction
// variance at most k/n when the samples have covariance <= I). The gate is
// gate_constant * (k/n) * (1 + C gamma log(1/gamma)); any surviving far
// bucket mass contributes bias about sqrt(gamma * gate), so the gate
// constant stays small.
inline EstimatorReport stability_aggregator(const BucketMeans& y, double gamma,
                                            RngStream& rng,
                                            double gate_constant = 4.0,
                                            double threshold_constant = 9.0) {
  if (y.k < 2) throw std::invalid_argument("stability_aggregator: need k >= 2");
  const double ratio = static_cast<double>(y.k) / static_cast<double>(y.n);
  filter::FilterConfig cfg;
  cfg.eta = gamma;
  cfg.threshold_constant = threshold_constant;
  cfg.tail_model = filter::TailModel::bounded_covariance;
  cfg.variance_scale = ratio;
  cfg.gate_scale = gate_constant * ratio;
  cfg.validate();
  return filter::filter_mean(y.as_dataset(), cfg, rng);
}

enum class Aggregator { simple_median, stability, descent };

inline const char* to_string(Aggregator a) {
  switch (a) {
    case Aggregator::simple_median: return "simple_median";
    case Aggregator::stability: return "stability";
    case Aggregator::descent: return "descent";
  }
  return "?";
}

// Configuration of the combined heavy-tailed / contamination-robust
// estimator. The bucket count is k = ceil(k_constant (ln(1/beta) + eta n)),
// covering both the log(1/beta) requirement and the k = Omega(eta n)
// robustification. lambda_constant scales the centrality level:
// sqrt(lambda) = sqrt(lambda_constant) (sqrt(d/n) + sqrt(k/n)).
struct MoMConfig {
  double beta;
  double eta = 0.0;
  double k_constant = 3.0;
  double lambda_constant = 36.0;
  double gate_constant = 4.0;  // stability aggregator eigenvalue gate
  Aggregator aggregator = Aggregator::stability;

  void validate() const {
    if (!(beta > 0 && beta < 1))
      throw std::invalid_argument("MoMConfig: beta must lie in (0,1)");
    if (eta < 0 || eta >= 1) throw std::invalid_argument("MoMConfig: eta must lie in [0,1)");
    if (k_constant <= 0 || lambda_constant <= 0 || gate_constant <= 0)
      throw std::invalid_argument("MoMConfig: constants must be positive");
  }

  std::size_t bucket_count(std::size_t n) const {
    const double t =
        k_constant * (std::log(1.0 / beta) + eta * static_cast<double>(n));
    double k = std::ceil(t - 1e-9 * std::max(1.0, t));
    if (k < 1) k = 1;
    if (k > static_cast<double>(n))
      throw std::invalid_argument("beta too small or eta too large for n");
    return static_cast<std::size_t>(k);
  }
};

struct MoMReport {
  EstimatorReport report;
  std::size_t k = 0;
  CombinatorialCertificate certificate;
};

// Median-of-means mean estimator with selectable aggregation. Buckets with a
// seeded shuffle, aggregates, and attaches a post-hoc centrality certificate
// for the returned point (the descent path returns its own certificate).
inline MoMReport heavy_tailed_mean(const Dataset& x, const MoMConfig& cfg,
                                   RngStream& rng) {
  cfg.validate();
  const std::size_t n = x.n();
  const std::size_t d = x.dim();
  const std::size_t k = cfg.bucket_count(n);
  RngStream shuffle_rng = rng.substream(0);
  RngStream agg_rng = rng.substream(1);
  RngStream cert_rng = rng.substream(2);
  const BucketMeans y = bucket_means(x, k, shuffle_rng);

  const double gamma =
      std::max(0.05, cfg.eta * static_cast<double>(n) / static_cast<double>(k));
  const double rk = std::sqrt(static_cast<double>(d) / static_cast<double>(n)) +
                    std::sqrt(static_cast<double>(k) / static_cast<double>(n));
  const double lambda = cfg.lambda_constant * rk * rk;

  MoMReport out;
  out.k = k;
  switch (cfg.aggregator) {
    case Aggregator::simple_median:
      out.report.estimate = simple_median(y);
      break;
    case Aggregator::stability:
      out.report = stability_aggregator(y, gamma, agg_rng, cfg.gate_constant);
      break;
    case Aggregator::descent: {
      DescentConfig dc;
      dc.gamma = gamma;
      dc.lambda = lambda;
      DescentResult res = descent_center(y, dc, agg_rng);
      out.report = std::move(res.report);
      out.certificate = std::move(res.certificate);
      return out;
    }
  }

  // Post-hoc certificate of the returned point: exact directions for d = 1,
  // otherwise signed axes plus the top eigenvector of the centered buckets.
  std::vector<Vector> dirs;
  if (d == 1) {
    dirs = sign_directions_1d();
  } else {
    for (std::size_t j = 0; j < d; ++j) {
      Vector axis(d, 0.0);
      axis[j] = 1.0;
      dirs.push_back(axis);
      axis[j] = -1.0;
      dirs.push_back(axis);
    }
    Matrix centered(d, d);
    Vector z(d);
    for (std::size_t j = 0; j < k; ++j) {
      const auto row = y.y.row(j);
      for (std::size_t c = 0; c < d; ++c) z[c] = row[c] - out.report.estimate[c];
      for (std::size_t a = 0; a < d; ++a)
        for (std::size_t b = a; b < d; ++b) centered(a, b) += z[a] * z[b];
    }
    for (std::size_t a = 0; a < d; ++a)
      for (std::size_t b = a; b < d; ++b) {
        centered(a, b) /= static_cast<double>(k);
        centered(b, a) = centered(a, b);
      }
    try {
      const Eigenpair top = top_eigenpair(centered, 1e-9, cert_rng);
      dirs.push_back(top.v);
      dirs.push_back(-1.0 * top.v);
    } catch (const PowerIterationError& e) {
      dirs.push_back(e.best_iterate.v);
    }
  }
  out.certificate = combinatorial_score(y, out.report.estimate, lambda, dirs);
  return out;
}

}  // namespace rmlab::mom

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
#include <cstddef>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "rmlab/rng.hpp"

namespace rmlab {

using Vector = std::vector<double>;

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

inline Vector operator+(Vector a, std::span<const double> b) {
  for (std::size_t i = 0; i < a.size(); ++i) a[i] += b[i];
  return a;
}

inline Vector operator-(Vector a, std::span<const double> b) {
  for (std::size_t i = 0; i < a.size(); ++i) a[i] -= b[i];
  return a;
}

inline Vector operator*(double s, Vector a) {
  for (auto& x : a) x *= s;
  return a;
}

inline double distance(std::span<const double> a, std::span<const double> b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double t = a[i] - b[i];
    s += t * t;
  }
  return std::sqrt(s);
}

// Dense row-major matrix; doubles as the symmetric-matrix carrier throughout.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  Vector data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0)
      : rows(r), cols(c), data(r * c, fill) {}

  double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }

  std::span<const double> row(std::size_t i) const {
    return {data.data() + i * cols, cols};
  }

  static Matrix identity(std::size_t d) {
    Matrix m(d, d);
    for (std::size_t i = 0; i < d; ++i) m(i, i) = 1.0;
    return m;
  }
};

inline Vector matvec(const Matrix& m, std::span<const double> x) {
  Vector y(m.rows, 0.0);
  for (std::size_t i = 0; i < m.rows; ++i) {
    const double* row = m.data.data() + i * m.cols;
    double s = 0;
    for (std::size_t j = 0; j < m.cols; ++j) s += row[j] * x[j];
    y[i] = s;
  }
  return y;
}

inline bool is_symmetric(const Matrix& m, double rel_tol = 1e-12) {
  if (m.rows != m.cols) return false;
  double scale = 1.0;
  for (double v : m.data) scale = std::max(scale, std::abs(v));
  for (std::size_t i = 0; i < m.rows; ++i)
    for (std::size_t j = i + 1; j < m.cols; ++j)
      if (std::abs(m(i, j) - m(j, i)) > rel_tol * scale) return false;
  return true;
}

struct Eigenpair {
  double lambda = 0;
  Vector v;
  std::size_t iterations = 0;
  bool converged = false;
};

// Thrown when power iteration hits the iteration cap; carries the best
// iterate so callers that can tolerate a slack eigenpair may proceed.
class PowerIterationError : public std::runtime_error {
 public:
  PowerIterationError(std::string msg, Eigenpair best)
      : std::runtime_error(std::move(msg)), best_iterate(std::move(best)) {}
  Eigenpair best_iterate;
};

namespace detail {

// One power-iteration run on (m + shift*I); returns the Rayleigh quotient of
// m itself and stops once the residual test on m passes.
inline Eigenpair power_iterate(const Matrix& m, double tol, double shift,
                               std::size_t max_iters, RngStream& rng) {
  const std::size_t d = m.rows;
  Vector v = rng.unit_vector(d);
  Eigenpair best;
  double best_residual = std::numeric_limits<double>::infinity();
  for (std::size_t it = 1; it <= max_iters; ++it) {
    Vector w = matvec(m, v);  // w = m v; shifted vector is w + shift v
    const double lambda = dot(w, v);
    double residual2 = 0;
    for (std::size_t j = 0; j < d; ++j) {
      const double r = w[j] - lambda * v[j];
      residual2 += r * r;
    }
    const double residual = std::sqrt(residual2);
    if (residual < best_residual) {
      best_residual = residual;
      best = {lambda, v, it, false};
    }
    if (residual <= tol * std::max(1.0, std::abs(lambda))) {
      return {lambda, v, it, true};
    }
    double norm = 0;
    for (std::size_t j = 0; j < d; ++j) {
      w[j] += shift * v[j];
      norm += w[j] * w[j];
    }
    norm = std::sqrt(norm);
    if (norm == 0.0) return {0.0, v, it, true};  // m v = -shift v exactly
    for (std::size_t j = 0; j < d; ++j) v[j] = w[j] / norm;
  }
  return best;
}

}  // namespace detail

// Top eigenpair (largest eigenvalue, unit eigenvector) of a symmetric matrix
// by power iteration with random start. Guarantees on return:
//   |m v - lambda v|_2 <= tol * max(1, |lambda|),   |v|_2 = 1,
// and lambda equals the Rayleigh quotient v^T m v.
//
// A plain run converges to the dominant-magnitude eigenvalue; if that turns
// out negative the iteration is repeated with a diagonal shift so the
// algebraically largest eigenvalue wins. Throws PowerIterationError (with the
// best iterate attached) if the iteration cap, 10 d log(d/tol), is exhausted.
inline Eigenpair top_eigenpair(const Matrix& m, double tol, RngStream& rng) {
  if (tol <= 0) throw std::invalid_argument("top_eigenpair: tol must be positive");
  if (m.rows == 0 || m.rows != m.cols)
    throw std::invalid_argument("top_eigenpair: matrix must be square and nonempty");
  for (double v : m.data)
    if (!std::isfinite(v))
      throw std::invalid_argument("top_eigenpair: matrix has non-finite entries");
  if (!is_symmetric(m))
    throw std::invalid_argument("top_eigenpair: matrix is not symmetric");

  const std::size_t d = m.rows;
  const double cap_f = 10.0 * static_cast<double>(d) *
                       std::log(std::max(2.0, static_cast<double>(d) / tol));
  const std::size_t cap = std::max<std::size_t>(64, static_cast<std::size_t>(cap_f));

  Eigenpair first = detail::power_iterate(m, tol, 0.0, cap, rng);
  if (first.converged && first.lambda >= 0) return first;
  if (first.converged && first.lambda < 0) {
    // Dominant eigenvalue is negative; shift spectrum up and retry.
    const double shift = std::abs(first.lambda) * (1.0 + 1e-6) + tol;
    Eigenpair second = detail::power_iterate(m, tol, shift, cap, rng);
    if (second.converged) return second;
    throw PowerIterationError("top_eigenpair: no convergence within iteration cap",
                              second);
  }
  // Did not converge unshifted (tight spectral cluster). Retry with a
  // Gershgorin shift, which at least makes the target eigenvalue dominant.
  double gersh = 0;
  for (std::size_t i = 0; i < d; ++i) {
    double s = 0;
    for (std::size_t j = 0; j < d; ++j) s += std::abs(m(i, j));
    gersh = std::max(gersh, s);
  }
  Eigenpair second = detail::power_iterate(m, tol, gersh, cap, rng);
  if (second.converged) return second;
  const Eigenpair& best =
      second.lambda >= first.lambda ? second : first;
  throw PowerIterationError("top_eigenpair: no convergence within iteration cap",
                            best);
}

// All eigenvalues of a small symmetric matrix by cyclic Jacobi rotations.
// Intended for the brute-force oracles (d up to ~20), not for bulk use.
inline Vector jacobi_eigenvalues(Matrix a, std::size_t max_sweeps = 100) {
  if (a.rows != a.cols) throw std::invalid_argument("jacobi: matrix must be square");
  const std::size_t d = a.rows;
  for (std::size_t sweep = 0; sweep < max_sweeps; ++sweep) {
    double off = 0;
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = i + 1; j < d; ++j) off += a(i, j) * a(i, j);
    if (off < 1e-26 * static_cast<double>(d * d)) break;
    for (std::size_t p = 0; p < d; ++p) {
      for (std::size_t q = p + 1; q < d; ++q) {
        if (a(p, q) == 0.0) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * a(p, q));
        const double t = (theta >= 0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (std::size_t k = 0; k < d; ++k) {
          const double akp = a(k, p);
          const double akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < d; ++k) {
          const double apk = a(p, k);
          const double aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
      }
    }
  }
  Vector eig(d);
  for (std::size_t i = 0; i < d; ++i) eig[i] = a(i, i);
  std::sort(eig.begin(), eig.end());
  return eig;
}

// Spectral norm (largest absolute eigenvalue) of a small symmetric matrix.
inline double spectral_norm_small(const Matrix& a) {
  const Vector eig = jacobi_eigenvalues(a);
  return std::max(std::abs(eig.front()), std::abs(eig.back()));
}

}  // namespace rmlab

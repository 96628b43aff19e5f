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

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

namespace rmlab {

// Seeded, stream-splittable random source. A stream is identified by
// (master_seed, stream_id); the same pair always reproduces the same byte
// sequence regardless of platform, and distinct stream_ids give streams that
// are independent for all practical purposes. All randomized operations in
// the library draw from an explicitly passed RngStream, never from global
// state.
//
// The generator is xoshiro256++ with splitmix64 seeding.
class RngStream {
 public:
  RngStream(std::uint64_t master_seed, std::uint64_t stream_id = 0)
      : master_seed_(master_seed), stream_id_(stream_id) {
    std::uint64_t z = master_seed ^ mix64(stream_id + 0x632be59bd9b4e019ULL);
    for (auto& word : state_) word = splitmix64(z);
    if ((state_[0] | state_[1] | state_[2] | state_[3]) == 0) state_[0] = 1;
  }

  std::uint64_t master_seed() const { return master_seed_; }
  std::uint64_t stream_id() const { return stream_id_; }

  // Derived stream for an independent sub-task (per-trial data vs. noise,
  // etc.). Deterministic in (this stream, index).
  RngStream substream(std::uint64_t index) const {
    return RngStream(master_seed_,
                     mix64(stream_id_ * 0x9e3779b97f4a7c15ULL ^ (index + 1)));
  }

  std::uint64_t next_u64() {
    const std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  // Uniform on [0, 1) with 53 random bits.
  double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform on (0, 1), never exactly 0 or 1 (safe under log).
  double uniform_open01() {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
  }

  // Unbiased integer in [0, n).
  std::uint64_t uniform_below(std::uint64_t n) {
    if (n == 0) throw std::invalid_argument("uniform_below: n must be positive");
    const std::uint64_t threshold = (0 - n) % n;
    for (;;) {
      const std::uint64_t r = next_u64();
      if (r >= threshold) return r % n;
    }
  }

  // Standard normal via Box-Muller; the second variate of each pair is cached.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = uniform_open01();
    const double u2 = uniform01();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * kPi * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  // Zero-mean Laplace with scale b (density exp(-|x|/b) / 2b).
  double laplace(double b) {
    const double u = uniform_open01() - 0.5;
    return u < 0 ? b * std::log1p(2.0 * u) : -b * std::log1p(-2.0 * u);
  }

  // Gamma(shape, scale) by Marsaglia-Tsang; shape may be any positive value.
  double gamma(double shape, double scale) {
    if (shape <= 0 || scale <= 0)
      throw std::invalid_argument("gamma: shape and scale must be positive");
    if (shape < 1.0) {
      const double u = uniform_open01();
      return gamma(shape + 1.0, scale) * std::pow(u, 1.0 / shape);
    }
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
      double x;
      double v;
      do {
        x = normal();
        v = 1.0 + c * x;
      } while (v <= 0.0);
      v = v * v * v;
      const double u = uniform_open01();
      if (u < 1.0 - 0.0331 * x * x * x * x) return scale * d * v;
      if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return scale * d * v;
    }
  }

  // Student-t with dof degrees of freedom (raw, variance dof/(dof-2)).
  double student_t(double dof) {
    if (dof <= 0) throw std::invalid_argument("student_t: dof must be positive");
    const double z = normal();
    const double chi2 = gamma(0.5 * dof, 2.0);
    return z * std::sqrt(dof / chi2);
  }

  // Uniform direction on the unit sphere in dimension d.
  std::vector<double> unit_vector(std::size_t d) {
    if (d == 0) throw std::invalid_argument("unit_vector: d must be positive");
    std::vector<double> v(d);
    for (;;) {
      double norm2 = 0;
      for (auto& x : v) {
        x = normal();
        norm2 += x * x;
      }
      if (norm2 > 1e-24) {
        const double inv = 1.0 / std::sqrt(norm2);
        for (auto& x : v) x *= inv;
        return v;
      }
    }
  }

  // In-place Fisher-Yates shuffle.
  template <typename T>
  void shuffle(std::vector<T>& items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(uniform_below(i));
      std::swap(items[i - 1], items[j]);
    }
  }

 private:
  static constexpr double kPi = 3.14159265358979323846;

  static std::uint64_t rotl(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
  }

  static std::uint64_t splitmix64(std::uint64_t& z) {
    z += 0x9e3779b97f4a7c15ULL;
    std::uint64_t x = z;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
  }

  static std::uint64_t mix64(std::uint64_t x) {
    x = (x ^ (x >> 33)) * 0xff51afd7ed558ccdULL;
    x = (x ^ (x >> 33)) * 0xc4ceb9fe1a85ec53ULL;
    return x ^ (x >> 33);
  }

  std::uint64_t master_seed_;
  std::uint64_t stream_id_;
  std::uint64_t state_[4];
  double spare_ = 0;
  bool has_spare_ = false;
};

}  // namespace rmlab

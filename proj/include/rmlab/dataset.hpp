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
#include <cstring>
#include <fstream>
#include <iomanip>
#include <istream>
#include <ostream>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "rmlab/linalg.hpp"

namespace rmlab {

// n samples in R^d, immutable after construction. Every entry must be finite;
// n >= 1 and d >= 1 are enforced at construction, so downstream code never
// sees an empty or ragged dataset.
class Dataset {
 public:
  Dataset(std::size_t n, std::size_t d, Vector row_major)
      : n_(n), d_(d), data_(std::move(row_major)) {
    if (n_ == 0 || d_ == 0) throw std::invalid_argument("Dataset: empty input");
    if (data_.size() != n_ * d_)
      throw std::invalid_argument("Dataset: data size does not match n*d");
    for (double v : data_)
      if (!std::isfinite(v))
        throw std::invalid_argument("Dataset: entries must be finite");
  }

  static Dataset from_rows(const std::vector<Vector>& rows) {
    if (rows.empty()) throw std::invalid_argument("Dataset: empty input");
    const std::size_t d = rows.front().size();
    Vector data;
    data.reserve(rows.size() * d);
    for (const auto& r : rows) {
      if (r.size() != d)
        throw std::invalid_argument("Dataset: rows must share one dimension");
      data.insert(data.end(), r.begin(), r.end());
    }
    return Dataset(rows.size(), d, std::move(data));
  }

  std::size_t n() const { return n_; }
  std::size_t dim() const { return d_; }

  std::span<const double> row(std::size_t i) const {
    return {data_.data() + i * d_, d_};
  }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * d_ + j]; }
  const Vector& raw() const { return data_; }

  // Mutable copy of the storage, for code that builds a modified dataset.
  Vector copy_raw() const { return data_; }

 private:
  std::size_t n_;
  std::size_t d_;
  Vector data_;
};

// Coordinatewise average of the rows.
inline Vector empirical_mean(const Dataset& x) {
  if (x.n() == 0) throw std::invalid_argument("empirical_mean: empty input");
  Vector mean(x.dim(), 0.0);
  for (std::size_t i = 0; i < x.n(); ++i) {
    const auto row = x.row(i);
    for (std::size_t j = 0; j < x.dim(); ++j) mean[j] += row[j];
  }
  const double inv = 1.0 / static_cast<double>(x.n());
  for (auto& v : mean) v *= inv;
  return mean;
}

// Centered second-moment matrix with the population convention (divide by n).
// Symmetric positive semidefinite by construction.
inline Matrix empirical_covariance(const Dataset& x) {
  if (x.n() == 0) throw std::invalid_argument("empirical_covariance: empty input");
  const std::size_t d = x.dim();
  const Vector mean = empirical_mean(x);
  Matrix cov(d, d);
  Vector centered(d);
  for (std::size_t i = 0; i < x.n(); ++i) {
    const auto row = x.row(i);
    for (std::size_t j = 0; j < d; ++j) centered[j] = row[j] - mean[j];
    for (std::size_t j = 0; j < d; ++j) {
      const double cj = centered[j];
      double* out = cov.data.data() + j * d;
      for (std::size_t l = j; l < d; ++l) out[l] += cj * centered[l];
    }
  }
  const double inv = 1.0 / static_cast<double>(x.n());
  for (std::size_t j = 0; j < d; ++j)
    for (std::size_t l = j; l < d; ++l) {
      cov(j, l) *= inv;
      cov(l, j) = cov(j, l);
    }
  return cov;
}

// --- Dataset files -----------------------------------------------------
//
// CSV: one sample per line, d comma-separated decimal floats, no header.
// Binary ("RMD1"): 4-byte magic, u32-le n, u32-le d, then n*d little-endian
// IEEE f64 in row-major order.

namespace io {

inline constexpr char kMagic[4] = {'R', 'M', 'D', '1'};

inline void write_csv(std::ostream& out, const Dataset& x) {
  out << std::setprecision(17);
  for (std::size_t i = 0; i < x.n(); ++i) {
    const auto row = x.row(i);
    for (std::size_t j = 0; j < x.dim(); ++j) {
      if (j) out << ',';
      out << row[j];
    }
    out << '\n';
  }
}

inline Dataset read_csv(std::istream& in) {
  std::vector<Vector> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    Vector row;
    std::size_t pos = 0;
    while (pos <= line.size()) {
      std::size_t comma = line.find(',', pos);
      if (comma == std::string::npos) comma = line.size();
      const std::string cell = line.substr(pos, comma - pos);
      std::size_t used = 0;
      double v;
      try {
        v = std::stod(cell, &used);
      } catch (const std::exception&) {
        throw std::invalid_argument("dataset csv: bad number '" + cell + "'");
      }
      row.push_back(v);
      pos = comma + 1;
      if (comma == line.size()) break;
    }
    rows.push_back(std::move(row));
  }
  return Dataset::from_rows(rows);
}

inline void put_u32le(std::ostream& out, std::uint32_t v) {
  char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  out.write(b, 4);
}

inline std::uint32_t get_u32le(std::istream& in) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  if (!in) throw std::invalid_argument("dataset binary: truncated header");
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) |
         (static_cast<std::uint32_t>(b[3]) << 24);
}

inline void write_binary(std::ostream& out, const Dataset& x) {
  out.write(kMagic, 4);
  put_u32le(out, static_cast<std::uint32_t>(x.n()));
  put_u32le(out, static_cast<std::uint32_t>(x.dim()));
  for (double v : x.raw()) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((bits >> (8 * i)) & 0xff);
    out.write(b, 8);
  }
}

inline Dataset read_binary(std::istream& in) {
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0)
    throw std::invalid_argument("dataset binary: bad magic");
  const std::uint32_t n = get_u32le(in);
  const std::uint32_t d = get_u32le(in);
  Vector data(static_cast<std::size_t>(n) * d);
  for (auto& v : data) {
    unsigned char b[8];
    in.read(reinterpret_cast<char*>(b), 8);
    if (!in) throw std::invalid_argument("dataset binary: truncated payload");
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    double x;
    std::memcpy(&x, &bits, 8);
    v = x;
  }
  return Dataset(n, d, std::move(data));
}

// Saves by extension: ".rmd" binary, anything else CSV.
inline void save_dataset(const Dataset& x, const std::string& path) {
  const bool binary = path.size() >= 4 && path.substr(path.size() - 4) == ".rmd";
  std::ofstream out(path, binary ? std::ios::binary : std::ios::out);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  if (binary)
    write_binary(out, x);
  else
    write_csv(out, x);
}

// Loads either format, sniffing the binary magic.
inline Dataset load_dataset(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open for reading: " + path);
  char magic[4] = {0, 0, 0, 0};
  in.read(magic, 4);
  in.clear();
  in.seekg(0);
  if (std::memcmp(magic, kMagic, 4) == 0) return read_binary(in);
  return read_csv(in);
}

}  // namespace io
}  // namespace rmlab

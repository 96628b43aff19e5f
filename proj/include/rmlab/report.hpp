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

#include <cstdint>
#include <string>
#include <vector>

namespace rmlab {

// Warning flags carried by EstimatorReport. An estimator that cannot meet its
// normal termination conditions still returns a usable estimate, flagged.
namespace warning {
inline constexpr std::uint32_t kNone = 0;
inline constexpr std::uint32_t kMaxIterations = 1u << 0;   // iteration budget hit
inline constexpr std::uint32_t kRemovalCap = 1u << 1;      // filter removal cap hit
inline constexpr std::uint32_t kEigenSolverSlack = 1u << 2;  // eigenpair past cap, best used
}  // namespace warning

inline std::string warnings_to_string(std::uint32_t w) {
  if (w == warning::kNone) return "";
  std::string s;
  auto append = [&s](const char* name) {
    if (!s.empty()) s += '|';
    s += name;
  };
  if (w & warning::kMaxIterations) append("max_iterations");
  if (w & warning::kRemovalCap) append("removal_cap");
  if (w & warning::kEigenSolverSlack) append("eigen_solver_slack");
  return s;
}

// Estimate plus diagnostics, shared by every estimator in the library.
// removed_indices is populated by filtering estimators (indices into whatever
// the estimator treated as its dataset: sample rows, or bucket means for the
// median-of-means aggregators). final_top_eigenvalue is meaningful for the
// spectral estimators and zero otherwise.
struct EstimatorReport {
  std::vector<double> estimate;
  std::size_t iterations = 0;
  std::vector<std::size_t> removed_indices;
  double final_top_eigenvalue = 0.0;
  std::uint32_t warnings = warning::kNone;

  bool has_warning(std::uint32_t flag) const { return (warnings & flag) != 0; }
};

}  // namespace rmlab

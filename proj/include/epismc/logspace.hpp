// Copyright 2026 The epi-smc Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef EPISMC_LOGSPACE_HPP
#define EPISMC_LOGSPACE_HPP

#include <cmath>
#include <limits>
#include <span>
#include <vector>

#include "epismc/simd/kernels.hpp"

namespace epismc {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

/// log sum_k exp(values[k]); -inf when every value is -inf or the span is empty.
[[nodiscard]] inline double log_sum_exp(std::span<const double> values) {
  const double peak = simd::max_value(values);
  if (peak == kNegInf) return kNegInf;
  if (peak == std::numeric_limits<double>::infinity()) return peak;
  double total = 0.0;
  for (const double value : values) total += std::exp(value - peak);
  return peak + std::log(total);
}

/// Normalized probabilities exp(values - log_sum_exp(values)); all zero when degenerate.
[[nodiscard]] inline std::vector<double> normalize_log(std::span<const double> values) {
  const double total = log_sum_exp(values);
  std::vector<double> out(values.size(), 0.0);
  if (total == kNegInf || !std::isfinite(total)) return out;
  for (std::size_t k = 0; k < values.size(); ++k) out[k] = std::exp(values[k] - total);
  return out;
}

}  // namespace epismc

#endif

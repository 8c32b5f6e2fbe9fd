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

#include <cmath>
#include <limits>

#include "epismc/simd/kernels.hpp"

namespace epismc::simd::scalar {

void weighted_row_sums(std::size_t m, std::span<const double> rows, std::span<const double> weights,
                       std::span<double> masses, std::span<double> totals) {
  const std::size_t n = totals.size();
  for (std::size_t r = 0; r < n; ++r) {
    double total = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
      const double value = rows[r * m + j] * weights[r * m + j];
      masses[r * m + j] = value;
      total += value;
    }
    totals[r] = total;
  }
}

void batched_matvec(std::size_t m, std::span<const double> kernels, std::span<const double> v,
                    std::span<double> out) {
  const std::size_t n = m == 0 ? 0 : out.size() / m;
  for (std::size_t r = 0; r < n; ++r) {
    const double* vec = v.data() + r * m;
    for (std::size_t i = 0; i < m; ++i) {
      const double* row = kernels.data() + (r * m + i) * m;
      double total = 0.0;
      for (std::size_t j = 0; j < m; ++j) total += row[j] * vec[j];
      out[r * m + i] = total;
    }
  }
}

double sum_log(std::span<const double> values) {
  double total = 0.0;
  for (const double value : values) {
    if (value == 0.0) return -std::numeric_limits<double>::infinity();
    total += std::log(value);
  }
  return total;
}

double max_value(std::span<const double> values) {
  double best = -std::numeric_limits<double>::infinity();
  for (const double value : values) best = value > best ? value : best;
  return best;
}

double sum_squares(std::span<const double> values) {
  double total = 0.0;
  for (const double value : values) total += value * value;
  return total;
}

}  // namespace epismc::simd::scalar

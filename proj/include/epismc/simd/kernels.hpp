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

#ifndef EPISMC_SIMD_KERNELS_HPP
#define EPISMC_SIMD_KERNELS_HPP

#include <cstddef>
#include <span>
#include <string_view>

/**
 * \file
 * \brief Data-parallel inner loops of the particle filter.
 *
 * Every kernel has a scalar reference implementation and, on x86-64, an AVX2
 * variant. The active variant is chosen once at startup from the CPU features
 * (override with the environment variable EPISMC_SIMD=scalar|avx2) and can be
 * switched with set_isa() for equivalence testing.
 *
 * Layouts are row-major: `m` is the compartment count, a "row table" holds
 * n x m values and a "kernel table" holds n x m x m values.
 */

namespace epismc::simd {

enum class Isa { kScalar, kAvx2 };

[[nodiscard]] std::string_view isa_name(Isa isa) noexcept;
[[nodiscard]] bool isa_supported(Isa isa) noexcept;
[[nodiscard]] Isa active_isa() noexcept;
/// Returns false (and leaves the selection unchanged) when `isa` is unsupported.
bool set_isa(Isa isa) noexcept;

/// masses[k] = rows[k] * weights[k]; totals[n] = sum_j masses[n*m + j], summed left to right.
void weighted_row_sums(std::size_t m, std::span<const double> rows, std::span<const double> weights,
                       std::span<double> masses, std::span<double> totals);

/// out[n*m + i] = sum_j kernels[(n*m + i)*m + j] * v[n*m + j], summed left to right.
void batched_matvec(std::size_t m, std::span<const double> kernels, std::span<const double> v,
                    std::span<double> out);

/// sum_k log(values[k]); -inf when any value is zero. Values must be nonnegative.
[[nodiscard]] double sum_log(std::span<const double> values);

/// Largest element, -inf for an empty span.
[[nodiscard]] double max_value(std::span<const double> values);

[[nodiscard]] double sum_squares(std::span<const double> values);

namespace scalar {
void weighted_row_sums(std::size_t m, std::span<const double> rows, std::span<const double> weights,
                       std::span<double> masses, std::span<double> totals);
void batched_matvec(std::size_t m, std::span<const double> kernels, std::span<const double> v,
                    std::span<double> out);
double sum_log(std::span<const double> values);
double max_value(std::span<const double> values);
double sum_squares(std::span<const double> values);
}  // namespace scalar

namespace avx2 {
void weighted_row_sums(std::size_t m, std::span<const double> rows, std::span<const double> weights,
                       std::span<double> masses, std::span<double> totals);
void batched_matvec(std::size_t m, std::span<const double> kernels, std::span<const double> v,
                    std::span<double> out);
double sum_log(std::span<const double> values);
double max_value(std::span<const double> values);
double sum_squares(std::span<const double> values);
}  // namespace avx2

}  // namespace epismc::simd

#endif

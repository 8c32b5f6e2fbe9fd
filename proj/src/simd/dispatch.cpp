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

#include <atomic>
#include <cstdlib>
#include <string_view>

#include "epismc/simd/kernels.hpp"

namespace epismc::simd {

namespace {

Isa detect() noexcept {
  if (const char* forced = std::getenv("EPISMC_SIMD")) {
    const std::string_view name{forced};
    if (name == "scalar") return Isa::kScalar;
    if (name == "avx2" && isa_supported(Isa::kAvx2)) return Isa::kAvx2;
  }
  return isa_supported(Isa::kAvx2) ? Isa::kAvx2 : Isa::kScalar;
}

std::atomic<Isa>& selected() noexcept {
  static std::atomic<Isa> isa{detect()};
  return isa;
}

[[maybe_unused]] bool use_avx2() noexcept { return selected().load(std::memory_order_relaxed) == Isa::kAvx2; }

}  // namespace

std::string_view isa_name(Isa isa) noexcept { return isa == Isa::kAvx2 ? "avx2" : "scalar"; }

bool isa_supported(Isa isa) noexcept {
  if (isa == Isa::kScalar) return true;
#if defined(EPISMC_HAVE_AVX2)
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

Isa active_isa() noexcept { return selected().load(std::memory_order_relaxed); }

bool set_isa(Isa isa) noexcept {
  if (!isa_supported(isa)) return false;
  selected().store(isa, std::memory_order_relaxed);
  return true;
}

#if defined(EPISMC_HAVE_AVX2)
#define EPISMC_DISPATCH(call) return use_avx2() ? avx2::call : scalar::call
#else
#define EPISMC_DISPATCH(call) return scalar::call
#endif

void weighted_row_sums(std::size_t m, std::span<const double> rows, std::span<const double> weights,
                       std::span<double> masses, std::span<double> totals) {
  EPISMC_DISPATCH(weighted_row_sums(m, rows, weights, masses, totals));
}

void batched_matvec(std::size_t m, std::span<const double> kernels, std::span<const double> v,
                    std::span<double> out) {
  EPISMC_DISPATCH(batched_matvec(m, kernels, v, out));
}

double sum_log(std::span<const double> values) { EPISMC_DISPATCH(sum_log(values)); }

double max_value(std::span<const double> values) { EPISMC_DISPATCH(max_value(values)); }

double sum_squares(std::span<const double> values) { EPISMC_DISPATCH(sum_squares(values)); }

#undef EPISMC_DISPATCH

}  // namespace epismc::simd

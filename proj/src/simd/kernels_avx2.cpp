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

#include <immintrin.h>

#include <cfloat>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>

#include "epismc/simd/kernels.hpp"

namespace epismc::simd::avx2 {

namespace {

// Row sums of four 4-wide rows, each summed ((a + b) + c) + d like the scalar loop.
inline __m256d transpose_sum4(__m256d p0, __m256d p1, __m256d p2, __m256d p3) {
  const __m256d t0 = _mm256_unpacklo_pd(p0, p1);
  const __m256d t1 = _mm256_unpackhi_pd(p0, p1);
  const __m256d t2 = _mm256_unpacklo_pd(p2, p3);
  const __m256d t3 = _mm256_unpackhi_pd(p2, p3);
  const __m256d col_a = _mm256_permute2f128_pd(t0, t2, 0x20);
  const __m256d col_b = _mm256_permute2f128_pd(t1, t3, 0x20);
  const __m256d col_c = _mm256_permute2f128_pd(t0, t2, 0x31);
  const __m256d col_d = _mm256_permute2f128_pd(t1, t3, 0x31);
  return _mm256_add_pd(_mm256_add_pd(_mm256_add_pd(col_a, col_b), col_c), col_d);
}

// Pairwise sums of two 2x2 blocks, reordered to [p0_0+p0_1, p0_2+p0_3, p1_0+p1_1, p1_2+p1_3].
inline __m256d pair_sums(__m256d p0, __m256d p1) {
  return _mm256_permute4x64_pd(_mm256_hadd_pd(p0, p1), 0b11'01'10'00);
}

inline double horizontal_sum(__m256d v) {
  alignas(32) double lanes[4];
  _mm256_store_pd(lanes, v);
  return (lanes[0] + lanes[1]) + (lanes[2] + lanes[3]);
}

// Functions rather than namespace-scope constants: static initializers in this
// translation unit would execute AVX instructions before dispatch.
inline __m256i mantissa_mask() { return _mm256_set1_epi64x(0x000FFFFFFFFFFFFFLL); }
inline __m256i one_bits() { return _mm256_set1_epi64x(0x3FF0000000000000LL); }
inline __m256i exponent_bias() { return _mm256_set1_epi64x(1023); }

// Moves the binary exponent of every lane of `acc` into `exponents`, leaving mantissas in [1, 2).
inline void renormalize(__m256d& acc, __m256i& exponents) {
  const __m256i bits = _mm256_castpd_si256(acc);
  exponents = _mm256_add_epi64(exponents, _mm256_sub_epi64(_mm256_srli_epi64(bits, 52), exponent_bias()));
  acc = _mm256_castsi256_pd(_mm256_or_si256(_mm256_and_si256(bits, mantissa_mask()), one_bits()));
}

}  // namespace

void weighted_row_sums(std::size_t m, std::span<const double> rows, std::span<const double> weights,
                       std::span<double> masses, std::span<double> totals) {
  const std::size_t n = totals.size();
  const double* a = rows.data();
  const double* b = weights.data();
  double* out = masses.data();
  std::size_t r = 0;
  if (m == 2) {
    for (; r + 4 <= n; r += 4) {
      const std::size_t k = r * 2;
      const __m256d p0 = _mm256_mul_pd(_mm256_loadu_pd(a + k), _mm256_loadu_pd(b + k));
      const __m256d p1 = _mm256_mul_pd(_mm256_loadu_pd(a + k + 4), _mm256_loadu_pd(b + k + 4));
      _mm256_storeu_pd(out + k, p0);
      _mm256_storeu_pd(out + k + 4, p1);
      _mm256_storeu_pd(totals.data() + r, pair_sums(p0, p1));
    }
  } else if (m == 4) {
    for (; r + 4 <= n; r += 4) {
      const std::size_t k = r * 4;
      const __m256d p0 = _mm256_mul_pd(_mm256_loadu_pd(a + k), _mm256_loadu_pd(b + k));
      const __m256d p1 = _mm256_mul_pd(_mm256_loadu_pd(a + k + 4), _mm256_loadu_pd(b + k + 4));
      const __m256d p2 = _mm256_mul_pd(_mm256_loadu_pd(a + k + 8), _mm256_loadu_pd(b + k + 8));
      const __m256d p3 = _mm256_mul_pd(_mm256_loadu_pd(a + k + 12), _mm256_loadu_pd(b + k + 12));
      _mm256_storeu_pd(out + k, p0);
      _mm256_storeu_pd(out + k + 4, p1);
      _mm256_storeu_pd(out + k + 8, p2);
      _mm256_storeu_pd(out + k + 12, p3);
      _mm256_storeu_pd(totals.data() + r, transpose_sum4(p0, p1, p2, p3));
    }
  }
  if (r < n) {
    scalar::weighted_row_sums(m, rows.subspan(r * m), weights.subspan(r * m), masses.subspan(r * m),
                              totals.subspan(r));
  }
}

void batched_matvec(std::size_t m, std::span<const double> kernels, std::span<const double> v,
                    std::span<double> out) {
  const std::size_t n = m == 0 ? 0 : out.size() / m;
  const double* k = kernels.data();
  const double* x = v.data();
  double* y = out.data();
  std::size_t r = 0;
  if (m == 2) {
    for (; r + 2 <= n; r += 2) {
      const __m256d v0 = _mm256_broadcast_pd(reinterpret_cast<const __m128d*>(x + r * 2));
      const __m256d v1 = _mm256_broadcast_pd(reinterpret_cast<const __m128d*>(x + r * 2 + 2));
      const __m256d p0 = _mm256_mul_pd(_mm256_loadu_pd(k + r * 4), v0);
      const __m256d p1 = _mm256_mul_pd(_mm256_loadu_pd(k + r * 4 + 4), v1);
      _mm256_storeu_pd(y + r * 2, pair_sums(p0, p1));
    }
  } else if (m == 4) {
    for (; r < n; ++r) {
      const __m256d vec = _mm256_loadu_pd(x + r * 4);
      const double* base = k + r * 16;
      const __m256d p0 = _mm256_mul_pd(_mm256_loadu_pd(base), vec);
      const __m256d p1 = _mm256_mul_pd(_mm256_loadu_pd(base + 4), vec);
      const __m256d p2 = _mm256_mul_pd(_mm256_loadu_pd(base + 8), vec);
      const __m256d p3 = _mm256_mul_pd(_mm256_loadu_pd(base + 12), vec);
      _mm256_storeu_pd(y + r * 4, transpose_sum4(p0, p1, p2, p3));
    }
  }
  if (r < n) {
    scalar::batched_matvec(m, kernels.subspan(r * m * m), v.subspan(r * m), out.subspan(r * m));
  }
}

double sum_log(std::span<const double> values) {
  const std::size_t n = values.size();
  const double* data = values.data();
  const __m256d min_normal = _mm256_set1_pd(DBL_MIN);
  const __m256d max_finite = _mm256_set1_pd(DBL_MAX);
  __m256d acc = _mm256_set1_pd(1.0);
  __m256i exponents = _mm256_setzero_si256();
  double irregular = 0.0;
  int pending = 0;
  std::size_t k = 0;
  for (; k + 4 <= n; k += 4) {
    const __m256d v = _mm256_loadu_pd(data + k);
    const __m256d normal =
        _mm256_and_pd(_mm256_cmp_pd(v, min_normal, _CMP_GE_OQ), _mm256_cmp_pd(v, max_finite, _CMP_LE_OQ));
    if (_mm256_movemask_pd(normal) != 0xF) {
      // zero, subnormal, infinite or NaN lanes take the scalar path
      for (std::size_t j = k; j < k + 4; ++j) {
        if (data[j] == 0.0) return -std::numeric_limits<double>::infinity();
        irregular += std::log(data[j]);
      }
      continue;
    }
    const __m256i bits = _mm256_castpd_si256(v);
    exponents = _mm256_add_epi64(exponents, _mm256_sub_epi64(_mm256_srli_epi64(bits, 52), exponent_bias()));
    acc = _mm256_mul_pd(acc, _mm256_castsi256_pd(_mm256_or_si256(_mm256_and_si256(bits, mantissa_mask()), one_bits())));
    if (++pending == 512) {
      renormalize(acc, exponents);
      pending = 0;
    }
  }
  renormalize(acc, exponents);
  alignas(32) double mantissas[4];
  alignas(32) std::int64_t exps[4];
  _mm256_store_pd(mantissas, acc);
  _mm256_store_si256(reinterpret_cast<__m256i*>(exps), exponents);
  const std::int64_t exponent_total = exps[0] + exps[1] + exps[2] + exps[3];
  double total = irregular + static_cast<double>(exponent_total) * std::numbers::ln2;
  total += std::log(mantissas[0] * mantissas[1]) + std::log(mantissas[2] * mantissas[3]);
  for (; k < n; ++k) {
    if (data[k] == 0.0) return -std::numeric_limits<double>::infinity();
    total += std::log(data[k]);
  }
  return total;
}

double max_value(std::span<const double> values) {
  const std::size_t n = values.size();
  __m256d best = _mm256_set1_pd(-std::numeric_limits<double>::infinity());
  std::size_t k = 0;
  for (; k + 4 <= n; k += 4) best = _mm256_max_pd(best, _mm256_loadu_pd(values.data() + k));
  alignas(32) double lanes[4];
  _mm256_store_pd(lanes, best);
  double result = lanes[0];
  for (int j = 1; j < 4; ++j) result = lanes[j] > result ? lanes[j] : result;
  for (; k < n; ++k) result = values[k] > result ? values[k] : result;
  return result;
}

double sum_squares(std::span<const double> values) {
  const std::size_t n = values.size();
  __m256d acc = _mm256_setzero_pd();
  std::size_t k = 0;
  for (; k + 4 <= n; k += 4) {
    const __m256d v = _mm256_loadu_pd(values.data() + k);
    acc = _mm256_add_pd(acc, _mm256_mul_pd(v, v));
  }
  double total = horizontal_sum(acc);
  for (; k < n; ++k) total += values[k] * values[k];
  return total;
}

}  // namespace epismc::simd::avx2

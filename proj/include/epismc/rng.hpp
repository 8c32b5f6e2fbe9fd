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

#ifndef EPISMC_RNG_HPP
#define EPISMC_RNG_HPP

#include <array>
#include <cstdint>
#include <limits>

namespace epismc {

/// SplitMix64 finalizer; used to derive independent stream keys.
[[nodiscard]] std::uint64_t mix64(std::uint64_t x) noexcept;

/// Hashes a master seed with up to two stream coordinates (e.g. step and particle).
[[nodiscard]] std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0) noexcept;

/// xoshiro256** generator. Satisfies UniformRandomBitGenerator.
///
/// Streams are addressed by coordinates rather than advanced sequentially, so
/// per-particle draws do not depend on how particles are scheduled over workers.
class Rng {
 public:
  using result_type = std::uint64_t;

  explicit Rng(std::uint64_t seed = 0) noexcept;

  /// Independent stream for coordinates (a, b) under a master seed.
  [[nodiscard]] static Rng stream(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0) noexcept {
    return Rng{derive_seed(seed, a, b)};
  }

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

  result_type operator()() noexcept;

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform() noexcept { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

  /// Standard normal draw (polar Box-Muller, platform independent).
  double normal() noexcept;

 private:
  std::array<std::uint64_t, 4> state_{};
  double spare_normal_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace epismc

#endif

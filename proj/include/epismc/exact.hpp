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

#ifndef EPISMC_EXACT_HPP
#define EPISMC_EXACT_HPP

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "epismc/matrix.hpp"
#include "epismc/model.hpp"
#include "epismc/observe.hpp"

// Brute-force inference over the joint state space [0, M^N) for tiny populations.
// Joint transitions are applied per count class as a product of per-individual
// kernels, so no M^N x M^N matrix is formed.

namespace epismc {

inline constexpr std::size_t kDefaultStateCap = 1'000'000;

/// Mixed-radix encoding of population states; individual 0 is the least significant digit.
class JointStateIndex {
 public:
  /// Throws StateSpaceTooLarge when M^N exceeds `cap`.
  JointStateIndex(std::size_t population, std::size_t compartments, std::size_t cap = kDefaultStateCap);

  [[nodiscard]] std::size_t population() const noexcept { return population_; }
  [[nodiscard]] std::size_t compartments() const noexcept { return compartments_; }
  [[nodiscard]] std::size_t size() const noexcept { return size_; }

  [[nodiscard]] std::size_t encode(std::span<const Compartment> x) const;
  void decode(std::size_t index, std::span<Compartment> out) const;
  [[nodiscard]] PopulationState decode(std::size_t index) const;

 private:
  std::size_t population_;
  std::size_t compartments_;
  std::size_t size_;
};

struct ExactFilter {
  double log_likelihood = 0.0;
  /// log p(y_s | y_{1:s-1}) for s = 1..t.
  std::vector<double> log_normalizers;
  /// p(x_s | y_{1:s}) over joint states for s = 0..t; zero vectors after an impossible step.
  std::vector<std::vector<double>> filtering;
  /// First step at which the data have probability zero.
  std::optional<std::size_t> impossible_step;
};

/// Forward algorithm. Throws StateSpaceTooLarge.
[[nodiscard]] ExactFilter exact_forward(const ModelSpec& spec, const ObservationMatrix& y, const ReportingRates& q,
                                        std::size_t cap = kDefaultStateCap);

/// p(x_s | x_{s-1}, y_{s..s+window}) over joint states, for 1 <= s and s + window <= t.
/// Throws StateSpaceTooLarge, std::out_of_range, or std::domain_error when the window has
/// probability zero given x_{s-1}.
[[nodiscard]] std::vector<double> exact_optimal_proposal(const ModelSpec& spec, const ObservationMatrix& y,
                                                         const ReportingRates& q, std::span<const Compartment> x_prev,
                                                         std::size_t s, std::size_t window,
                                                         std::size_t cap = kDefaultStateCap);

/// Expected compartment counts under a joint distribution (length M).
[[nodiscard]] std::vector<double> count_means(const JointStateIndex& index, std::span<const double> distribution);

/// Per-individual marginals under a joint distribution (N x M).
[[nodiscard]] Matrix<double> individual_marginals(const JointStateIndex& index, std::span<const double> distribution);

/// (t + 1) x M filtering means of c_s.
[[nodiscard]] Matrix<double> filtering_count_means(const JointStateIndex& index, const ExactFilter& filter);

}  // namespace epismc

#endif

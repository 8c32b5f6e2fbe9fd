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

#ifndef EPISMC_OBSERVE_HPP
#define EPISMC_OBSERVE_HPP

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "epismc/matrix.hpp"
#include "epismc/model.hpp"
#include "epismc/rng.hpp"

namespace epismc {

/// q: t x M. Row s - 1 holds q_s, the per-compartment reporting probabilities at time s.
using ReportingRates = Matrix<double>;

/// y: t x N with values in [0 : M]. Row s - 1 holds y_s; 0 means unreported and
/// k >= 1 reports compartment k - 1.
using ObservationMatrix = Matrix<std::uint8_t>;

/// o: t x M. Row s - 1 holds o_s, the number of individuals reported in each compartment.
using AggregateCounts = Matrix<std::int64_t>;

/// Rates constant over time: every row equals `q`. Throws std::invalid_argument outside [0, 1].
[[nodiscard]] ReportingRates constant_rates(std::size_t horizon, std::span<const double> q);

/// Checks shape and range of rates. Throws std::invalid_argument.
void validate_rates(const ReportingRates& q, std::size_t horizon, std::size_t compartments);

/// Checks shape and range of observations. Throws std::invalid_argument.
void validate_observations(const ObservationMatrix& y, std::size_t horizon, std::size_t population,
                           std::size_t compartments);

/// Probability that an individual in compartment `state` produces observation `y`.
[[nodiscard]] inline double emission_factor(std::span<const double> q_row, std::size_t state, std::uint8_t y) noexcept {
  if (y == 0) return 1.0 - q_row[state];
  return static_cast<std::size_t>(y) == state + 1 ? q_row[state] : 0.0;
}

/// Table E(n, j) = emission_factor(q_row, j, y_row[n]), N x M.
[[nodiscard]] Matrix<double> emission_table(std::span<const std::uint8_t> y_row, std::span<const double> q_row);
void emission_table(std::span<const std::uint8_t> y_row, std::span<const double> q_row, std::span<double> out);

/// Granular observations: each individual's true compartment is reported with
/// probability q_s^{(x)}, otherwise 0. Uses states[1..t] of the trajectory.
[[nodiscard]] ObservationMatrix observe(const Trajectory& traj, const ReportingRates& q, Rng& rng);

/// log p(y_s | x_s); -inf when some reported value differs from the latent state.
[[nodiscard]] double emission_logprob(std::span<const Compartment> x, std::span<const std::uint8_t> y,
                                      std::span<const double> q_row);

/// Per-time tallies of reported compartments.
[[nodiscard]] AggregateCounts aggregate_counts(const ObservationMatrix& y, std::size_t compartments);

}  // namespace epismc

#endif

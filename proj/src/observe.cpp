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

#include "epismc/observe.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace epismc {

ReportingRates constant_rates(std::size_t horizon, std::span<const double> q) {
  ReportingRates rates(horizon, q.size());
  for (std::size_t s = 0; s < horizon; ++s) {
    for (std::size_t i = 0; i < q.size(); ++i) rates(s, i) = q[i];
  }
  validate_rates(rates, horizon, q.size());
  return rates;
}

void validate_rates(const ReportingRates& q, std::size_t horizon, std::size_t compartments) {
  if (q.rows() != horizon || q.cols() != compartments) {
    throw std::invalid_argument{"reporting rates must be " + std::to_string(horizon) + " x " +
                                std::to_string(compartments)};
  }
  for (const double value : q.values()) {
    if (!(value >= 0.0 && value <= 1.0)) throw std::invalid_argument{"reporting rate outside [0, 1]"};
  }
}

void validate_observations(const ObservationMatrix& y, std::size_t horizon, std::size_t population,
                           std::size_t compartments) {
  if (y.rows() != horizon || y.cols() != population) {
    throw std::invalid_argument{"observations must be " + std::to_string(horizon) + " x " +
                                std::to_string(population)};
  }
  for (const auto value : y.values()) {
    if (value > compartments) throw std::invalid_argument{"observation outside [0, M]"};
  }
}

Matrix<double> emission_table(std::span<const std::uint8_t> y_row, std::span<const double> q_row) {
  Matrix<double> out(y_row.size(), q_row.size());
  emission_table(y_row, q_row, out.values());
  return out;
}

void emission_table(std::span<const std::uint8_t> y_row, std::span<const double> q_row, std::span<double> out) {
  const std::size_t m = q_row.size();
  for (std::size_t n = 0; n < y_row.size(); ++n) {
    for (std::size_t j = 0; j < m; ++j) out[n * m + j] = emission_factor(q_row, j, y_row[n]);
  }
}

ObservationMatrix observe(const Trajectory& traj, const ReportingRates& q, Rng& rng) {
  const std::size_t horizon = traj.horizon();
  if (q.rows() != horizon) throw std::invalid_argument{"reporting rates and trajectory horizons differ"};
  const std::size_t n_pop = traj.states.empty() ? 0 : traj.states.front().size();
  ObservationMatrix y(horizon, n_pop);
  for (std::size_t s = 1; s <= horizon; ++s) {
    const auto& x = traj.states[s];
    for (std::size_t n = 0; n < n_pop; ++n) {
      const bool reported = rng.uniform() < q(s - 1, x[n]);
      y(s - 1, n) = reported ? static_cast<std::uint8_t>(x[n] + 1) : std::uint8_t{0};
    }
  }
  return y;
}

double emission_logprob(std::span<const Compartment> x, std::span<const std::uint8_t> y,
                        std::span<const double> q_row) {
  if (x.size() != y.size()) throw std::invalid_argument{"state and observation lengths differ"};
  double total = 0.0;
  for (std::size_t n = 0; n < x.size(); ++n) {
    const double factor = emission_factor(q_row, x[n], y[n]);
    if (factor == 0.0) return -std::numeric_limits<double>::infinity();
    total += std::log(factor);
  }
  return total;
}

AggregateCounts aggregate_counts(const ObservationMatrix& y, std::size_t compartments) {
  AggregateCounts o(y.rows(), compartments, 0);
  for (std::size_t s = 0; s < y.rows(); ++s) {
    for (const auto value : y.row(s)) {
      if (value > compartments) throw std::invalid_argument{"observation outside [0, M]"};
      if (value > 0) ++o(s, value - 1);
    }
  }
  return o;
}

}  // namespace epismc

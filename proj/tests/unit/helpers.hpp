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

#ifndef EPISMC_TESTS_HELPERS_HPP
#define EPISMC_TESTS_HELPERS_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <vector>

#include "epismc/model.hpp"
#include "epismc/observe.hpp"
#include "epismc/rng.hpp"

namespace epismc::testing {

inline double sigmoid_ref(double z) { return 1.0 / (1.0 + std::exp(-z)); }

/// Covariates with every row equal to [1, 0, ..., 0].
inline Covariates intercept_only(std::size_t n, std::size_t d = 2) {
  Covariates w(n, d, 0.0);
  for (std::size_t i = 0; i < n; ++i) w(i, 0) = 1.0;
  return w;
}

inline Covariates random_covariates(std::size_t n, std::size_t d, std::uint64_t seed) {
  Rng rng{seed};
  return generate_covariates(n, d, rng);
}

inline ModelSpec sis_dgp(std::size_t n, std::uint64_t seed = 1) {
  return sis_spec({{-std::log(static_cast<double>(n) - 1.0), 0.0}, {-1.0, 2.0}, {-1.0, -1.0}},
                  random_covariates(n, 2, seed));
}

inline ModelSpec seir_dgp(std::size_t n, std::uint64_t seed = 1) {
  // About 10% initially infectious; capped at one half for tiny populations.
  const double odds = std::max(static_cast<double>(n) / 10.0, 2.0) - 1.0;
  return seir_spec({{-std::log(odds), 0.0}, {1.0, 2.0}, 0.2, {-1.0, -1.0}},
                   random_covariates(n, 2, seed));
}

/// Simulated data for a spec with constant rates.
struct Data {
  Trajectory trajectory;
  ObservationMatrix y;
  ReportingRates q;
};

inline Data simulate_data(const ModelSpec& spec, std::size_t t, const std::vector<double>& q, std::uint64_t seed) {
  Rng rng{seed};
  auto traj = simulate(spec, t, rng);
  auto rates = constant_rates(t, q);
  auto y = observe(traj, rates, rng);
  return {std::move(traj), std::move(y), std::move(rates)};
}

/// Model whose kernel ignores the counts: K'(i, .) = K_{c(i)}(i, .) where c(i) is the
/// one-hot count vector of a single individual in state i. Equals the original model at N = 1.
inline ModelSpec count_free(const ModelSpec& spec) {
  const auto base = spec.transition_ptr();
  const std::size_t m = spec.compartments();
  auto kernel = std::make_shared<FunctionKernel>(
      spec.population(), m, [base, m](std::size_t n, std::span<const double>, std::span<double> out) {
        std::vector<double> onehot(m, 0.0);
        std::vector<double> k(m * m);
        for (std::size_t i = 0; i < m; ++i) {
          std::fill(onehot.begin(), onehot.end(), 0.0);
          onehot[i] = 1.0;
          base->kernel(n, onehot, k);
          for (std::size_t j = 0; j < m; ++j) out[i * m + j] = k[i * m + j];
        }
      });
  return ModelSpec{spec.initial_probs(), kernel};
}

}  // namespace epismc::testing

#endif

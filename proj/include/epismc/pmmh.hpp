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

#ifndef EPISMC_PMMH_HPP
#define EPISMC_PMMH_HPP

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "epismc/matrix.hpp"
#include "epismc/model.hpp"
#include "epismc/observe.hpp"

namespace epismc {

struct NormalPrior {
  double mean = 0.0;
  double variance = 3.0;
};

/// Parameter vector layout: the beta components in order, then `rates` reporting-rate
/// components with Uniform(0, 1) priors.
struct PriorSpec {
  std::vector<NormalPrior> beta;
  std::size_t rates = 0;

  [[nodiscard]] std::size_t dimension() const noexcept { return beta.size() + rates; }
};

/// N(0, variance) on `beta_count` components and Uniform(0, 1) on `rates` components.
[[nodiscard]] PriorSpec default_prior(std::size_t beta_count, std::size_t rates, double variance = 3.0);

/// Sum of component log densities; -inf outside the support.
/// Throws std::invalid_argument on a layout mismatch or a nonpositive variance.
[[nodiscard]] double log_prior(std::span<const double> params, const PriorSpec& prior);

/// Draws from the prior.
[[nodiscard]] std::vector<double> sample_prior(const PriorSpec& prior, Rng& rng);

/// A group of parameters updated jointly. Unit-interval blocks random-walk on the logit scale.
struct ParameterBlock {
  std::string name;
  std::size_t offset = 0;
  std::size_t size = 0;
  bool unit_interval = false;
};

/// Blocks beta0, beta_lambda, beta_gamma (d each) followed by one block q of `rates` components.
[[nodiscard]] std::vector<ParameterBlock> standard_blocks(std::size_t d, std::size_t rates);

struct PmmhConfig {
  std::size_t iterations = 100000;
  std::size_t burn_in = 10000;
  std::size_t thinning = 1;
  double initial_scale = 0.1;  ///< proposal standard deviation on the transformed scale
  double target_acceptance = 0.23;
  bool adapt = true;           ///< Robbins-Monro scale adaptation during burn-in
  std::vector<ParameterBlock> blocks;  ///< empty: one block holding every parameter
};

/// Log-likelihood estimate at a parameter vector; the seed identifies the evaluation.
/// May return -inf (for example for a degenerate filter).
using LogLikelihood = std::function<double(std::span<const double> params, std::uint64_t seed)>;

struct Chain {
  std::vector<std::string> names;  ///< parameter names
  Matrix<double> samples;          ///< iterations x dimension, state after each iteration
  std::vector<double> log_likelihoods;
  std::vector<double> log_priors;
  std::vector<char> accepted;
  std::vector<std::size_t> block;  ///< block updated at each iteration
  Matrix<double> scales;           ///< iterations x blocks, scale used at each iteration
  std::size_t burn_in = 0;
  std::size_t thinning = 1;

  [[nodiscard]] std::size_t iterations() const noexcept { return accepted.size(); }
  /// Fraction of accepted proposals over [begin, end).
  [[nodiscard]] double acceptance_rate(std::size_t begin, std::size_t end) const;
  /// Acceptance after burn-in.
  [[nodiscard]] double post_burn_in_acceptance() const { return acceptance_rate(burn_in, iterations()); }
  /// Rows kept after burn-in and thinning.
  [[nodiscard]] std::vector<std::size_t> kept() const;
};

/// Metropolis-within-Gibbs PMMH: each iteration updates one block (cyclically) and accepts
/// with the ratio of likelihood estimate times prior, including the logit Jacobian for
/// unit-interval blocks. The current state's estimate is reused, not refreshed.
/// Throws std::invalid_argument when the initial point has zero prior density or the
/// configuration is inconsistent.
[[nodiscard]] Chain run_pmmh(const LogLikelihood& log_likelihood, const PriorSpec& prior,
                             std::vector<double> initial, const PmmhConfig& config, std::uint64_t seed,
                             std::vector<std::string> names = {});

/// Two-sample Kolmogorov-Smirnov statistic.
[[nodiscard]] double ks_statistic(std::vector<double> a, std::vector<double> b);

/// Asymptotic p-value of the two-sample KS statistic for sample sizes n and m.
[[nodiscard]] double ks_pvalue(double statistic, std::size_t n, std::size_t m);

using SpecBuilder = std::function<ModelSpec(std::span<const double> params)>;
using RatesBuilder = std::function<ReportingRates(std::span<const double> params)>;

/// Pointwise quantile bands of simulated c_s ((t + 1) x M) and o_s (t x M).
struct PredictiveBands {
  double level = 0.9;
  Matrix<double> count_lower, count_median, count_upper;
  Matrix<double> observed_lower, observed_median, observed_upper;
};

/// Re-simulates trajectories and observations at `draws` parameter vectors picked uniformly
/// from the kept chain rows.
[[nodiscard]] PredictiveBands posterior_predictive(const Chain& chain, const SpecBuilder& spec_builder,
                                                   const RatesBuilder& rates_builder, std::size_t horizon,
                                                   std::size_t draws, std::uint64_t seed, double level = 0.9);

}  // namespace epismc

#endif

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

#ifndef EPISMC_SCENARIO_HPP
#define EPISMC_SCENARIO_HPP

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "epismc/model.hpp"
#include "epismc/observe.hpp"

namespace epismc {

enum class ModelKind { kSIS, kSEIR };

/// Parameters shared by the SIS and SEIR parameterizations (rho is SEIR only).
struct ModelParams {
  std::vector<double> beta0;
  std::vector<double> beta_lambda;
  std::vector<double> beta_gamma;
  double rho = 0.0;
};

/// A model, its parameters, reporting rates and the seed used to generate data.
struct Scenario {
  ModelKind model = ModelKind::kSIS;
  std::size_t population = 0;
  std::size_t dims = 0;
  std::size_t horizon = 0;
  ModelParams params;              ///< data-generating parameters
  std::optional<ModelParams> ndgp;  ///< alternative parameters used for filtering only
  std::vector<double> q;           ///< constant reporting rates, length M
  std::optional<Covariates> covariates;
  std::uint64_t seed = 0;

  [[nodiscard]] std::size_t compartments() const noexcept { return model == ModelKind::kSIS ? 2 : 4; }
};

/// Parses {model, N, d, t, params{beta0, beta_lambda, beta_gamma, rho}, q, covariates?, ndgp?, seed}.
/// ndgp lists only the overridden fields. Throws std::invalid_argument with the offending field.
[[nodiscard]] Scenario parse_scenario(const nlohmann::json& json);
[[nodiscard]] nlohmann::json to_json(const Scenario& scenario);

/// Covariates stored in the scenario, or generated from its seed.
[[nodiscard]] Covariates scenario_covariates(const Scenario& scenario);

[[nodiscard]] ModelSpec build_spec(const Scenario& scenario, const ModelParams& params, const Covariates& covariates);
[[nodiscard]] ReportingRates build_rates(std::span<const double> q, std::size_t horizon);

/// Parameters used for filtering under the DGP or NDGP setting. For SIS without an explicit
/// ndgp entry, the NDGP substitutes beta_lambda = [-3, 0, ...]. SEIR requires an explicit entry.
[[nodiscard]] ModelParams filter_params(const Scenario& scenario, bool ndgp);

struct ScenarioData {
  Covariates covariates;
  Trajectory trajectory;
  ObservationMatrix y;
  ReportingRates q;
};

/// Simulates the latent trajectory and observations. `data_seed` defaults to the scenario seed.
[[nodiscard]] ScenarioData simulate_data(const Scenario& scenario, std::optional<std::uint64_t> data_seed = {});

/// Flattened parameter vector [beta0, beta_lambda, beta_gamma, q] and its names.
[[nodiscard]] std::vector<double> flatten(const ModelParams& params, std::span<const double> q);
[[nodiscard]] std::vector<std::string> parameter_names(std::size_t dims, std::size_t compartments);
/// Inverse of flatten; rho is taken from `base`.
void unflatten(std::span<const double> values, std::size_t dims, ModelParams& params, std::vector<double>& q);

/// Sets a named component such as "beta_lambda[1]" or "q[0]". Throws std::invalid_argument.
void set_parameter(ModelParams& params, std::vector<double>& q, const std::string& name, double value);
[[nodiscard]] double get_parameter(const ModelParams& params, std::span<const double> q, const std::string& name);

}  // namespace epismc

#endif

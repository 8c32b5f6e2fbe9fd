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

#include "epismc/scenario.hpp"

#include <stdexcept>

#include "epismc/rng.hpp"

namespace epismc {

namespace {

using nlohmann::json;

constexpr std::uint64_t kCovariateStream = 1;
constexpr std::uint64_t kTrajectoryStream = 2;
constexpr std::uint64_t kObservationStream = 3;

const json& field(const json& j, const char* name) {
  if (!j.is_object() || !j.contains(name)) throw std::invalid_argument{std::string{"missing field '"} + name + "'"};
  return j.at(name);
}

std::vector<double> vector_field(const json& j, const char* name, std::size_t length) {
  const auto& value = field(j, name);
  if (!value.is_array()) throw std::invalid_argument{std::string{"field '"} + name + "' must be an array"};
  auto out = value.get<std::vector<double>>();
  if (length != 0 && out.size() != length) {
    throw std::invalid_argument{std::string{"field '"} + name + "' must have length " + std::to_string(length)};
  }
  return out;
}

void apply_params(const json& j, std::size_t d, ModelParams& params, bool partial) {
  auto read = [&](const char* name, std::vector<double>& out) {
    if (partial && !j.contains(name)) return;
    out = vector_field(j, name, d);
  };
  read("beta0", params.beta0);
  read("beta_lambda", params.beta_lambda);
  read("beta_gamma", params.beta_gamma);
  if (j.contains("rho")) params.rho = j.at("rho").get<double>();
}

json params_json(const ModelParams& p, ModelKind kind) {
  json out{{"beta0", p.beta0}, {"beta_lambda", p.beta_lambda}, {"beta_gamma", p.beta_gamma}};
  if (kind == ModelKind::kSEIR) out["rho"] = p.rho;
  return out;
}

std::pair<std::string, std::size_t> split_name(const std::string& name) {
  const auto open = name.find('[');
  if (open == std::string::npos || name.back() != ']') throw std::invalid_argument{"bad parameter name " + name};
  return {name.substr(0, open), static_cast<std::size_t>(std::stoul(name.substr(open + 1, name.size() - open - 2)))};
}

double& locate(ModelParams& params, std::vector<double>& q, const std::string& name) {
  const auto [block, index] = split_name(name);
  std::vector<double>* target = nullptr;
  if (block == "beta0") target = &params.beta0;
  if (block == "beta_lambda") target = &params.beta_lambda;
  if (block == "beta_gamma") target = &params.beta_gamma;
  if (block == "q") target = &q;
  if (target == nullptr || index >= target->size()) throw std::invalid_argument{"unknown parameter " + name};
  return (*target)[index];
}

}  // namespace

Scenario parse_scenario(const json& j) {
  Scenario s;
  const auto model = field(j, "model").get<std::string>();
  if (model == "sis") {
    s.model = ModelKind::kSIS;
  } else if (model == "seir") {
    s.model = ModelKind::kSEIR;
  } else {
    throw std::invalid_argument{"field 'model' must be \"sis\" or \"seir\""};
  }
  s.population = field(j, "N").get<std::size_t>();
  s.dims = field(j, "d").get<std::size_t>();
  s.horizon = field(j, "t").get<std::size_t>();
  if (s.population == 0 || s.dims == 0) throw std::invalid_argument{"N and d must be positive"};
  apply_params(field(j, "params"), s.dims, s.params, false);
  if (s.model == ModelKind::kSEIR && !field(j, "params").contains("rho")) {
    throw std::invalid_argument{"missing field 'params.rho'"};
  }
  if (j.contains("ndgp") && !j.at("ndgp").is_null()) {
    ModelParams alt = s.params;
    apply_params(j.at("ndgp"), s.dims, alt, true);
    s.ndgp = alt;
  }
  s.q = vector_field(j, "q", s.compartments());
  for (const double v : s.q) {
    if (!(v >= 0.0 && v <= 1.0)) throw std::invalid_argument{"field 'q' must lie in [0, 1]"};
  }
  if (j.contains("covariates") && !j.at("covariates").is_null()) {
    const auto rows = j.at("covariates").get<std::vector<std::vector<double>>>();
    if (rows.size() != s.population) throw std::invalid_argument{"field 'covariates' must have N rows"};
    Covariates w(s.population, s.dims);
    for (std::size_t n = 0; n < rows.size(); ++n) {
      if (rows[n].size() != s.dims) throw std::invalid_argument{"field 'covariates' rows must have length d"};
      for (std::size_t k = 0; k < s.dims; ++k) w(n, k) = rows[n][k];
    }
    s.covariates = std::move(w);
  }
  s.seed = j.value("seed", std::uint64_t{0});
  return s;
}

json to_json(const Scenario& s) {
  json out{{"model", s.model == ModelKind::kSIS ? "sis" : "seir"},
           {"N", s.population},
           {"d", s.dims},
           {"t", s.horizon},
           {"params", params_json(s.params, s.model)},
           {"q", s.q},
           {"seed", s.seed}};
  if (s.ndgp) out["ndgp"] = params_json(*s.ndgp, s.model);
  if (s.covariates) {
    json rows = json::array();
    for (std::size_t n = 0; n < s.covariates->rows(); ++n) {
      const auto r = s.covariates->row(n);
      rows.push_back(std::vector<double>(r.begin(), r.end()));
    }
    out["covariates"] = std::move(rows);
  }
  return out;
}

Covariates scenario_covariates(const Scenario& scenario) {
  if (scenario.covariates) return *scenario.covariates;
  Rng rng = Rng::stream(scenario.seed, kCovariateStream);
  return generate_covariates(scenario.population, scenario.dims, rng);
}

ModelSpec build_spec(const Scenario& scenario, const ModelParams& params, const Covariates& covariates) {
  if (scenario.model == ModelKind::kSIS) {
    return sis_spec(SISParams{params.beta0, params.beta_lambda, params.beta_gamma}, covariates);
  }
  return seir_spec(SEIRParams{params.beta0, params.beta_lambda, params.rho, params.beta_gamma}, covariates);
}

ReportingRates build_rates(std::span<const double> q, std::size_t horizon) { return constant_rates(horizon, q); }

ModelParams filter_params(const Scenario& scenario, bool ndgp) {
  if (!ndgp) return scenario.params;
  if (scenario.ndgp) return *scenario.ndgp;
  if (scenario.model == ModelKind::kSEIR) {
    throw std::invalid_argument{"SEIR scenarios need an explicit 'ndgp' entry for the NDGP setting"};
  }
  ModelParams alt = scenario.params;
  alt.beta_lambda.assign(scenario.dims, 0.0);
  alt.beta_lambda[0] = -3.0;
  return alt;
}

ScenarioData simulate_data(const Scenario& scenario, std::optional<std::uint64_t> data_seed) {
  const std::uint64_t seed = data_seed.value_or(scenario.seed);
  auto covariates = scenario_covariates(scenario);
  const auto spec = build_spec(scenario, scenario.params, covariates);
  auto q = build_rates(scenario.q, scenario.horizon);
  Rng traj_rng = Rng::stream(seed, kTrajectoryStream);
  auto trajectory = simulate(spec, scenario.horizon, traj_rng);
  Rng obs_rng = Rng::stream(seed, kObservationStream);
  auto y = observe(trajectory, q, obs_rng);
  return {std::move(covariates), std::move(trajectory), std::move(y), std::move(q)};
}

std::vector<double> flatten(const ModelParams& params, std::span<const double> q) {
  std::vector<double> out;
  out.insert(out.end(), params.beta0.begin(), params.beta0.end());
  out.insert(out.end(), params.beta_lambda.begin(), params.beta_lambda.end());
  out.insert(out.end(), params.beta_gamma.begin(), params.beta_gamma.end());
  out.insert(out.end(), q.begin(), q.end());
  return out;
}

std::vector<std::string> parameter_names(std::size_t dims, std::size_t compartments) {
  std::vector<std::string> out;
  for (const char* block : {"beta0", "beta_lambda", "beta_gamma"}) {
    for (std::size_t k = 0; k < dims; ++k) out.push_back(std::string{block} + "[" + std::to_string(k) + "]");
  }
  for (std::size_t k = 0; k < compartments; ++k) out.push_back("q[" + std::to_string(k) + "]");
  return out;
}

void unflatten(std::span<const double> values, std::size_t dims, ModelParams& params, std::vector<double>& q) {
  if (values.size() < 3 * dims) throw std::invalid_argument{"parameter vector too short"};
  params.beta0.assign(values.begin(), values.begin() + dims);
  params.beta_lambda.assign(values.begin() + dims, values.begin() + 2 * dims);
  params.beta_gamma.assign(values.begin() + 2 * dims, values.begin() + 3 * dims);
  q.assign(values.begin() + 3 * dims, values.end());
}

void set_parameter(ModelParams& params, std::vector<double>& q, const std::string& name, double value) {
  locate(params, q, name) = value;
}

double get_parameter(const ModelParams& params, std::span<const double> q, const std::string& name) {
  ModelParams copy = params;
  std::vector<double> qq(q.begin(), q.end());
  return locate(copy, qq, name);
}

}  // namespace epismc

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

#include "epismc/harness.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cmath>
#include <limits>
#include <map>
#include <memory>
#include <numeric>
#include <stdexcept>

#include "epismc/exact.hpp"
#include "epismc/logspace.hpp"
#include "epismc/meanfield.hpp"
#include "epismc/parallel.hpp"
#include "epismc/pmmh.hpp"

namespace epismc {

using nlohmann::json;

namespace {

constexpr std::uint64_t kDataStream = 0x5eedULL;
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string lower(std::string text) {
  std::transform(text.begin(), text.end(), text.begin(), [](unsigned char c) { return std::tolower(c); });
  return text;
}

template <class T>
T get_or(const json& j, const char* key, T fallback) {
  if (!j.contains(key) || j.at(key).is_null()) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw std::invalid_argument{std::string{"config field '"} + key + "': " + e.what()};
  }
}

std::vector<MethodSpec> methods_field(const json& j, const std::vector<std::string>& fallback) {
  std::vector<MethodSpec> out;
  for (const auto& text : get_or(j, "methods", fallback)) out.push_back(parse_method(text));
  if (out.empty()) throw std::invalid_argument{"config field 'methods' must be nonempty"};
  return out;
}

std::size_t positive(const json& j, const char* key, std::size_t fallback) {
  const auto value = get_or<std::size_t>(j, key, fallback);
  if (value == 0) throw std::invalid_argument{std::string{"config field '"} + key + "' must be >= 1"};
  return value;
}

std::vector<std::size_t> particle_list(const json& j, std::vector<std::size_t> fallback) {
  std::vector<std::size_t> out;
  if (j.contains("particles") && j.at("particles").is_number()) {
    out.push_back(j.at("particles").get<std::size_t>());
  } else {
    out = get_or(j, "particles", fallback);
  }
  if (out.empty() || std::find(out.begin(), out.end(), std::size_t{0}) != out.end()) {
    throw std::invalid_argument{"config field 'particles' must list positive counts"};
  }
  return out;
}

double elapsed(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

Scenario with_horizon(Scenario scenario, std::optional<std::size_t> horizon) {
  if (horizon) scenario.horizon = *horizon;
  return scenario;
}

std::vector<double> ess_percent(const FilterOutput& out) {
  std::vector<double> pct(out.ess.size());
  for (std::size_t s = 0; s < pct.size(); ++s) pct[s] = 100.0 * out.ess[s] / static_cast<double>(out.particles);
  return pct;
}

std::string degenerate_cell(const std::optional<std::size_t>& step) {
  return step ? std::to_string(*step) : std::string{};
}

}  // namespace

std::string MethodSpec::slug() const {
  switch (method) {
    case Method::kBootstrap: return "BPF";
    case Method::kAuxiliary: return "APF";
    case Method::kLookahead: return "LA" + std::to_string(lookahead);
  }
  return "unknown";
}

MethodSpec parse_method(const std::string& text) {
  const auto t = lower(text);
  if (t == "bpf") return {Method::kBootstrap, 0};
  if (t == "apf") return {Method::kAuxiliary, 0};
  std::string digits;
  if (t.rfind("la(", 0) == 0 && t.back() == ')') {
    digits = t.substr(3, t.size() - 4);
  } else if (t.rfind("la", 0) == 0) {
    digits = t.substr(2);
  }
  if (!digits.empty() && std::all_of(digits.begin(), digits.end(), [](unsigned char c) { return std::isdigit(c); })) {
    return {Method::kLookahead, static_cast<std::size_t>(std::stoul(digits))};
  }
  throw std::invalid_argument{"unknown method '" + text + "' (expected BPF, APF or LA(h))"};
}

Provenance Experiment::provenance(const std::string& command) const {
  return Provenance{fnv1a(config.dump()), seed, command};
}

json Experiment::section(const std::string& name) const {
  if (config.contains(name) && config.at(name).is_object()) return config.at(name);
  return json::object();
}

Experiment load_experiment(const json& raw, const std::filesystem::path& base_dir, std::optional<std::uint64_t> seed,
                           bool paper_scale, std::optional<std::size_t> workers) {
  if (!raw.is_object()) throw std::invalid_argument{"config must be a JSON object"};
  Experiment e;
  e.config = raw;
  if (paper_scale && raw.contains("paper_scale")) e.config.merge_patch(raw.at("paper_scale"));
  e.config.erase("paper_scale");
  if (!e.config.contains("scenario")) throw std::invalid_argument{"missing field 'scenario'"};
  if (e.config.at("scenario").is_string()) {
    auto path = std::filesystem::path{e.config.at("scenario").get<std::string>()};
    if (path.is_relative()) path = base_dir / path;
    auto scenario = read_json(path);
    if (paper_scale && scenario.contains("paper_scale")) scenario.merge_patch(scenario.at("paper_scale"));
    scenario.erase("paper_scale");
    e.config["scenario"] = scenario;
  }
  if (seed) e.config["seed"] = *seed;
  if (workers) e.config["workers"] = *workers;
  e.scenario = parse_scenario(e.config.at("scenario"));
  e.seed = get_or<std::uint64_t>(e.config, "seed", 0);
  e.workers = positive(e.config, "workers", 1);
  e.paper_scale = paper_scale;
  e.config["paper_scale_applied"] = paper_scale;
  return e;
}

std::vector<ReplicateRun> run_replicates(const Scenario& base, const ReplicateSpec& spec) {
  if (spec.replicates == 0 || spec.particles == 0) throw std::invalid_argument{"replicates and particles must be >= 1"};
  const Scenario scenario = with_horizon(base, spec.horizon);
  const auto params = filter_params(scenario, spec.ndgp);
  const auto filter_q = spec.q.value_or(scenario.q);
  if (filter_q.size() != scenario.compartments()) throw std::invalid_argument{"assumed q has the wrong length"};

  struct Shared {
    ScenarioData data;
    ReportingRates rates;
    std::unique_ptr<ModelSpec> model;
    std::unique_ptr<LookaheadContext> context;
  };
  auto prepare = [&](std::optional<std::uint64_t> data_seed) {
    auto shared = std::make_unique<Shared>();
    shared->data = simulate_data(scenario, data_seed);
    shared->rates = build_rates(filter_q, scenario.horizon);
    shared->model = std::make_unique<ModelSpec>(build_spec(scenario, params, shared->data.covariates));
    if (spec.method.method == Method::kLookahead) {
      shared->context = std::make_unique<LookaheadContext>(*shared->model, shared->data.y, shared->rates,
                                                           spec.method.lookahead);
    }
    return shared;
  };

  std::unique_ptr<Shared> common;
  double common_seconds = 0.0;
  if (!spec.vary_data) {
    const auto start = std::chrono::steady_clock::now();
    common = prepare(std::nullopt);
    common_seconds = elapsed(start) / static_cast<double>(spec.replicates);
  }

  std::vector<ReplicateRun> runs(spec.replicates);
  parallel_for(spec.replicates, spec.workers, [&](std::size_t begin, std::size_t end, std::size_t) {
    for (std::size_t r = begin; r < end; ++r) {
      const auto start = std::chrono::steady_clock::now();
      std::unique_ptr<Shared> own;
      if (spec.vary_data) own = prepare(derive_seed(scenario.seed, kDataStream, r));
      const Shared& data = own ? *own : *common;
      FilterConfig cfg;
      cfg.method = spec.method.method;
      cfg.lookahead = spec.method.lookahead;
      cfg.particles = spec.particles;
      cfg.seed = derive_seed(spec.seed, r);
      const auto out = run_filter(*data.model, data.data.y, data.rates, cfg, data.context.get());
      auto& run = runs[r];
      run.replicate = r;
      run.seed = cfg.seed;
      run.log_likelihood = out.log_likelihood;
      run.degenerate_step = out.degenerate_step;
      run.ess_pct = ess_percent(out);
      run.seconds = elapsed(start) + common_seconds;
    }
  });
  return runs;
}

double mean(const std::vector<double>& values) {
  if (values.empty()) return kNaN;
  return std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
}

double sample_std(const std::vector<double>& values) {
  if (values.size() < 2) return kNaN;
  for (const double v : values) {
    if (!std::isfinite(v)) return std::numeric_limits<double>::infinity();
  }
  const double m = mean(values);
  double ss = 0.0;
  for (const double v : values) ss += (v - m) * (v - m);
  return std::sqrt(ss / static_cast<double>(values.size() - 1));
}

double mean_ess_pct(const ReplicateRun& run, std::size_t from) {
  if (from >= run.ess_pct.size()) return kNaN;
  return mean(std::vector<double>(run.ess_pct.begin() + static_cast<std::ptrdiff_t>(from), run.ess_pct.end()));
}

std::vector<double> log_likelihoods(const std::vector<ReplicateRun>& runs) {
  std::vector<double> out;
  out.reserve(runs.size());
  for (const auto& r : runs) out.push_back(r.log_likelihood);
  return out;
}

std::size_t degenerate_count(const std::vector<ReplicateRun>& runs) {
  return static_cast<std::size_t>(
      std::count_if(runs.begin(), runs.end(), [](const ReplicateRun& r) { return r.degenerate_step.has_value(); }));
}

double quantile(std::vector<double> values, double prob) {
  if (values.empty()) return kNaN;
  std::sort(values.begin(), values.end());
  const double pos = prob * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

double histogram_mode(const std::vector<double>& values, double lower_bound, double upper_bound, std::size_t bins) {
  if (values.empty() || bins == 0) return kNaN;
  const double width = (upper_bound - lower_bound) / static_cast<double>(bins);
  std::vector<std::size_t> counts(bins, 0);
  for (const double v : values) {
    auto k = static_cast<std::ptrdiff_t>(std::floor((v - lower_bound) / width));
    k = std::clamp<std::ptrdiff_t>(k, 0, static_cast<std::ptrdiff_t>(bins) - 1);
    ++counts[static_cast<std::size_t>(k)];
  }
  const auto best = static_cast<std::size_t>(std::max_element(counts.begin(), counts.end()) - counts.begin());
  return lower_bound + (static_cast<double>(best) + 0.5) * width;
}

namespace {

using Paths = std::vector<std::filesystem::path>;

ReplicateSpec base_spec(const Experiment& e, const MethodSpec& method, std::size_t particles, std::size_t replicates,
                        bool vary_data) {
  ReplicateSpec spec;
  spec.method = method;
  spec.particles = particles;
  spec.replicates = replicates;
  spec.seed = e.seed;
  spec.vary_data = vary_data;
  spec.workers = e.workers;
  return spec;
}

Paths cmd_simulate(const Experiment& e, const std::filesystem::path& out, std::ostream& log) {
  const auto prov = e.provenance("simulate");
  const auto data = simulate_data(e.scenario);
  const std::size_t m = e.scenario.compartments();
  Scenario persisted = e.scenario;
  persisted.covariates = data.covariates;
  Paths paths{out / "scenario.json", out / "covariates.csv", out / "trajectory.csv", out / "states.csv",
              out / "observations.csv", out / "aggregate.csv", out / "marginals.csv"};
  write_json(paths[0], to_json(persisted));
  {
    std::vector<std::string> header{"individual"};
    for (std::size_t k = 0; k < data.covariates.cols(); ++k) header.push_back("w" + std::to_string(k + 1));
    CsvWriter csv{paths[1], prov, header};
    for (std::size_t n = 0; n < data.covariates.rows(); ++n) {
      std::vector<std::string> cells{std::to_string(n)};
      for (const double w : data.covariates.row(n)) cells.push_back(format_double(w));
      csv.row(cells);
    }
  }
  {
    std::vector<std::string> header{"time"};
    for (std::size_t i = 0; i < m; ++i) header.push_back("c" + std::to_string(i + 1));
    CsvWriter csv{paths[2], prov, header};
    for (std::size_t s = 0; s <= e.scenario.horizon; ++s) {
      std::vector<std::string> cells{std::to_string(s)};
      for (const auto c : data.trajectory.counts[s]) cells.push_back(std::to_string(c));
      csv.row(cells);
    }
  }
  {
    CsvWriter csv{paths[3], prov, {"time", "individual", "state"}};
    for (std::size_t s = 0; s <= e.scenario.horizon; ++s) {
      for (std::size_t n = 0; n < e.scenario.population; ++n) {
        csv.row(s, n, static_cast<int>(data.trajectory.states[s][n]) + 1);
      }
    }
  }
  write_observations(paths[4], data.y, prov);
  {
    const auto o = aggregate_counts(data.y, m);
    std::vector<std::string> header{"time"};
    for (std::size_t i = 0; i < m; ++i) header.push_back("o" + std::to_string(i + 1));
    CsvWriter csv{paths[5], prov, header};
    for (std::size_t s = 0; s < o.rows(); ++s) {
      std::vector<std::string> cells{std::to_string(s + 1)};
      for (const auto v : o.row(s)) cells.push_back(std::to_string(v));
      csv.row(cells);
    }
  }
  const auto spec = build_spec(e.scenario, e.scenario.params, data.covariates);
  write_marginals(paths[6], multinomial_smoother(spec, data.y, data.q), prov);
  log << "simulate: N=" << e.scenario.population << " t=" << e.scenario.horizon << " written to " << out.string()
      << '\n';
  return paths;
}

Paths cmd_filter(const Experiment& e, const std::filesystem::path& out, std::ostream& log) {
  const auto cfg_json = e.section("filter");
  const auto methods = methods_field(cfg_json, {"BPF", "APF", "LA(5)"});
  const auto particles = particle_list(cfg_json, {512});
  const bool ndgp = get_or(cfg_json, "ndgp", false);
  const auto prov = e.provenance("filter");
  const auto data = simulate_data(e.scenario);
  const auto spec = build_spec(e.scenario, filter_params(e.scenario, ndgp), data.covariates);
  Paths paths{out / "filter_runs.csv"};
  CsvWriter summary{paths[0], prov, {"method", "particles", "seed", "log_likelihood", "degenerate_step",
                                     "mean_ess_pct"}};
  CsvWriter timing{out / "timing_filter.csv", prov, {"method", "particles", "seconds"}};
  paths.push_back(out / "timing_filter.csv");
  for (const auto& method : methods) {
    for (const auto p : particles) {
      FilterConfig cfg;
      cfg.method = method.method;
      cfg.lookahead = method.lookahead;
      cfg.particles = p;
      cfg.seed = e.seed;
      cfg.workers = e.workers;
      const auto start = std::chrono::steady_clock::now();
      const auto result = run_filter(spec, data.y, data.q, cfg);
      const double seconds = elapsed(start);
      const auto stem = "filter_" + method.slug() + "_P" + std::to_string(p);
      write_json(out / (stem + ".json"), to_json(result));
      write_ess(out / ("ess_" + method.slug() + "_P" + std::to_string(p) + ".csv"), result, prov);
      paths.push_back(out / (stem + ".json"));
      paths.push_back(out / ("ess_" + method.slug() + "_P" + std::to_string(p) + ".csv"));
      const auto pct = ess_percent(result);
      summary.row(method.label(), p, e.seed, result.log_likelihood, degenerate_cell(result.degenerate_step),
                  mean(pct));
      timing.row(method.label(), p, seconds);
      log << "filter " << method.label() << " P=" << p << ": loglik=" << format_double(result.log_likelihood)
          << (result.degenerate() ? " (degenerate at step " + std::to_string(*result.degenerate_step) + ")" : "")
          << '\n';
    }
  }
  return paths;
}

Paths cmd_ess(const Experiment& e, const std::filesystem::path& out, std::ostream& log) {
  const auto c = e.section("ess");
  const auto methods = methods_field(c, {"BPF", "APF", "LA(1)", "LA(5)", "LA(10)", "LA(20)", "LA(50)"});
  const auto particles = positive(c, "particles", 512);
  const auto replicates = positive(c, "replicates", 10);
  const bool vary = get_or(c, "vary_data", false);
  const auto from = get_or<std::size_t>(c, "summary_from", 1);
  const auto prov = e.provenance("ess");
  Paths paths{out / "ess.csv", out / "ess_summary.csv", out / "timing_ess.csv"};
  CsvWriter trace{paths[0], prov, {"method", "replicate", "seed", "step", "ess", "ess_pct", "degenerate"}};
  CsvWriter summary{paths[1], prov, {"method", "particles", "replicates", "degenerate_runs", "mean_ess_pct"}};
  CsvWriter timing{paths[2], prov, {"method", "particles", "mean_seconds"}};
  for (const auto& method : methods) {
    const auto runs = run_replicates(e.scenario, base_spec(e, method, particles, replicates, vary));
    std::vector<double> means;
    std::vector<double> seconds;
    for (const auto& run : runs) {
      for (std::size_t s = 0; s < run.ess_pct.size(); ++s) {
        const bool failed = run.degenerate_step && s >= *run.degenerate_step;
        trace.row(method.label(), run.replicate, run.seed, s, run.ess_pct[s] * static_cast<double>(particles) / 100.0,
                  run.ess_pct[s], failed ? 1 : 0);
      }
      means.push_back(mean_ess_pct(run, from));
      seconds.push_back(run.seconds);
    }
    const auto failed = degenerate_count(runs);
    summary.row(method.label(), particles, replicates, failed, mean(means));
    timing.row(method.label(), particles, mean(seconds));
    log << "ess " << method.label() << ": mean ESS% " << format_double(mean(means)) << ", degenerate " << failed
        << "/" << replicates << '\n';
  }
  return paths;
}

Paths cmd_stddev(const Experiment& e, const std::filesystem::path& out, std::ostream& log) {
  const auto c = e.section("stddev");
  const auto methods = methods_field(c, {"APF", "LA(5)", "LA(10)", "LA(20)"});
  const auto particles = particle_list(c, {128, 512});
  const auto replicates = positive(c, "replicates", 25);
  if (replicates < 2) throw std::invalid_argument{"stddev needs at least 2 replicates"};
  const auto settings = get_or(c, "settings", std::vector<std::string>{"DGP", "NDGP"});
  const auto prov = e.provenance("stddev");
  Paths paths{out / "stddev.csv", out / "timing_stddev.csv"};
  CsvWriter table{paths[0], prov,
                  {"method", "particles", "scenario", "replicates", "degenerate_runs", "mean_log_lik", "std",
                   "std_finite"}};
  CsvWriter timing{paths[1], prov, {"method", "particles", "scenario", "mean_step_seconds"}};
  for (const auto& setting : settings) {
    if (setting != "DGP" && setting != "NDGP") throw std::invalid_argument{"settings must be DGP or NDGP"};
    for (const auto& method : methods) {
      for (const auto p : particles) {
        auto spec = base_spec(e, method, p, replicates, false);
        spec.ndgp = setting == "NDGP";
        const auto runs = run_replicates(e.scenario, spec);
        const auto ll = log_likelihoods(runs);
        std::vector<double> finite;
        std::copy_if(ll.begin(), ll.end(), std::back_inserter(finite), [](double v) { return std::isfinite(v); });
        std::vector<double> seconds;
        for (const auto& r : runs) seconds.push_back(r.seconds / static_cast<double>(e.scenario.horizon + 1));
        const double sd = sample_std(ll);
        table.row(method.label(), p, setting, replicates, degenerate_count(runs), mean(ll), sd, sample_std(finite));
        timing.row(method.label(), p, setting, mean(seconds));
        log << "stddev " << setting << " " << method.label() << " P=" << p << ": std " << format_double(sd) << '\n';
      }
    }
  }
  return paths;
}

Paths cmd_grid(const Experiment& e, const std::filesystem::path& out, std::ostream& log) {
  const auto c = e.section("grid");
  const auto names = get_or(c, "params", std::vector<std::string>{"beta_lambda[0]", "beta_lambda[1]"});
  const auto lo = get_or(c, "lower", std::vector<double>{-4.0, -4.0});
  const auto hi = get_or(c, "upper", std::vector<double>{4.0, 4.0});
  const auto res = get_or(c, "resolution", std::vector<std::size_t>{9, 9});
  if (names.size() != 2 || lo.size() != 2 || hi.size() != 2 || res.size() != 2) {
    throw std::invalid_argument{"grid needs two params with lower, upper and resolution each"};
  }
  if (res[0] < 2 || res[1] < 2) throw std::invalid_argument{"grid resolution must be >= 2 per axis"};
  const auto methods = methods_field(c, {"LA(5)"});
  const auto particles = positive(c, "particles", 512);
  const auto horizons = get_or(c, "horizons", std::vector<std::size_t>{e.scenario.horizon});
  const auto prov = e.provenance("grid");
  Paths paths{out / "grid.csv"};
  CsvWriter csv{paths[0], prov, {"t", "method", names[0], names[1], "loglik", "degenerate"}};
  for (const auto t : horizons) {
    Scenario scenario = e.scenario;
    scenario.horizon = t;
    const bool default_horizon = horizons.size() == 1 && t == e.scenario.horizon;
    const auto data_seed = default_horizon ? scenario.seed : derive_seed(scenario.seed, kDataStream + 1, t);
    const auto data = simulate_data(scenario, data_seed);
    for (const auto& method : methods) {
      const std::size_t cells = res[0] * res[1];
      std::vector<double> ll(cells);
      std::vector<char> failed(cells);
      parallel_for(cells, e.workers, [&](std::size_t begin, std::size_t end, std::size_t) {
        for (std::size_t k = begin; k < end; ++k) {
          const std::size_t i = k / res[1];
          const std::size_t j = k % res[1];
          ModelParams params = scenario.params;
          std::vector<double> q = scenario.q;
          set_parameter(params, q, names[0], lo[0] + (hi[0] - lo[0]) * static_cast<double>(i) / (res[0] - 1.0));
          set_parameter(params, q, names[1], lo[1] + (hi[1] - lo[1]) * static_cast<double>(j) / (res[1] - 1.0));
          const auto spec = build_spec(scenario, params, data.covariates);
          const auto rates = build_rates(q, t);
          FilterConfig cfg;
          cfg.method = method.method;
          cfg.lookahead = method.lookahead;
          cfg.particles = particles;
          cfg.seed = derive_seed(e.seed, t, k);
          const auto result = run_filter(spec, data.y, rates, cfg);
          ll[k] = result.log_likelihood;
          failed[k] = result.degenerate() ? 1 : 0;
        }
      });
      double peak = kNegInf;
      for (const double v : ll) peak = std::max(peak, v);
      for (std::size_t k = 0; k < cells; ++k) {
        const std::size_t i = k / res[1];
        const std::size_t j = k % res[1];
        const double normalized = std::isfinite(ll[k]) && std::isfinite(peak) ? ll[k] - peak : kNegInf;
        csv.row(t, method.label(), lo[0] + (hi[0] - lo[0]) * static_cast<double>(i) / (res[0] - 1.0),
                lo[1] + (hi[1] - lo[1]) * static_cast<double>(j) / (res[1] - 1.0), normalized,
                static_cast<int>(failed[k]));
      }
      log << "grid t=" << t << " " << method.label() << ": "
          << std::count(failed.begin(), failed.end(), 1) << " degenerate cells of " << cells << '\n';
    }
  }
  return paths;
}

Paths cmd_qsens(const Experiment& e, const std::filesystem::path& out, std::ostream& log) {
  const auto c = e.section("qsens");
  const auto values = get_or(c, "values", std::vector<double>{0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9});
  std::vector<double> default_mask;
  for (const double v : e.scenario.q) default_mask.push_back(v > 0.0 ? 1.0 : 0.0);
  const auto mask = get_or(c, "mask", default_mask);
  if (mask.size() != e.scenario.compartments()) throw std::invalid_argument{"qsens mask must have length M"};
  if (values.empty()) throw std::invalid_argument{"qsens values must be nonempty"};
  for (const double v : values) {
    if (!(v > 0.0 && v < 1.0)) throw std::invalid_argument{"qsens values must lie in (0, 1)"};
  }
  const auto methods = methods_field(c, {"APF", "LA(1)", "LA(5)", "LA(10)", "LA(20)"});
  const auto particles = positive(c, "particles", 512);
  const auto replicates = positive(c, "replicates", 25);
  const auto bins = positive(c, "bins", 20);
  const auto prov = e.provenance("qsens");
  Paths paths{out / "qsens.csv"};
  CsvWriter csv{paths[0], prov,
                {"method", "q", "replicates", "degenerate_runs", "std", "ess_mode", "ess_q05", "ess_q95",
                 "ess_mean"}};
  for (const auto& method : methods) {
    for (const double v : values) {
      auto spec = base_spec(e, method, particles, replicates, false);
      std::vector<double> q(mask.size());
      for (std::size_t i = 0; i < q.size(); ++i) q[i] = mask[i] * v;
      spec.q = q;
      const auto runs = run_replicates(e.scenario, spec);
      std::vector<double> pooled;
      for (const auto& r : runs) {
        if (r.ess_pct.size() > 1) pooled.insert(pooled.end(), r.ess_pct.begin() + 1, r.ess_pct.end());
      }
      csv.row(method.label(), v, replicates, degenerate_count(runs), sample_std(log_likelihoods(runs)),
              histogram_mode(pooled, 0.0, 100.0, bins), quantile(pooled, 0.05), quantile(pooled, 0.95),
              mean(pooled));
      log << "qsens " << method.label() << " q=" << format_double(v) << '\n';
    }
  }
  return paths;
}

Paths cmd_pmmh(const Experiment& e, const std::filesystem::path& out, std::ostream& log) {
  const auto c = e.section("pmmh");
  const auto method = parse_method(get_or<std::string>(c, "method", "LA(5)"));
  const auto particles = positive(c, "particles", 256);
  const auto& sc = e.scenario;
  const std::size_t d = sc.dims;
  const std::size_t m = sc.compartments();

  PmmhConfig cfg;
  cfg.iterations = positive(c, "iterations", 2000);
  cfg.burn_in = get_or<std::size_t>(c, "burn_in", cfg.iterations / 2);
  cfg.thinning = positive(c, "thinning", 1);
  cfg.initial_scale = get_or(c, "initial_scale", 0.1);
  cfg.target_acceptance = get_or(c, "target_acceptance", 0.23);
  const double variance = get_or(c, "prior_variance", 3.0);

  // Inferred reporting rates: components with q > 0 in the scenario.
  std::vector<std::size_t> q_index;
  for (std::size_t i = 0; i < m; ++i) {
    if (sc.q[i] > 0.0) q_index.push_back(i);
  }
  const auto all_names = parameter_names(d, m);
  std::vector<std::string> names(all_names.begin(), all_names.begin() + static_cast<std::ptrdiff_t>(3 * d));
  for (const auto i : q_index) names.push_back(all_names[3 * d + i]);
  cfg.blocks = standard_blocks(d, q_index.size());
  if (q_index.empty()) cfg.blocks.pop_back();
  const auto prior = default_prior(3 * d, q_index.size(), variance);

  const auto data = simulate_data(sc);
  auto unpack = [&](std::span<const double> theta, ModelParams& params, std::vector<double>& q) {
    params = sc.params;
    params.beta0.assign(theta.begin(), theta.begin() + d);
    params.beta_lambda.assign(theta.begin() + d, theta.begin() + 2 * d);
    params.beta_gamma.assign(theta.begin() + 2 * d, theta.begin() + 3 * d);
    q = sc.q;
    for (std::size_t k = 0; k < q_index.size(); ++k) q[q_index[k]] = theta[3 * d + k];
  };
  const LogLikelihood likelihood = [&](std::span<const double> theta, std::uint64_t seed) {
    ModelParams params;
    std::vector<double> q;
    unpack(theta, params, q);
    const auto spec = build_spec(sc, params, data.covariates);
    FilterConfig fc;
    fc.method = method.method;
    fc.lookahead = method.lookahead;
    fc.particles = particles;
    fc.seed = seed;
    return run_filter(spec, data.y, build_rates(q, sc.horizon), fc).log_likelihood;
  };

  std::vector<double> dgp = flatten(sc.params, {});
  for (const auto i : q_index) dgp.push_back(sc.q[i]);
  std::vector<double> start = dgp;
  if (get_or<std::string>(c, "start", "dgp") == "prior") {
    Rng rng = Rng::stream(e.seed, 99);
    start = sample_prior(prior, rng);
  }
  const auto t0 = std::chrono::steady_clock::now();
  const auto chain = run_pmmh(likelihood, prior, start, cfg, e.seed, names);
  const double seconds = elapsed(t0);

  const auto prov = e.provenance("pmmh");
  Paths paths{out / "chain.csv", out / "pmmh_summary.csv", out / "predictive.csv", out / "timing_pmmh.csv"};
  write_chain(paths[0], chain, prov);
  {
    CsvWriter csv{paths[1], prov, {"parameter", "dgp", "mean", "lower95", "upper95", "covers_dgp"}};
    const auto rows = chain.kept();
    for (std::size_t k = 0; k < names.size(); ++k) {
      std::vector<double> draws;
      for (const auto r : rows) draws.push_back(chain.samples(r, k));
      const double l = quantile(draws, 0.025);
      const double u = quantile(draws, 0.975);
      csv.row(names[k], dgp[k], mean(draws), l, u, dgp[k] >= l && dgp[k] <= u ? 1 : 0);
    }
    csv.row(std::string{"acceptance_post_burn_in"}, kNaN, chain.post_burn_in_acceptance(), kNaN, kNaN, 0);
  }
  {
    const auto draws = positive(c, "predictive_draws", 200);
    const auto bands = posterior_predictive(
        chain,
        [&](std::span<const double> theta) {
          ModelParams params;
          std::vector<double> q;
          unpack(theta, params, q);
          return build_spec(sc, params, data.covariates);
        },
        [&](std::span<const double> theta) {
          ModelParams params;
          std::vector<double> q;
          unpack(theta, params, q);
          return build_rates(q, sc.horizon);
        },
        sc.horizon, draws, derive_seed(e.seed, 7));
    CsvWriter csv{paths[2], prov, {"kind", "time", "compartment", "lower", "median", "upper", "truth"}};
    for (std::size_t s = 0; s <= sc.horizon; ++s) {
      for (std::size_t i = 0; i < m; ++i) {
        csv.row(std::string{"latent"}, s, i + 1, bands.count_lower(s, i), bands.count_median(s, i),
                bands.count_upper(s, i), static_cast<double>(data.trajectory.counts[s][i]));
      }
    }
    const auto o = aggregate_counts(data.y, m);
    for (std::size_t s = 1; s <= sc.horizon; ++s) {
      for (std::size_t i = 0; i < m; ++i) {
        csv.row(std::string{"observed"}, s, i + 1, bands.observed_lower(s - 1, i), bands.observed_median(s - 1, i),
                bands.observed_upper(s - 1, i), static_cast<double>(o(s - 1, i)));
      }
    }
  }
  {
    CsvWriter csv{paths[3], prov, {"iterations", "seconds"}};
    csv.row(cfg.iterations, seconds);
  }
  log << "pmmh " << method.label() << ": " << cfg.iterations << " iterations, acceptance after burn-in "
      << format_double(chain.post_burn_in_acceptance()) << '\n';
  return paths;
}

Paths cmd_exact_check(const Experiment& e, const std::filesystem::path& out, std::ostream& log) {
  const auto c = e.section("exact_check");
  const auto methods = methods_field(c, {"APF", "LA(3)"});
  const auto particles = positive(c, "particles", 2000);
  const auto replicates = positive(c, "replicates", 200);
  const auto data = simulate_data(e.scenario);
  const auto spec = build_spec(e.scenario, e.scenario.params, data.covariates);
  const auto exact = exact_forward(spec, data.y, data.q);
  const JointStateIndex index{spec.population(), spec.compartments()};
  const auto exact_means = filtering_count_means(index, exact);
  const std::size_t m = spec.compartments();
  const std::size_t t = e.scenario.horizon;

  const auto prov = e.provenance("exact_check");
  Paths paths{out / "exact_check.csv", out / "exact_means.csv"};
  CsvWriter summary{paths[0], prov,
                    {"method", "particles", "replicates", "exact_log_lik", "mean_lik_ratio", "se_lik_ratio", "z"}};
  CsvWriter means{paths[1], prov, {"method", "time", "compartment", "exact_mean", "particle_mean", "se", "z"}};
  for (const auto& method : methods) {
    std::unique_ptr<LookaheadContext> context;
    if (method.method == Method::kLookahead) {
      context = std::make_unique<LookaheadContext>(spec, data.y, data.q, method.lookahead);
    }
    std::vector<FilterOutput> outputs(replicates);
    parallel_for(replicates, e.workers, [&](std::size_t begin, std::size_t end, std::size_t) {
      for (std::size_t r = begin; r < end; ++r) {
        FilterConfig cfg;
        cfg.method = method.method;
        cfg.lookahead = method.lookahead;
        cfg.particles = particles;
        cfg.seed = derive_seed(e.seed, r);
        outputs[r] = run_filter(spec, data.y, data.q, cfg, context.get());
      }
    });
    std::vector<double> ratios;
    for (const auto& o : outputs) ratios.push_back(std::exp(o.log_likelihood - exact.log_likelihood));
    const double se = sample_std(ratios) / std::sqrt(static_cast<double>(replicates));
    const double z = (mean(ratios) - 1.0) / se;
    summary.row(method.label(), particles, replicates, exact.log_likelihood, mean(ratios), se, z);
    double worst = 0.0;
    for (std::size_t s = 0; s <= t; ++s) {
      for (std::size_t i = 0; i < m; ++i) {
        std::vector<double> v;
        for (const auto& o : outputs) {
          if (!o.degenerate()) v.push_back(o.count_means(s, i));
        }
        const double mse = sample_std(v) / std::sqrt(static_cast<double>(v.size()));
        const double diff = mean(v) - exact_means(s, i);
        // Deterministic posteriors differ from the oracle by rounding only.
        const double zi = std::abs(diff) <= 1e-9 * std::max(1.0, std::abs(exact_means(s, i))) ? 0.0 : diff / mse;
        if (std::isfinite(zi)) worst = std::max(worst, std::abs(zi));
        means.row(method.label(), s, i + 1, exact_means(s, i), mean(v), mse, zi);
      }
    }
    log << "exact-check " << method.label() << ": likelihood ratio z=" << format_double(z)
        << ", worst mean |z|=" << format_double(worst) << '\n';
  }
  return paths;
}

}  // namespace

const std::vector<std::string>& command_names() {
  static const std::vector<std::string> names{"simulate", "filter", "ess",  "stddev",
                                              "grid",     "qsens",  "pmmh", "exact-check"};
  return names;
}

std::vector<std::filesystem::path> run_command(const std::string& command, const Experiment& experiment,
                                               const std::filesystem::path& out, std::ostream& log) {
  std::filesystem::create_directories(out);
  if (command == "simulate") return cmd_simulate(experiment, out, log);
  if (command == "filter") return cmd_filter(experiment, out, log);
  if (command == "ess") return cmd_ess(experiment, out, log);
  if (command == "stddev") return cmd_stddev(experiment, out, log);
  if (command == "grid") return cmd_grid(experiment, out, log);
  if (command == "qsens") return cmd_qsens(experiment, out, log);
  if (command == "pmmh") return cmd_pmmh(experiment, out, log);
  if (command == "exact-check") return cmd_exact_check(experiment, out, log);
  throw std::invalid_argument{"unknown command '" + command + "'"};
}

std::vector<std::filesystem::path> run_command(const std::string& command, const HarnessOptions& options,
                                               std::ostream& log) {
  const auto raw = read_json(options.config);
  const auto experiment =
      load_experiment(raw, options.config.parent_path(), options.seed, options.paper_scale, options.workers);
  return run_command(command, experiment, options.out, log);
}

}  // namespace epismc

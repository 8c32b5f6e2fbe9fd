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

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>

#include <unistd.h>

#include "epismc/errors.hpp"
#include "epismc/harness.hpp"
#include "epismc/io.hpp"
#include "epismc/scenario.hpp"

namespace epismc {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

json small_sis() {
  return json::parse(R"({
    "model": "sis", "N": 25, "d": 2, "t": 15,
    "params": {"beta0": [-2.0, 0.0], "beta_lambda": [-1.0, 2.0], "beta_gamma": [-1.0, -1.0]},
    "q": [0.8, 0.8], "seed": 3
  })");
}

json small_config() {
  json c;
  c["scenario"] = small_sis();
  c["seed"] = 7;
  c["filter"] = {{"methods", {"APF", "LA(2)"}}, {"particles", {16}}};
  c["ess"] = {{"methods", {"APF", "LA(2)"}}, {"particles", 16}, {"replicates", 3}};
  c["stddev"] = {{"methods", {"APF", "LA(2)"}}, {"particles", {16}}, {"replicates", 3}};
  c["grid"] = {{"methods", {"LA(2)"}}, {"particles", 16}, {"resolution", {3, 3}}};
  c["qsens"] = {{"methods", {"APF"}}, {"particles", 16}, {"replicates", 1}, {"values", {0.3, 0.7}}};
  c["pmmh"] = {{"method", "APF"}, {"particles", 16}, {"iterations", 40}, {"burn_in", 20}, {"predictive_draws", 5}};
  c["exact_check"] = {{"methods", {"APF"}}, {"particles", 50}, {"replicates", 4}};
  return c;
}

class TempDir {
 public:
  TempDir() {
    static int counter = 0;
    path_ = fs::temp_directory_path() / ("epismc_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  [[nodiscard]] const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

std::string slurp(const fs::path& p) {
  std::ifstream in{p, std::ios::binary};
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

TEST(Stats, SampleStd) {
  EXPECT_TRUE(std::isnan(sample_std({1.0})));
  EXPECT_EQ(sample_std({2.0, 2.0, 2.0}), 0.0);
  EXPECT_NEAR(sample_std({1.0, 2.0, 3.0, 4.0}), std::sqrt(5.0 / 3.0), 1e-15);
  EXPECT_EQ(sample_std({1.0, -std::numeric_limits<double>::infinity()}), std::numeric_limits<double>::infinity());
  EXPECT_EQ(mean({1.0, 2.0, 6.0}), 3.0);
}

TEST(Stats, QuantileAndMode) {
  EXPECT_EQ(quantile({3.0, 1.0, 2.0}, 0.5), 2.0);
  EXPECT_EQ(quantile({0.0, 10.0}, 0.25), 2.5);
  EXPECT_EQ(histogram_mode({1.0, 1.5, 7.0, 1.2}, 0.0, 10.0, 5), 1.0);
}

TEST(ParseMethod, Forms) {
  EXPECT_EQ(parse_method("bpf").method, Method::kBootstrap);
  EXPECT_EQ(parse_method("APF").method, Method::kAuxiliary);
  EXPECT_EQ(parse_method("LA(10)").lookahead, 10u);
  EXPECT_EQ(parse_method("la5").lookahead, 5u);
  EXPECT_EQ(parse_method("LA(5)").slug(), "LA5");
  EXPECT_THROW((void)parse_method("LA(x)"), std::invalid_argument);
  EXPECT_THROW((void)parse_method("SMC"), std::invalid_argument);
}

TEST(Scenario, RoundTripAndParameters) {
  const auto sc = parse_scenario(small_sis());
  const auto again = parse_scenario(to_json(sc));
  EXPECT_EQ(again.population, 25u);
  EXPECT_EQ(again.params.beta_lambda, sc.params.beta_lambda);
  ModelParams p = sc.params;
  std::vector<double> q = sc.q;
  set_parameter(p, q, "beta_lambda[1]", 0.25);
  set_parameter(p, q, "q[0]", 0.3);
  EXPECT_EQ(get_parameter(p, q, "beta_lambda[1]"), 0.25);
  EXPECT_EQ(q[0], 0.3);
  EXPECT_THROW(set_parameter(p, q, "beta_lambda[2]", 0.0), std::invalid_argument);
  EXPECT_THROW(set_parameter(p, q, "alpha[0]", 0.0), std::invalid_argument);
  const auto flat = flatten(p, q);
  EXPECT_EQ(flat.size(), 8u);
  EXPECT_EQ(parameter_names(2, 2)[3], "beta_lambda[1]");
  auto bad = small_sis();
  bad["params"]["beta0"] = {1.0};
  EXPECT_THROW((void)parse_scenario(bad), std::invalid_argument);
}

TEST(Scenario, NdgpDefaults) {
  const auto sc = parse_scenario(small_sis());
  EXPECT_EQ(filter_params(sc, true).beta_lambda, (std::vector<double>{-3.0, 0.0}));
  EXPECT_EQ(filter_params(sc, false).beta_lambda, sc.params.beta_lambda);
  auto seir = json::parse(R"({
    "model": "seir", "N": 20, "d": 2, "t": 5,
    "params": {"beta0": [-1.0, 0.0], "beta_lambda": [1.0, 2.0], "beta_gamma": [-1.0, -1.0], "rho": 0.2},
    "q": [0, 0, 0.4, 0.6], "seed": 1
  })");
  EXPECT_THROW((void)filter_params(parse_scenario(seir), true), std::invalid_argument);
  seir["ndgp"] = {{"beta_lambda", {0.0, 1.0}}};
  EXPECT_EQ(filter_params(parse_scenario(seir), true).beta_lambda, (std::vector<double>{0.0, 1.0}));
}

TEST(Scenario, SimulationDeterministic) {
  const auto sc = parse_scenario(small_sis());
  const auto a = simulate_data(sc);
  const auto b = simulate_data(sc);
  EXPECT_EQ(a.y, b.y);
  EXPECT_EQ(a.covariates, b.covariates);
  const auto c = simulate_data(sc, 99);
  EXPECT_EQ(a.covariates, c.covariates);
}

TEST(Io, ObservationsRoundTrip) {
  TempDir dir;
  const auto data = simulate_data(parse_scenario(small_sis()));
  const Provenance prov{0xabc, 1, "test"};
  write_observations(dir.path() / "obs.csv", data.y, prov);
  EXPECT_EQ(read_observations(dir.path() / "obs.csv", 15, 25), data.y);
  const auto rates = rates_from_json(rates_to_json(data.q));
  EXPECT_EQ(rates, data.q);
  const auto table = read_csv(dir.path() / "obs.csv");
  EXPECT_EQ(table.header, (std::vector<std::string>{"time", "individual", "value"}));
  EXPECT_EQ(format_double(std::numeric_limits<double>::infinity()), "inf");
  EXPECT_EQ(format_double(-std::numeric_limits<double>::infinity()), "-inf");
  EXPECT_EQ(format_double(0.1), "0.1");
}

Experiment experiment(std::size_t workers = 1) {
  return load_experiment(small_config(), fs::current_path(), std::nullopt, false, workers);
}

TEST(Commands, EveryCommandDeterministicAndWorkerInvariant) {
  std::ostringstream log;
  for (const auto& command : command_names()) {
    if (command == "exact-check") continue;  // covered with a tiny population below
    TempDir a;
    TempDir b;
    TempDir c;
    const auto files = run_command(command, experiment(1), a.path(), log);
    (void)run_command(command, experiment(1), b.path(), log);
    (void)run_command(command, experiment(3), c.path(), log);
    ASSERT_FALSE(files.empty()) << command;
    for (const auto& entry : fs::directory_iterator(a.path())) {
      const auto name = entry.path().filename();
      if (name.string().rfind("timing_", 0) == 0) continue;
      const auto content = slurp(entry.path());
      EXPECT_EQ(content, slurp(b.path() / name)) << command << " " << name;
      if (entry.path().extension() == ".csv") {
        EXPECT_EQ(content.rfind("# provenance command=", 0), 0u) << name;
      }
      // Worker count is part of the config hash, so compare bodies only.
      auto body = [](const std::string& s) { return s.substr(s.find('\n') + 1); };
      EXPECT_EQ(body(content), body(slurp(c.path() / name))) << command << " " << name;
    }
  }
}

TEST(Commands, ExactCheckOnTinyPopulation) {
  auto cfg = small_config();
  cfg["scenario"]["N"] = 3;
  cfg["scenario"]["t"] = 6;
  std::ostringstream log;
  TempDir a;
  TempDir b;
  (void)run_command("exact-check", load_experiment(cfg, fs::current_path(), std::nullopt, false), a.path(), log);
  (void)run_command("exact-check", load_experiment(cfg, fs::current_path(), std::nullopt, false, 2), b.path(), log);
  const auto first = slurp(a.path() / "exact_check.csv");
  const auto second = slurp(b.path() / "exact_check.csv");
  EXPECT_EQ(first.substr(first.find('\n')), second.substr(second.find('\n')));
  EXPECT_EQ(read_csv(a.path() / "exact_means.csv").rows.size(), 7u * 2u);
  cfg["scenario"]["N"] = 25;
  EXPECT_THROW((void)run_command("exact-check", load_experiment(cfg, fs::current_path(), std::nullopt, false),
                                 a.path(), log),
               StateSpaceTooLarge);
}

TEST(Commands, GridMaximumIsZero) {
  TempDir dir;
  std::ostringstream log;
  (void)run_command("grid", experiment(), dir.path(), log);
  const auto table = read_csv(dir.path() / "grid.csv");
  ASSERT_EQ(table.rows.size(), 9u);
  double best = -std::numeric_limits<double>::infinity();
  const auto col = std::find(table.header.begin(), table.header.end(), "loglik") - table.header.begin();
  for (const auto& row : table.rows) best = std::max(best, std::stod(row[col]));
  EXPECT_EQ(best, 0.0);
}

TEST(Commands, SingleReplicateStdIsNan) {
  TempDir dir;
  std::ostringstream log;
  (void)run_command("qsens", experiment(), dir.path(), log);
  const auto table = read_csv(dir.path() / "qsens.csv");
  const auto col = std::find(table.header.begin(), table.header.end(), "std") - table.header.begin();
  ASSERT_EQ(table.rows.size(), 2u);
  for (const auto& row : table.rows) EXPECT_EQ(row[col], "nan");
}

TEST(Commands, SingleParticleEssIsOne) {
  auto cfg = small_config();
  cfg["ess"] = {{"methods", {"APF"}}, {"particles", 1}, {"replicates", 1}};
  TempDir dir;
  std::ostringstream log;
  (void)run_command("ess", load_experiment(cfg, fs::current_path(), std::nullopt, false), dir.path(), log);
  const auto table = read_csv(dir.path() / "ess.csv");
  const auto col = std::find(table.header.begin(), table.header.end(), "ess") - table.header.begin();
  ASSERT_FALSE(table.rows.empty());
  for (const auto& row : table.rows) EXPECT_EQ(std::stod(row[col]), 1.0);
}

TEST(Commands, ConfigValidation) {
  std::ostringstream log;
  TempDir dir;
  auto cfg = small_config();
  cfg["stddev"]["replicates"] = 1;
  EXPECT_THROW((void)run_command("stddev", load_experiment(cfg, fs::current_path(), std::nullopt, false), dir.path(),
                                 log),
               std::invalid_argument);
  cfg = small_config();
  cfg["grid"]["resolution"] = {1, 3};
  EXPECT_THROW(
      (void)run_command("grid", load_experiment(cfg, fs::current_path(), std::nullopt, false), dir.path(), log),
      std::invalid_argument);
  EXPECT_THROW((void)run_command("nope", experiment(), dir.path(), log), std::invalid_argument);
  EXPECT_THROW((void)load_experiment(json::object(), fs::current_path(), std::nullopt, false), std::invalid_argument);
}

TEST(Experiment, PaperScaleMergeAndSeedOverride) {
  auto cfg = small_config();
  cfg["paper_scale"] = {{"ess", {{"replicates", 100}}}};
  const auto desk = load_experiment(cfg, fs::current_path(), std::nullopt, false);
  const auto paper = load_experiment(cfg, fs::current_path(), 42, true);
  EXPECT_EQ(desk.section("ess")["replicates"], 3);
  EXPECT_EQ(paper.section("ess")["replicates"], 100);
  EXPECT_EQ(paper.seed, 42u);
  EXPECT_NE(desk.provenance("ess").config_hash, paper.provenance("ess").config_hash);
}

}  // namespace
}  // namespace epismc

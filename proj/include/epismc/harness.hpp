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

#ifndef EPISMC_HARNESS_HPP
#define EPISMC_HARNESS_HPP

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "json.hpp"

#include "epismc/io.hpp"
#include "epismc/scenario.hpp"
#include "epismc/smc.hpp"

/**
 * \file
 * \brief Experiment commands behind the `epi-smc` CLI.
 *
 * Every command reads one JSON config (see docs/config.md), derives all randomness
 * from the master seed, and writes CSV files whose first line is a provenance comment.
 * Replicates fan out over `workers` threads; results are collected in replicate order,
 * so outputs do not depend on the worker count. Wall-clock timings go to separate
 * timing_*.csv files so that the other outputs are byte-reproducible.
 */

namespace epismc {

struct MethodSpec {
  Method method = Method::kAuxiliary;
  std::size_t lookahead = 0;

  [[nodiscard]] std::string label() const { return method_name(method, lookahead); }
  /// File-name friendly label, e.g. "LA5".
  [[nodiscard]] std::string slug() const;
};

/// Accepts "BPF", "APF", "LA(h)", "LAh" (case-insensitive). Throws std::invalid_argument.
[[nodiscard]] MethodSpec parse_method(const std::string& text);

struct HarnessOptions {
  std::filesystem::path config;
  std::optional<std::uint64_t> seed;
  std::filesystem::path out = "out";
  bool paper_scale = false;
  std::optional<std::size_t> workers;
};

/// Effective configuration of one invocation.
struct Experiment {
  nlohmann::json config;  ///< after merging the paper_scale block when requested
  Scenario scenario;
  std::uint64_t seed = 0;
  std::size_t workers = 1;
  bool paper_scale = false;

  [[nodiscard]] Provenance provenance(const std::string& command) const;
  /// Section of the config for a command, or an empty object.
  [[nodiscard]] nlohmann::json section(const std::string& name) const;
};

/// `base_dir` resolves a scenario given as a relative path.
[[nodiscard]] Experiment load_experiment(const nlohmann::json& raw, const std::filesystem::path& base_dir,
                                         std::optional<std::uint64_t> seed, bool paper_scale,
                                         std::optional<std::size_t> workers = {});

/// One filter configuration repeated over independent seeds.
struct ReplicateSpec {
  MethodSpec method;
  std::size_t particles = 512;
  std::size_t replicates = 25;
  std::uint64_t seed = 0;
  /// Regenerate data per replicate from the scenario seed; otherwise all replicates share the data.
  bool vary_data = false;
  bool ndgp = false;                       ///< filter with the scenario's NDGP parameters
  std::optional<std::vector<double>> q;    ///< reporting rates assumed by the filter
  std::size_t workers = 1;
  std::optional<std::size_t> horizon;      ///< overrides the scenario horizon
};

struct ReplicateRun {
  std::size_t replicate = 0;
  std::uint64_t seed = 0;
  double log_likelihood = 0.0;
  std::optional<std::size_t> degenerate_step;
  std::vector<double> ess_pct;  ///< per step 0..t
  double seconds = 0.0;
};

[[nodiscard]] std::vector<ReplicateRun> run_replicates(const Scenario& scenario, const ReplicateSpec& spec);

/// Sample standard deviation (n - 1); NaN for fewer than two values; +inf when any value is -inf.
[[nodiscard]] double sample_std(const std::vector<double>& values);
[[nodiscard]] double mean(const std::vector<double>& values);
/// Mean ESS% of a run over steps [from, t].
[[nodiscard]] double mean_ess_pct(const ReplicateRun& run, std::size_t from = 0);
[[nodiscard]] std::vector<double> log_likelihoods(const std::vector<ReplicateRun>& runs);
[[nodiscard]] std::size_t degenerate_count(const std::vector<ReplicateRun>& runs);

/// Linear-interpolation quantile.
[[nodiscard]] double quantile(std::vector<double> values, double prob);
/// Center of the most populated of `bins` equal bins on [lower, upper].
[[nodiscard]] double histogram_mode(const std::vector<double>& values, double lower, double upper, std::size_t bins);

/// Runs one command and returns the files written. Throws std::invalid_argument on a bad config.
std::vector<std::filesystem::path> run_command(const std::string& command, const HarnessOptions& options,
                                               std::ostream& log);
std::vector<std::filesystem::path> run_command(const std::string& command, const Experiment& experiment,
                                               const std::filesystem::path& out, std::ostream& log);

[[nodiscard]] const std::vector<std::string>& command_names();

}  // namespace epismc

#endif

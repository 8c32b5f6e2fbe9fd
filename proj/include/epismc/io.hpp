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

#ifndef EPISMC_IO_HPP
#define EPISMC_IO_HPP

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "epismc/meanfield.hpp"
#include "epismc/observe.hpp"
#include "epismc/pmmh.hpp"
#include "epismc/smc.hpp"

namespace epismc {

inline constexpr std::string_view kCsvSchemaVersion = "1";

/// FNV-1a 64-bit hash.
[[nodiscard]] std::uint64_t fnv1a(std::string_view text) noexcept;

/// Build-time git revision ("unknown" outside a checkout).
[[nodiscard]] std::string_view git_revision() noexcept;

/// Origin of an output file: hash of the effective config, master seed, code revision.
struct Provenance {
  std::uint64_t config_hash = 0;
  std::uint64_t seed = 0;
  std::string command;

  [[nodiscard]] std::string line() const;
};

/// Shortest round-trip decimal form; "inf", "-inf", "nan" for non-finite values.
[[nodiscard]] std::string format_double(double value);

/// CSV writer: provenance comment line, header row, then data rows.
class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& path, const Provenance& provenance, const std::vector<std::string>& header);

  template <class... Fields>
  void row(const Fields&... fields) {
    std::ostringstream line;
    bool first = true;
    ((line << (first ? "" : ",") << cell(fields), first = false), ...);
    out_ << line.str() << '\n';
  }

  void row(const std::vector<std::string>& cells);

 private:
  static std::string cell(double v) { return format_double(v); }
  static std::string cell(const std::string& v) { return v; }
  static std::string cell(const char* v) { return v; }
  template <class T>
  static std::string cell(const T& v) {
    return std::to_string(v);
  }

  std::ofstream out_;
};

/// Reads a CSV written by CsvWriter: skips '#' lines, returns the header and rows.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};
[[nodiscard]] CsvTable read_csv(const std::filesystem::path& path);

/// Observations as rows (time, individual, value) with only nonzero values listed.
void write_observations(const std::filesystem::path& path, const ObservationMatrix& y, const Provenance& provenance);
[[nodiscard]] ObservationMatrix read_observations(const std::filesystem::path& path, std::size_t horizon,
                                                  std::size_t population);

[[nodiscard]] nlohmann::json rates_to_json(const ReportingRates& q);
[[nodiscard]] ReportingRates rates_from_json(const nlohmann::json& j);

/// Rows (time, compartment, filtered, smoothed).
void write_marginals(const std::filesystem::path& path, const SmoothingMarginals& marginals,
                     const Provenance& provenance);

/// Rows (step, ess, ess_pct).
void write_ess(const std::filesystem::path& path, const FilterOutput& output, const Provenance& provenance);

[[nodiscard]] nlohmann::json to_json(const FilterOutput& output);

/// Rows (iteration, parameters..., log_lik, log_prior, accepted, block).
void write_chain(const std::filesystem::path& path, const Chain& chain, const Provenance& provenance);

[[nodiscard]] nlohmann::json read_json(const std::filesystem::path& path);
void write_json(const std::filesystem::path& path, const nlohmann::json& j);

}  // namespace epismc

#endif

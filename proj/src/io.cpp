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

#include "epismc/io.hpp"

#include <charconv>
#include <cmath>
#include <iomanip>
#include <stdexcept>

#ifndef EPISMC_GIT_REVISION
#define EPISMC_GIT_REVISION "unknown"
#endif

namespace epismc {

std::uint64_t fnv1a(std::string_view text) noexcept {
  std::uint64_t hash = 0xcbf29ce484222325ULL;
  for (const char c : text) {
    hash ^= static_cast<unsigned char>(c);
    hash *= 0x100000001b3ULL;
  }
  return hash;
}

std::string_view git_revision() noexcept { return EPISMC_GIT_REVISION; }

std::string Provenance::line() const {
  std::ostringstream out;
  out << "# provenance command=" << command << " config_hash=" << std::hex << std::setw(16) << std::setfill('0')
      << config_hash << std::dec << " seed=" << seed << " git=" << git_revision() << " schema=" << kCsvSchemaVersion;
  return out.str();
}

std::string format_double(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  char buffer[32];
  const auto result = std::to_chars(buffer, buffer + sizeof buffer, value);
  return {buffer, result.ptr};
}

CsvWriter::CsvWriter(const std::filesystem::path& path, const Provenance& provenance,
                     const std::vector<std::string>& header) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  out_.open(path, std::ios::binary | std::ios::trunc);
  if (!out_) throw std::runtime_error{"cannot write " + path.string()};
  out_ << provenance.line() << '\n';
  row(header);
}

void CsvWriter::row(const std::vector<std::string>& cells) {
  for (std::size_t k = 0; k < cells.size(); ++k) out_ << (k == 0 ? "" : ",") << cells[k];
  out_ << '\n';
}

CsvTable read_csv(const std::filesystem::path& path) {
  std::ifstream in{path};
  if (!in) throw std::runtime_error{"cannot read " + path.string()};
  CsvTable table;
  std::string line;
  bool header = true;
  while (std::getline(in, line)) {
    if (line.empty() || line.front() == '#') continue;
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream stream{line};
    while (std::getline(stream, cell, ',')) cells.push_back(cell);
    if (header) {
      table.header = std::move(cells);
      header = false;
    } else {
      table.rows.push_back(std::move(cells));
    }
  }
  return table;
}

void write_observations(const std::filesystem::path& path, const ObservationMatrix& y, const Provenance& provenance) {
  CsvWriter csv{path, provenance, {"time", "individual", "value"}};
  for (std::size_t s = 0; s < y.rows(); ++s) {
    for (std::size_t n = 0; n < y.cols(); ++n) {
      if (y(s, n) != 0) csv.row(s + 1, n, static_cast<int>(y(s, n)));
    }
  }
}

ObservationMatrix read_observations(const std::filesystem::path& path, std::size_t horizon, std::size_t population) {
  const auto table = read_csv(path);
  ObservationMatrix y(horizon, population, 0);
  for (const auto& row : table.rows) {
    if (row.size() != 3) throw std::invalid_argument{"observation rows need time, individual, value"};
    const auto s = std::stoul(row[0]);
    const auto n = std::stoul(row[1]);
    const auto v = std::stoul(row[2]);
    if (s == 0 || s > horizon || n >= population || v > 255) throw std::out_of_range{"observation out of range"};
    y(s - 1, n) = static_cast<std::uint8_t>(v);
  }
  return y;
}

nlohmann::json rates_to_json(const ReportingRates& q) {
  nlohmann::json rows = nlohmann::json::array();
  for (std::size_t s = 0; s < q.rows(); ++s) {
    const auto r = q.row(s);
    rows.push_back(std::vector<double>(r.begin(), r.end()));
  }
  return rows;
}

ReportingRates rates_from_json(const nlohmann::json& j) {
  const auto rows = j.get<std::vector<std::vector<double>>>();
  if (rows.empty()) return {};
  ReportingRates q(rows.size(), rows.front().size());
  for (std::size_t s = 0; s < rows.size(); ++s) {
    if (rows[s].size() != q.cols()) throw std::invalid_argument{"ragged reporting-rate rows"};
    for (std::size_t i = 0; i < q.cols(); ++i) q(s, i) = rows[s][i];
  }
  validate_rates(q, q.rows(), q.cols());
  return q;
}

void write_marginals(const std::filesystem::path& path, const SmoothingMarginals& marginals,
                     const Provenance& provenance) {
  CsvWriter csv{path, provenance, {"time", "compartment", "filtered", "smoothed"}};
  for (std::size_t s = 0; s < marginals.smoothed.rows(); ++s) {
    for (std::size_t i = 0; i < marginals.smoothed.cols(); ++i) {
      csv.row(s, i + 1, marginals.filtered(s, i), marginals.smoothed(s, i));
    }
  }
}

void write_ess(const std::filesystem::path& path, const FilterOutput& output, const Provenance& provenance) {
  CsvWriter csv{path, provenance, {"step", "ess", "ess_pct"}};
  for (std::size_t s = 0; s < output.ess.size(); ++s) {
    csv.row(s, output.ess[s], 100.0 * output.ess[s] / static_cast<double>(output.particles));
  }
}

nlohmann::json to_json(const FilterOutput& output) {
  auto number = [](double v) -> nlohmann::json {
    if (std::isfinite(v)) return v;
    return format_double(v);
  };
  nlohmann::json j;
  j["log_likelihood"] = number(output.log_likelihood);
  j["particles"] = output.particles;
  j["degenerate_step"] = output.degenerate_step ? nlohmann::json(*output.degenerate_step) : nlohmann::json(nullptr);
  auto& normalizers = j["log_normalizers"] = nlohmann::json::array();
  for (const double v : output.log_normalizers) normalizers.push_back(number(v));
  j["ess"] = output.ess;
  auto& means = j["count_means"] = nlohmann::json::array();
  for (std::size_t s = 0; s < output.count_means.rows(); ++s) {
    nlohmann::json row = nlohmann::json::array();
    for (const double v : output.count_means.row(s)) row.push_back(number(v));
    means.push_back(std::move(row));
  }
  return j;
}

void write_chain(const std::filesystem::path& path, const Chain& chain, const Provenance& provenance) {
  std::vector<std::string> header{"iteration"};
  header.insert(header.end(), chain.names.begin(), chain.names.end());
  header.insert(header.end(), {"log_lik", "log_prior", "accepted", "block"});
  CsvWriter csv{path, provenance, header};
  for (std::size_t it = 0; it < chain.iterations(); ++it) {
    std::vector<std::string> cells{std::to_string(it)};
    for (const double v : chain.samples.row(it)) cells.push_back(format_double(v));
    cells.push_back(format_double(chain.log_likelihoods[it]));
    cells.push_back(format_double(chain.log_priors[it]));
    cells.push_back(chain.accepted[it] != 0 ? "1" : "0");
    cells.push_back(std::to_string(chain.block[it]));
    csv.row(cells);
  }
}

nlohmann::json read_json(const std::filesystem::path& path) {
  std::ifstream in{path};
  if (!in) throw std::runtime_error{"cannot read " + path.string()};
  try {
    return nlohmann::json::parse(in, nullptr, true, true);
  } catch (const nlohmann::json::parse_error& e) {
    throw std::invalid_argument{path.string() + ": " + e.what()};
  }
}

void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out{path, std::ios::binary | std::ios::trunc};
  if (!out) throw std::runtime_error{"cannot write " + path.string()};
  out << j.dump(2) << '\n';
}

}  // namespace epismc

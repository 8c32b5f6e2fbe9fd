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

#include "epismc/lookahead.hpp"

#include <cmath>
#include <stdexcept>

#include "epismc/errors.hpp"
#include "epismc/logspace.hpp"
#include "epismc/simd/kernels.hpp"

namespace epismc {

namespace {

bool all_ones(std::span<const double> values) noexcept {
  for (const double value : values) {
    if (value != 1.0) return false;
  }
  return true;
}

std::vector<double> kernels_at(const ModelSpec& spec, std::span<const double> counts) {
  const std::size_t m = spec.compartments();
  std::vector<double> out(spec.population() * m * m);
  spec.transition().fill_kernels(counts, out);
  return out;
}

std::vector<double> mean_field_kernels(const ModelSpec& spec, const SmoothingMarginals& marginals, std::size_t tau) {
  return kernels_at(spec, count_estimate(marginals, spec.population(), tau));
}

std::vector<double> emission_at(const ObservationMatrix& y, const ReportingRates& q, std::size_t s) {
  std::vector<double> out(y.cols() * q.cols());
  emission_table(y.row(s - 1), q.row(s - 1), out);
  return out;
}

void check_window(const SmoothingMarginals& marginals, const ReportingRates& q, const ObservationMatrix& y,
                  std::size_t s, std::size_t h_eff) {
  const std::size_t horizon = y.rows();
  if (q.rows() != horizon || marginals.horizon() != horizon) {
    throw std::invalid_argument{"observations, rates and marginals must share the horizon"};
  }
  if (s > horizon || h_eff > horizon - s) throw std::out_of_range{"lookahead window exceeds the data"};
}

}  // namespace

void xi_backward_step(std::size_t m, std::span<const double> kernels, std::span<const double> emission,
                      std::span<const double> next, std::span<double> out) {
  const std::size_t n_pop = out.size() / m;
  std::vector<double> weighted(out.size());
  for (std::size_t k = 0; k < out.size(); ++k) weighted[k] = emission[k] * next[k];
  simd::batched_matvec(m, kernels, weighted, out);
  for (std::size_t n = 0; n < n_pop; ++n) {
    const std::span<const double> row{weighted.data() + n * m, m};
    if (all_ones(row)) {
      for (std::size_t i = 0; i < m; ++i) out[n * m + i] = 1.0;
    }
  }
}

XiTable xi_recursion(const ModelSpec& spec, const SmoothingMarginals& marginals, const ReportingRates& q,
                     const ObservationMatrix& y, std::size_t s, std::size_t h_eff) {
  check_window(marginals, q, y, s, h_eff);
  const std::size_t m = spec.compartments();
  XiTable xi(spec.population(), m, 1.0);
  XiTable next(spec.population(), m);
  for (std::size_t tau = s + h_eff; tau-- > s;) {
    std::swap(xi, next);
    const auto kernels = mean_field_kernels(spec, marginals, tau);
    const auto emission = emission_at(y, q, tau + 1);
    xi_backward_step(m, kernels, emission, next.values(), xi.values());
  }
  return xi;
}

XiTables::XiTables(const ModelSpec& spec, const SmoothingMarginals& marginals, const ReportingRates& q,
                   const ObservationMatrix& y, std::size_t lookahead, XiStorage storage)
    : spec_{&spec}, marginals_{&marginals}, q_{&q}, y_{&y}, lookahead_{lookahead}, horizon_{y.rows()},
      storage_{storage} {
  check_window(marginals, q, y, 0, 0);
  validate_observations(y, horizon_, spec.population(), spec.compartments());
  if (storage_ == XiStorage::kStreaming) return;
  kernels_.reserve(horizon_);
  emission_.reserve(horizon_);
  for (std::size_t tau = 0; tau < horizon_; ++tau) {
    kernels_.push_back(lookahead_ > 0 ? mean_field_kernels(spec, marginals, tau) : std::vector<double>{});
    emission_.push_back(emission_at(y, q, tau + 1));
  }
  tables_.resize(horizon_ + 1);
  for (std::size_t s = 0; s <= horizon_; ++s) compute(s, tables_[s]);
}

void XiTables::compute(std::size_t s, XiTable& out) const {
  const std::size_t m = spec_->compartments();
  out = XiTable(spec_->population(), m, 1.0);
  XiTable next(spec_->population(), m);
  const std::size_t h_eff = effective_window(s);
  for (std::size_t tau = s + h_eff; tau-- > s;) {
    std::swap(out, next);
    if (storage_ == XiStorage::kPrecomputed) {
      xi_backward_step(m, kernels_[tau], emission_[tau], next.values(), out.values());
    } else {
      xi_backward_step(m, mean_field_kernels(*spec_, *marginals_, tau), emission_at(*y_, *q_, tau + 1),
                       next.values(), out.values());
    }
  }
}

const XiTable& XiTables::at(std::size_t s) const {
  if (s > horizon_) throw std::out_of_range{"xi table requested beyond the horizon"};
  if (storage_ == XiStorage::kPrecomputed) return tables_[s];
  if (streaming_time_ != s) {
    compute(s, streaming_table_);
    streaming_time_ = s;
  }
  return streaming_table_;
}

XiTildeTable xi_tilde(const ModelSpec& spec, const XiTable& xi_at_s, std::span<const double> c_prev,
                      std::span<const std::uint8_t> y_s, std::span<const double> q_s) {
  const std::size_t m = spec.compartments();
  const auto kernels = kernels_at(spec, c_prev);
  const auto emission = emission_table(y_s, q_s);
  XiTildeTable out(spec.population(), m);
  xi_backward_step(m, kernels, emission.values(), xi_at_s.values(), out.values());
  return out;
}

XiTildeTable xi_tilde_initial(const ModelSpec& spec, const XiTable& xi_at_0) {
  const auto& p0 = spec.initial_probs();
  XiTildeTable out(spec.population(), 1);
  for (std::size_t n = 0; n < spec.population(); ++n) {
    const auto xi = xi_at_0.row(n);
    if (all_ones(xi)) {
      out(n, 0) = 1.0;
      continue;
    }
    double total = 0.0;
    for (std::size_t j = 0; j < spec.compartments(); ++j) total += p0(n, j) * xi[j];
    out(n, 0) = total;
  }
  return out;
}

namespace {

// Unnormalized proposal masses K_{n,c}(x_prev(n), j) e_s(j) xi(n, j).
Matrix<double> proposal_masses(const ModelSpec& spec, std::span<const Compartment> x_prev, const XiTable& xi_at_s,
                               std::span<const std::uint8_t> y_s, std::span<const double> q_s,
                               std::vector<double>& totals) {
  const std::size_t m = spec.compartments();
  const std::size_t n_pop = spec.population();
  const auto counts = to_real(count_compartments(x_prev, m));
  std::vector<double> rows(n_pop * m);
  spec.transition().fill_rows(counts, x_prev, rows);
  auto weights = emission_table(y_s, q_s);
  for (std::size_t k = 0; k < weights.size(); ++k) weights.values()[k] *= xi_at_s.values()[k];
  Matrix<double> masses(n_pop, m);
  totals.assign(n_pop, 0.0);
  simd::weighted_row_sums(m, rows, weights.values(), masses.values(), totals);
  return masses;
}

}  // namespace

Matrix<double> proposal_probabilities(const ModelSpec& spec, std::span<const Compartment> x_prev,
                                      const XiTable& xi_at_s, std::span<const std::uint8_t> y_s,
                                      std::span<const double> q_s) {
  std::vector<double> totals;
  auto masses = proposal_masses(spec, x_prev, xi_at_s, y_s, q_s, totals);
  for (std::size_t n = 0; n < masses.rows(); ++n) {
    if (!(totals[n] > 0.0)) throw DegenerateProposal{n};
    for (auto& value : masses.row(n)) value /= totals[n];
  }
  return masses;
}

ProposalStep propose_step(const ModelSpec& spec, std::span<const Compartment> x_prev, const XiTable& xi_at_s,
                          const XiTildeTable& xi_tilde, std::span<const std::uint8_t> y_s,
                          std::span<const double> q_s, Rng& rng) {
  std::vector<double> totals;
  const auto masses = proposal_masses(spec, x_prev, xi_at_s, y_s, q_s, totals);
  ProposalStep step{PopulationState(spec.population()), 0.0};
  for (std::size_t n = 0; n < spec.population(); ++n) {
    const double normalizer = xi_tilde(n, x_prev[n]);
    if (!(normalizer > 0.0)) throw DegenerateProposal{n};
    const std::size_t j = sample_categorical(masses.row(n), normalizer, rng.uniform());
    step.x[n] = static_cast<Compartment>(j);
    step.log_density += std::log(masses(n, j) / normalizer);
  }
  return step;
}

ProposalStep propose_initial(const ModelSpec& spec, const XiTable& xi_at_0, Rng& rng) {
  const std::size_t m = spec.compartments();
  const auto normalizers = xi_tilde_initial(spec, xi_at_0);
  const auto& p0 = spec.initial_probs();
  ProposalStep step{PopulationState(spec.population()), 0.0};
  std::vector<double> masses(m);
  for (std::size_t n = 0; n < spec.population(); ++n) {
    const double normalizer = normalizers(n, 0);
    if (!(normalizer > 0.0)) throw DegenerateProposal{n};
    for (std::size_t j = 0; j < m; ++j) masses[j] = p0(n, j) * xi_at_0(n, j);
    const std::size_t j = sample_categorical(masses, normalizer, rng.uniform());
    step.x[n] = static_cast<Compartment>(j);
    step.log_density += std::log(masses[j] / normalizer);
  }
  return step;
}

double log_twist(std::span<const Compartment> x, const XiTildeTable& xi_tilde) {
  std::vector<double> picked(x.size());
  for (std::size_t n = 0; n < x.size(); ++n) picked[n] = xi_tilde(n, x[n]);
  return simd::sum_log(picked);
}

std::vector<double> resampling_probs(std::span<const double> log_weights, std::span<const double> log_twists,
                                     std::size_t step) {
  if (log_weights.size() != log_twists.size()) throw std::invalid_argument{"weights and twists differ in length"};
  std::vector<double> combined(log_weights.size());
  for (std::size_t p = 0; p < combined.size(); ++p) combined[p] = log_weights[p] + log_twists[p];
  auto probs = normalize_log(combined);
  if (log_sum_exp(combined) == kNegInf) throw DegenerateFilter{step};
  return probs;
}

}  // namespace epismc

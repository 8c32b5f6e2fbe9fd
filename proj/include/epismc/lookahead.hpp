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

#ifndef EPISMC_LOOKAHEAD_HPP
#define EPISMC_LOOKAHEAD_HPP

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "epismc/matrix.hpp"
#include "epismc/meanfield.hpp"
#include "epismc/model.hpp"
#include "epismc/observe.hpp"
#include "epismc/rng.hpp"

/**
 * \file
 * \brief h-step lookahead proposal and resampling weights.
 *
 * For a proposal at time s the table xi(n, i) approximates the probability of
 * individual n's future observations y_{s+1}, ..., y_{s+h} given it is in
 * compartment i at time s, with the population counts of the window frozen at
 * the mean-field estimates N * m_{tau|t}. Conditioning on frozen counts makes
 * individuals independent, so one backward step costs O(N M^2).
 *
 * xi_tilde(n, j) additionally folds in the current observation y_s and the
 * actual counts c_{s-1} of the particle being extended:
 *
 *     xi_tilde(n, j) = sum_k K_{n,c_{s-1}}(j, k) e_s(k; y_s^n) xi(n, k)
 *
 * with the emission factor e(k; 0) = 1 - q^k, e(k; k + 1) = q^k, 0 otherwise.
 * The proposal for individual n is proportional to the summand above, and its
 * normalizer is xi_tilde(n, x_{s-1}^n).
 */

namespace epismc {

struct LookaheadConfig {
  std::size_t horizon = 0;  ///< h, number of future observations folded into each proposal
};

/// N x M table, entry (n, i) = xi for individual n in compartment i.
using XiTable = Matrix<double>;

/// N x M table for s >= 1; N x 1 (one scalar per individual) at s = 0.
using XiTildeTable = Matrix<double>;

/// One backward step: out(n, i) = sum_j kernels(n, i, j) * emission(n, j) * next(n, j).
/// Rows whose emission and next factors are all exactly 1 yield exactly 1.
void xi_backward_step(std::size_t m, std::span<const double> kernels, std::span<const double> emission,
                      std::span<const double> next, std::span<double> out);

/// xi at time s for a window of h_eff future observations (h_eff <= t - s).
/// Kernels of step tau -> tau + 1 are evaluated at counts N * m_{tau|t}.
[[nodiscard]] XiTable xi_recursion(const ModelSpec& spec, const SmoothingMarginals& marginals,
                                   const ReportingRates& q, const ObservationMatrix& y, std::size_t s,
                                   std::size_t h_eff);

enum class XiStorage {
  kPrecomputed,  ///< every table kept in memory, O(t N M)
  kStreaming,    ///< tables rebuilt on request from the window, O(N M) memory per table
};

/// xi tables for every proposal time s in [0, t] at a fixed lookahead h,
/// truncated to h_eff = min(h, t - s) at the end of the data.
///
/// Holds references to its inputs, which must outlive it.
class XiTables {
 public:
  XiTables(const ModelSpec& spec, const SmoothingMarginals& marginals, const ReportingRates& q,
           const ObservationMatrix& y, std::size_t lookahead, XiStorage storage = XiStorage::kPrecomputed);

  [[nodiscard]] std::size_t lookahead() const noexcept { return lookahead_; }
  [[nodiscard]] std::size_t horizon() const noexcept { return horizon_; }
  [[nodiscard]] std::size_t effective_window(std::size_t s) const noexcept {
    return lookahead_ < horizon_ - s ? lookahead_ : horizon_ - s;
  }

  /// xi_{h,s}. In streaming mode the returned reference is valid until the next call
  /// and the object must not be shared across threads.
  [[nodiscard]] const XiTable& at(std::size_t s) const;

 private:
  void compute(std::size_t s, XiTable& out) const;

  const ModelSpec* spec_;
  const SmoothingMarginals* marginals_;
  const ReportingRates* q_;
  const ObservationMatrix* y_;
  std::size_t lookahead_;
  std::size_t horizon_;
  XiStorage storage_;
  // precomputed mode only
  std::vector<std::vector<double>> kernels_;   // per tau in [0, t-1]: N x M x M at N * m_{tau|t}
  std::vector<std::vector<double>> emission_;  // per time s in [1, t]: N x M
  std::vector<XiTable> tables_;
  mutable XiTable streaming_table_;
  mutable std::optional<std::size_t> streaming_time_;
};

/// xi_tilde at s >= 1 for a particle whose counts at s - 1 are `c_prev`.
[[nodiscard]] XiTildeTable xi_tilde(const ModelSpec& spec, const XiTable& xi_at_s, std::span<const double> c_prev,
                                    std::span<const std::uint8_t> y_s, std::span<const double> q_s);

/// xi_tilde at s = 0: one scalar p_{n,0}^T xi(n, .) per individual (N x 1).
[[nodiscard]] XiTildeTable xi_tilde_initial(const ModelSpec& spec, const XiTable& xi_at_0);

struct ProposalStep {
  PopulationState x;
  double log_density = 0.0;
};

/// Normalized categorical parameters of the lookahead proposal at s >= 1 (N x M).
/// Throws DegenerateProposal when an individual has zero mass.
[[nodiscard]] Matrix<double> proposal_probabilities(const ModelSpec& spec, std::span<const Compartment> x_prev,
                                                    const XiTable& xi_at_s, std::span<const std::uint8_t> y_s,
                                                    std::span<const double> q_s);

/// Samples x_s from the lookahead proposal given x_{s-1}. The normalizers are taken
/// from `xi_tilde`, which must have been built from x_prev's counts.
/// Throws DegenerateProposal.
[[nodiscard]] ProposalStep propose_step(const ModelSpec& spec, std::span<const Compartment> x_prev,
                                        const XiTable& xi_at_s, const XiTildeTable& xi_tilde,
                                        std::span<const std::uint8_t> y_s, std::span<const double> q_s, Rng& rng);

/// Samples x_0 with mass proportional to xi(n, j) p_{n,0}(j). Throws DegenerateProposal.
[[nodiscard]] ProposalStep propose_initial(const ModelSpec& spec, const XiTable& xi_at_0, Rng& rng);

/// sum_n log xi_tilde(n, x(n)): the log twisting factor of a particle.
[[nodiscard]] double log_twist(std::span<const Compartment> x, const XiTildeTable& xi_tilde);

/// r(p) proportional to exp(log_weights[p] + log_twists[p]), normalized in log space.
/// Throws DegenerateFilter(step) when every particle has zero mass.
[[nodiscard]] std::vector<double> resampling_probs(std::span<const double> log_weights,
                                                   std::span<const double> log_twists, std::size_t step = 0);

}  // namespace epismc

#endif

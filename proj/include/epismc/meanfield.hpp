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

#ifndef EPISMC_MEANFIELD_HPP
#define EPISMC_MEANFIELD_HPP

#include <cstddef>
#include <memory>
#include <span>
#include <vector>

#include "epismc/matrix.hpp"
#include "epismc/model.hpp"
#include "epismc/observe.hpp"

/**
 * \file
 * \brief Multinomial approximation of count filtering and smoothing.
 *
 * The heterogeneous population is replaced by its average individual
 * (mean initial law, mean kernel) and the granular data by per-compartment
 * report tallies. A forward pass and a reverse-kernel backward pass then give
 * probability vectors m_{s|s} and m_{s|t}; N * m_{s|t} is the a priori count
 * estimate consumed by the lookahead proposal.
 */

namespace epismc {

class MeanModel {
 public:
  MeanModel(std::vector<double> p_bar0, std::shared_ptr<const TransitionKernel> kernel);

  [[nodiscard]] std::size_t population() const noexcept { return kernel_->population(); }
  [[nodiscard]] std::size_t compartments() const noexcept { return p_bar0_.size(); }
  [[nodiscard]] const std::vector<double>& p_bar0() const noexcept { return p_bar0_; }

  /// Elementwise average over individuals of K_{n,c}.
  [[nodiscard]] Matrix<double> k_bar(std::span<const double> counts) const;

 private:
  std::vector<double> p_bar0_;
  std::shared_ptr<const TransitionKernel> kernel_;
};

[[nodiscard]] MeanModel mean_model(const ModelSpec& spec);

struct ForwardMarginals {
  Matrix<double> filtered;   // (t + 1) x M, row s = m_{s|s}
  Matrix<double> predicted;  // t x M, row s - 1 = one-step prediction of time s from s - 1
  std::vector<char> complete;  // t + 1 flags: every individual reported at s (never at s = 0)
};

struct SmoothingMarginals {
  Matrix<double> filtered;                // (t + 1) x M
  Matrix<double> predicted;               // t x M
  Matrix<double> smoothed;                // (t + 1) x M, row s = m_{s|t}
  std::vector<Matrix<double>> reverse_kernels;  // L_0 .. L_{t-1}

  [[nodiscard]] std::size_t horizon() const noexcept { return smoothed.rows() == 0 ? 0 : smoothed.rows() - 1; }
};

/// Throws std::invalid_argument when some o_s exceeds N in total or shapes disagree.
[[nodiscard]] ForwardMarginals forward_pass(const MeanModel& mm, const AggregateCounts& o, const ReportingRates& q,
                                            std::size_t population);

/// Reverse-kernel smoothing. At completely reported times the counts are known, so
/// m_{s|t} is pinned to m_{s|s} = o_s / N.
[[nodiscard]] SmoothingMarginals backward_pass(const MeanModel& mm, ForwardMarginals forward, std::size_t population);

/// Forward and backward passes from granular data.
[[nodiscard]] SmoothingMarginals multinomial_smoother(const ModelSpec& spec, const ObservationMatrix& y,
                                                      const ReportingRates& q);

/// N * m_{s|t}.
[[nodiscard]] std::vector<double> count_estimate(const SmoothingMarginals& marginals, std::size_t population,
                                                 std::size_t s);

}  // namespace epismc

#endif

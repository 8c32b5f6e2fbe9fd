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

#ifndef EPISMC_SMC_HPP
#define EPISMC_SMC_HPP

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "epismc/lookahead.hpp"
#include "epismc/matrix.hpp"
#include "epismc/meanfield.hpp"
#include "epismc/model.hpp"
#include "epismc/observe.hpp"
#include "epismc/rng.hpp"

/**
 * \file
 * \brief Generic particle filter with bootstrap, auxiliary and lookahead configurations.
 *
 * Each step resamples ancestors from r_{s-1}, corrects their weights by w / r,
 * proposes x_s and reweights by p(x_s | x_{s-1}) p(y_s | x_s) / q(x_s | x_{s-1}).
 * All weights live in log space. The likelihood estimate is the product of the
 * per-step sums of weights.
 *
 * Method    | proposal                          | resampling r_{s-1}
 * --------- | --------------------------------- | --------------------------------
 * Bootstrap | p(x_s | x_{s-1})                  | normalized weights
 * Auxiliary | p(x_s | x_{s-1}, y_s)             | normalized weights
 * Lookahead | approx. p(x_s | x_{s-1}, y_{s:s+h}) | weights times prod_n xi_tilde
 *
 * Random numbers are drawn from per-(step, particle) streams and reductions run
 * in particle order, so results for a seed do not depend on the worker count.
 */

namespace epismc {

enum class Method { kBootstrap, kAuxiliary, kLookahead };

enum class ResamplingScheme { kMultinomial, kSystematic };

/// How resampled weights w / r are scaled.
enum class WeightCorrection {
  kUnbiased,        ///< w / (P r) with w normalized beforehand; keeps the likelihood estimate unbiased
  kSelfNormalized,  ///< w / r renormalized to sum to 1 over the resampled particles
};

[[nodiscard]] std::string method_name(Method method, std::size_t lookahead = 0);

struct FilterConfig {
  Method method = Method::kAuxiliary;
  std::size_t lookahead = 0;  ///< h, used by kLookahead
  std::size_t particles = 512;
  std::uint64_t seed = 0;
  ResamplingScheme resampling = ResamplingScheme::kMultinomial;
  /// Resample only when ESS < trigger * P. Empty: resample at every step.
  std::optional<double> ess_trigger;
  WeightCorrection correction = WeightCorrection::kUnbiased;
  std::size_t workers = 1;
  bool store_particles = false;
  XiStorage xi_storage = XiStorage::kPrecomputed;
};

struct FilterOutput {
  /// Estimate of log p(y_{1:t}); -inf when the filter degenerates.
  double log_likelihood = 0.0;
  /// Per-step log normalizers; entry 0 is the initial importance step. Their sum is
  /// log_likelihood. Stops at the failing step for a degenerate run.
  std::vector<double> log_normalizers;
  /// ESS of the resampling distribution r_s for s < t and of the final weights at t.
  /// Zero from the failing step on.
  std::vector<double> ess;
  /// (t + 1) x M weighted particle means of c_s; NaN after degeneracy.
  Matrix<double> count_means;
  std::optional<std::size_t> degenerate_step;
  std::size_t particles = 0;
  /// Filled when FilterConfig::store_particles is set: per time, P x N states and log weights.
  std::vector<Matrix<Compartment>> clouds;
  std::vector<std::vector<double>> cloud_log_weights;

  [[nodiscard]] bool degenerate() const noexcept { return degenerate_step.has_value(); }
};

/// Mean-field marginals and xi tables for one (model, data, h). Reused across filter runs.
/// Keeps references to spec, y and q.
class LookaheadContext {
 public:
  LookaheadContext(const ModelSpec& spec, const ObservationMatrix& y, const ReportingRates& q, std::size_t lookahead,
                   XiStorage storage = XiStorage::kPrecomputed);

  [[nodiscard]] const SmoothingMarginals& marginals() const noexcept { return *marginals_; }
  [[nodiscard]] const XiTables& xi() const noexcept { return *xi_; }
  [[nodiscard]] std::size_t lookahead() const noexcept { return xi_->lookahead(); }

 private:
  std::unique_ptr<SmoothingMarginals> marginals_;
  std::unique_ptr<XiTables> xi_;
};

/// Runs the filter. A lookahead context is built internally when needed and not supplied;
/// a supplied context must match the config's lookahead. Throws std::invalid_argument on
/// inconsistent inputs. Degeneracy is reported in the output, not thrown.
[[nodiscard]] FilterOutput run_filter(const ModelSpec& spec, const ObservationMatrix& y, const ReportingRates& q,
                                      const FilterConfig& config, const LookaheadContext* context = nullptr);

/// log w~ for resampled particles given current log weights, log twists (empty: no twist,
/// i.e. r = normalized weights) and the ancestors drawn from r. Throws DegenerateFilter(step)
/// when r has no mass.
[[nodiscard]] std::vector<double> corrected_log_weights(std::span<const double> log_weights,
                                                        std::span<const double> log_twists,
                                                        std::span<const std::size_t> ancestors,
                                                        WeightCorrection correction, std::size_t step = 0);

/// 1 / sum_i p_i^2 for normalized probabilities.
[[nodiscard]] double ess(std::span<const double> probs);

/// Normalized categorical parameters of p(x_s | x_{s-1}, y_s) per individual (N x M).
/// Throws DegenerateProposal.
[[nodiscard]] Matrix<double> apf_proposal_probabilities(const ModelSpec& spec, std::span<const Compartment> x_prev,
                                                        std::span<const std::uint8_t> y_s,
                                                        std::span<const double> q_s);

/// Samples from p(x_s | x_{s-1}, y_s). Throws DegenerateProposal.
[[nodiscard]] ProposalStep apf_propose(const ModelSpec& spec, std::span<const Compartment> x_prev,
                                       std::span<const std::uint8_t> y_s, std::span<const double> q_s, Rng& rng);

/// log p(x_0).
[[nodiscard]] double initial_logprob(const ModelSpec& spec, std::span<const Compartment> x0);

/// log p(x_s | x_{s-1}) = sum_n log K_{n,c_{s-1}}(x_{s-1}^n, x_s^n).
[[nodiscard]] double transition_logprob(const ModelSpec& spec, std::span<const Compartment> x_prev,
                                        std::span<const Compartment> x_s);

/// log [p(x_s | x_{s-1}) p(y_s | x_s) / q(x_s | x_{s-1})] given log q.
[[nodiscard]] double incremental_log_weight(const ModelSpec& spec, std::span<const Compartment> x_prev,
                                            std::span<const Compartment> x_s, std::span<const std::uint8_t> y_s,
                                            std::span<const double> q_s, double log_proposal);

}  // namespace epismc

#endif

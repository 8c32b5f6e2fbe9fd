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

#ifndef EPISMC_MODEL_HPP
#define EPISMC_MODEL_HPP

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "epismc/matrix.hpp"
#include "epismc/rng.hpp"

/**
 * \file
 * \brief Individual-based compartmental models and their simulation.
 *
 * Compartments are 0-based in code (SIS: 0 = S, 1 = I; SEIR: 0 = S, 1 = E,
 * 2 = I, 3 = R). File formats and observations use the 1-based convention,
 * with 0 reserved for "unreported".
 */

namespace epismc {

using Compartment = std::uint8_t;

/// x_t: compartment of every individual.
using PopulationState = std::vector<Compartment>;

/// c_t: number of individuals per compartment.
using CompartmentCounts = std::vector<std::int64_t>;

/// N x d covariates; row n is w_n, column 0 is the intercept.
using Covariates = Matrix<double>;

/// Count-conditional transition kernels K_{n,c} of a population.
///
/// Counts are real-valued: the lookahead machinery evaluates kernels at
/// mean-field count estimates N * m that need not be integers.
class TransitionKernel {
 public:
  virtual ~TransitionKernel() = default;

  [[nodiscard]] virtual std::size_t population() const noexcept = 0;
  [[nodiscard]] virtual std::size_t compartments() const noexcept = 0;

  /// Writes K_{n,c} (M x M, row-major) into `out`.
  virtual void kernel(std::size_t n, std::span<const double> counts, std::span<double> out) const = 0;

  /// Writes K_{n,c} for every individual into `out` (N x M x M).
  virtual void fill_kernels(std::span<const double> counts, std::span<double> out) const;

  /// Writes row states[n] of K_{n,c} for every individual into `out` (N x M).
  virtual void fill_rows(std::span<const double> counts, std::span<const Compartment> states,
                         std::span<double> out) const;
};

/// Kernel defined by a per-individual callback. Convenient for tests and toy models.
class FunctionKernel final : public TransitionKernel {
 public:
  using Builder = std::function<void(std::size_t n, std::span<const double> counts, std::span<double> out)>;

  FunctionKernel(std::size_t population, std::size_t compartments, Builder builder);

  [[nodiscard]] std::size_t population() const noexcept override { return population_; }
  [[nodiscard]] std::size_t compartments() const noexcept override { return compartments_; }
  void kernel(std::size_t n, std::span<const double> counts, std::span<double> out) const override;

 private:
  std::size_t population_;
  std::size_t compartments_;
  Builder builder_;
};

/// Population size, compartments, initial laws p_{n,0} and kernels K_{n,c}.
class ModelSpec {
 public:
  /// Throws std::invalid_argument unless initial_probs is N x M row-stochastic (1e-12)
  /// and matches the kernel's dimensions.
  ModelSpec(Matrix<double> initial_probs, std::shared_ptr<const TransitionKernel> kernel);

  [[nodiscard]] std::size_t population() const noexcept { return initial_probs_.rows(); }
  [[nodiscard]] std::size_t compartments() const noexcept { return initial_probs_.cols(); }
  [[nodiscard]] const Matrix<double>& initial_probs() const noexcept { return initial_probs_; }
  [[nodiscard]] const TransitionKernel& transition() const noexcept { return *kernel_; }
  [[nodiscard]] std::shared_ptr<const TransitionKernel> transition_ptr() const noexcept { return kernel_; }

  /// K_{n,c} as an M x M matrix.
  [[nodiscard]] Matrix<double> kernel(std::size_t n, std::span<const double> counts) const;

 private:
  Matrix<double> initial_probs_;
  std::shared_ptr<const TransitionKernel> kernel_;
};

struct SISParams {
  std::vector<double> beta0;
  std::vector<double> beta_lambda;
  std::vector<double> beta_gamma;
};

struct SEIRParams {
  std::vector<double> beta0;
  std::vector<double> beta_lambda;
  double rho = 1.0;
  std::vector<double> beta_gamma;
};

/// Logistic function, evaluated without overflow for large |z|.
[[nodiscard]] double logistic(double z) noexcept;

/// Heterogeneous SIS model (M = 2). Throws std::invalid_argument on dimension mismatch.
[[nodiscard]] ModelSpec sis_spec(const SISParams& params, const Covariates& covariates);

/// Heterogeneous SEIR model (M = 4). Throws std::invalid_argument on dimension mismatch or rho <= 0.
[[nodiscard]] ModelSpec seir_spec(const SEIRParams& params, const Covariates& covariates);

/// Covariates w_n = [1, z_n(1), ..., z_n(d-1)] with independent standard normal z.
[[nodiscard]] Covariates generate_covariates(std::size_t population, std::size_t dims, Rng& rng);

/// Tally of states per compartment. Throws std::out_of_range for a state >= M and
/// std::invalid_argument for an empty population.
[[nodiscard]] CompartmentCounts count_compartments(std::span<const Compartment> states, std::size_t compartments);

/// Counts as reals, for kernel evaluation.
[[nodiscard]] std::vector<double> to_real(const CompartmentCounts& counts);

struct Trajectory {
  std::vector<PopulationState> states;    // times 0..t
  std::vector<CompartmentCounts> counts;  // times 0..t

  [[nodiscard]] std::size_t horizon() const noexcept { return states.empty() ? 0 : states.size() - 1; }
};

/// Draws index j with probability masses[j] / total using one uniform.
[[nodiscard]] std::size_t sample_categorical(std::span<const double> masses, double total, double uniform) noexcept;

/// Simulates x_0, ..., x_t. Deterministic given the generator state.
[[nodiscard]] Trajectory simulate(const ModelSpec& spec, std::size_t horizon, Rng& rng);

}  // namespace epismc

#endif

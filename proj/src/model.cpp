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

#include "epismc/model.hpp"

#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>

namespace epismc {

void TransitionKernel::fill_kernels(std::span<const double> counts, std::span<double> out) const {
  const std::size_t m = compartments();
  for (std::size_t n = 0; n < population(); ++n) kernel(n, counts, out.subspan(n * m * m, m * m));
}

void TransitionKernel::fill_rows(std::span<const double> counts, std::span<const Compartment> states,
                                 std::span<double> out) const {
  const std::size_t m = compartments();
  std::vector<double> scratch(m * m);
  for (std::size_t n = 0; n < population(); ++n) {
    kernel(n, counts, scratch);
    for (std::size_t j = 0; j < m; ++j) out[n * m + j] = scratch[states[n] * m + j];
  }
}

FunctionKernel::FunctionKernel(std::size_t population, std::size_t compartments, Builder builder)
    : population_{population}, compartments_{compartments}, builder_{std::move(builder)} {}

void FunctionKernel::kernel(std::size_t n, std::span<const double> counts, std::span<double> out) const {
  builder_(n, counts, out);
}

ModelSpec::ModelSpec(Matrix<double> initial_probs, std::shared_ptr<const TransitionKernel> kernel)
    : initial_probs_{std::move(initial_probs)}, kernel_{std::move(kernel)} {
  if (!kernel_) throw std::invalid_argument{"model requires a transition kernel"};
  if (initial_probs_.rows() == 0 || initial_probs_.cols() == 0) {
    throw std::invalid_argument{"model requires N >= 1 and M >= 1"};
  }
  if (kernel_->population() != initial_probs_.rows() || kernel_->compartments() != initial_probs_.cols()) {
    throw std::invalid_argument{"initial distribution and kernel disagree on N or M"};
  }
  for (std::size_t n = 0; n < initial_probs_.rows(); ++n) {
    double total = 0.0;
    for (const double p : initial_probs_.row(n)) {
      if (!(p >= 0.0)) throw std::invalid_argument{"negative initial probability"};
      total += p;
    }
    if (std::abs(total - 1.0) > 1e-12) {
      throw std::invalid_argument{"initial distribution row " + std::to_string(n) + " does not sum to 1"};
    }
  }
}

Matrix<double> ModelSpec::kernel(std::size_t n, std::span<const double> counts) const {
  Matrix<double> out(compartments(), compartments());
  kernel_->kernel(n, counts, out.values());
  return out;
}

double logistic(double z) noexcept {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

namespace {

std::vector<double> linear_predictor_logistic(const std::vector<double>& beta, const Covariates& covariates,
                                              const char* name) {
  if (beta.size() != covariates.cols()) {
    throw std::invalid_argument{std::string{name} + " has length " + std::to_string(beta.size()) +
                                " but covariates have d = " + std::to_string(covariates.cols())};
  }
  std::vector<double> out(covariates.rows());
  for (std::size_t n = 0; n < covariates.rows(); ++n) {
    double z = 0.0;
    for (std::size_t k = 0; k < beta.size(); ++k) z += beta[k] * covariates(n, k);
    out[n] = logistic(z);
  }
  return out;
}

void check_covariates(const Covariates& covariates) {
  if (covariates.rows() == 0 || covariates.cols() == 0) {
    throw std::invalid_argument{"covariates require N >= 1 and d >= 1"};
  }
  for (const double w : covariates.values()) {
    if (!std::isfinite(w)) throw std::invalid_argument{"non-finite covariate"};
  }
}

class SISKernel final : public TransitionKernel {
 public:
  SISKernel(std::vector<double> infection, std::vector<double> recovery)
      : infection_{std::move(infection)}, recovery_{std::move(recovery)} {}

  [[nodiscard]] std::size_t population() const noexcept override { return infection_.size(); }
  [[nodiscard]] std::size_t compartments() const noexcept override { return 2; }

  void kernel(std::size_t n, std::span<const double> counts, std::span<double> out) const override {
    const double p = infection_[n] * pressure(counts);
    out[0] = 1.0 - p;
    out[1] = p;
    out[2] = recovery_[n];
    out[3] = 1.0 - recovery_[n];
  }

  void fill_kernels(std::span<const double> counts, std::span<double> out) const override {
    const double pressure_now = pressure(counts);
    for (std::size_t n = 0; n < infection_.size(); ++n) {
      const double p = infection_[n] * pressure_now;
      double* k = out.data() + n * 4;
      k[0] = 1.0 - p;
      k[1] = p;
      k[2] = recovery_[n];
      k[3] = 1.0 - recovery_[n];
    }
  }

  void fill_rows(std::span<const double> counts, std::span<const Compartment> states,
                 std::span<double> out) const override {
    const double pressure_now = pressure(counts);
    for (std::size_t n = 0; n < infection_.size(); ++n) {
      double* row = out.data() + n * 2;
      if (states[n] == 0) {
        const double p = infection_[n] * pressure_now;
        row[0] = 1.0 - p;
        row[1] = p;
      } else {
        row[0] = recovery_[n];
        row[1] = 1.0 - recovery_[n];
      }
    }
  }

 private:
  [[nodiscard]] double pressure(std::span<const double> counts) const noexcept {
    return counts[1] / static_cast<double>(infection_.size());
  }

  std::vector<double> infection_;
  std::vector<double> recovery_;
};

class SEIRKernel final : public TransitionKernel {
 public:
  SEIRKernel(std::vector<double> infection, double rho, std::vector<double> recovery)
      : infection_{std::move(infection)}, stay_exposed_{std::exp(-rho)}, recovery_{std::move(recovery)} {}

  [[nodiscard]] std::size_t population() const noexcept override { return infection_.size(); }
  [[nodiscard]] std::size_t compartments() const noexcept override { return 4; }

  void kernel(std::size_t n, std::span<const double> counts, std::span<double> out) const override {
    write(n, pressure(counts), out.data());
  }

  void fill_kernels(std::span<const double> counts, std::span<double> out) const override {
    const double pressure_now = pressure(counts);
    for (std::size_t n = 0; n < infection_.size(); ++n) write(n, pressure_now, out.data() + n * 16);
  }

  void fill_rows(std::span<const double> counts, std::span<const Compartment> states,
                 std::span<double> out) const override {
    const double pressure_now = pressure(counts);
    for (std::size_t n = 0; n < infection_.size(); ++n) {
      double* row = out.data() + n * 4;
      switch (states[n]) {
        case 0: {
          const double p = infection_[n] * pressure_now;
          row[0] = 1.0 - p;
          row[1] = p;
          row[2] = 0.0;
          row[3] = 0.0;
          break;
        }
        case 1:
          row[0] = 0.0;
          row[1] = stay_exposed_;
          row[2] = 1.0 - stay_exposed_;
          row[3] = 0.0;
          break;
        case 2:
          row[0] = 0.0;
          row[1] = 0.0;
          row[2] = 1.0 - recovery_[n];
          row[3] = recovery_[n];
          break;
        default:
          row[0] = 0.0;
          row[1] = 0.0;
          row[2] = 0.0;
          row[3] = 1.0;
          break;
      }
    }
  }

 private:
  [[nodiscard]] double pressure(std::span<const double> counts) const noexcept {
    return counts[2] / static_cast<double>(infection_.size());
  }

  void write(std::size_t n, double pressure_now, double* k) const noexcept {
    const double p = infection_[n] * pressure_now;
    k[0] = 1.0 - p;
    k[1] = p;
    k[2] = 0.0;
    k[3] = 0.0;
    k[4] = 0.0;
    k[5] = stay_exposed_;
    k[6] = 1.0 - stay_exposed_;
    k[7] = 0.0;
    k[8] = 0.0;
    k[9] = 0.0;
    k[10] = 1.0 - recovery_[n];
    k[11] = recovery_[n];
    k[12] = 0.0;
    k[13] = 0.0;
    k[14] = 0.0;
    k[15] = 1.0;
  }

  std::vector<double> infection_;
  double stay_exposed_;
  std::vector<double> recovery_;
};

}  // namespace

ModelSpec sis_spec(const SISParams& params, const Covariates& covariates) {
  check_covariates(covariates);
  const auto initial_infected = linear_predictor_logistic(params.beta0, covariates, "beta0");
  auto infection = linear_predictor_logistic(params.beta_lambda, covariates, "beta_lambda");
  auto recovery = linear_predictor_logistic(params.beta_gamma, covariates, "beta_gamma");
  Matrix<double> initial(covariates.rows(), 2);
  for (std::size_t n = 0; n < covariates.rows(); ++n) {
    initial(n, 0) = 1.0 - initial_infected[n];
    initial(n, 1) = initial_infected[n];
  }
  return ModelSpec{std::move(initial), std::make_shared<SISKernel>(std::move(infection), std::move(recovery))};
}

ModelSpec seir_spec(const SEIRParams& params, const Covariates& covariates) {
  check_covariates(covariates);
  if (!(params.rho > 0.0) || !std::isfinite(params.rho)) throw std::invalid_argument{"rho must be positive"};
  const auto initial_infected = linear_predictor_logistic(params.beta0, covariates, "beta0");
  auto infection = linear_predictor_logistic(params.beta_lambda, covariates, "beta_lambda");
  auto recovery = linear_predictor_logistic(params.beta_gamma, covariates, "beta_gamma");
  Matrix<double> initial(covariates.rows(), 4);
  for (std::size_t n = 0; n < covariates.rows(); ++n) {
    initial(n, 0) = 1.0 - initial_infected[n];
    initial(n, 2) = initial_infected[n];
  }
  return ModelSpec{std::move(initial),
                   std::make_shared<SEIRKernel>(std::move(infection), params.rho, std::move(recovery))};
}

Covariates generate_covariates(std::size_t population, std::size_t dims, Rng& rng) {
  Covariates w(population, dims);
  for (std::size_t n = 0; n < population; ++n) {
    w(n, 0) = 1.0;
    for (std::size_t k = 1; k < dims; ++k) w(n, k) = rng.normal();
  }
  return w;
}

CompartmentCounts count_compartments(std::span<const Compartment> states, std::size_t compartments) {
  if (states.empty()) throw std::invalid_argument{"population must contain at least one individual"};
  CompartmentCounts counts(compartments, 0);
  for (const Compartment x : states) {
    if (x >= compartments) {
      throw std::out_of_range{"compartment " + std::to_string(x) + " outside [0, " + std::to_string(compartments) +
                              ")"};
    }
    ++counts[x];
  }
  return counts;
}

std::vector<double> to_real(const CompartmentCounts& counts) { return {counts.begin(), counts.end()}; }

std::size_t sample_categorical(std::span<const double> masses, double total, double uniform) noexcept {
  const double target = uniform * total;
  double cumulative = 0.0;
  std::size_t last_positive = 0;
  for (std::size_t j = 0; j < masses.size(); ++j) {
    if (masses[j] <= 0.0) continue;
    cumulative += masses[j];
    last_positive = j;
    if (target < cumulative) return j;
  }
  return last_positive;
}

Trajectory simulate(const ModelSpec& spec, std::size_t horizon, Rng& rng) {
  const std::size_t n_pop = spec.population();
  const std::size_t m = spec.compartments();
  Trajectory traj;
  traj.states.reserve(horizon + 1);
  traj.counts.reserve(horizon + 1);

  PopulationState x(n_pop);
  for (std::size_t n = 0; n < n_pop; ++n) {
    x[n] = static_cast<Compartment>(sample_categorical(spec.initial_probs().row(n), 1.0, rng.uniform()));
  }
  traj.counts.push_back(count_compartments(x, m));
  traj.states.push_back(x);

  std::vector<double> rows(n_pop * m);
  for (std::size_t s = 1; s <= horizon; ++s) {
    const auto counts = to_real(traj.counts.back());
    spec.transition().fill_rows(counts, traj.states.back(), rows);
    for (std::size_t n = 0; n < n_pop; ++n) {
      x[n] = static_cast<Compartment>(
          sample_categorical(std::span<const double>{rows.data() + n * m, m}, 1.0, rng.uniform()));
    }
    traj.counts.push_back(count_compartments(x, m));
    traj.states.push_back(x);
  }
  return traj;
}

}  // namespace epismc

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

#ifndef EPISMC_ERRORS_HPP
#define EPISMC_ERRORS_HPP

#include <cstddef>
#include <stdexcept>
#include <string>

namespace epismc {

/// Some individual has zero proposal mass given the particle and the data window.
class DegenerateProposal : public std::runtime_error {
 public:
  explicit DegenerateProposal(std::size_t individual)
      : std::runtime_error{"degenerate proposal for individual " + std::to_string(individual)},
        individual_{individual} {}
  [[nodiscard]] std::size_t individual() const noexcept { return individual_; }

 private:
  std::size_t individual_;
};

/// Every particle carries zero weight (or zero resampling mass) at some step.
class DegenerateFilter : public std::runtime_error {
 public:
  explicit DegenerateFilter(std::size_t step)
      : std::runtime_error{"particle filter degenerate at step " + std::to_string(step)}, step_{step} {}
  [[nodiscard]] std::size_t step() const noexcept { return step_; }

 private:
  std::size_t step_;
};

/// Joint state space exceeds the enumeration cap of the exact oracle.
class StateSpaceTooLarge : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace epismc

#endif

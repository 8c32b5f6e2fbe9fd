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

#include "epismc/meanfield.hpp"

#include <stdexcept>
#include <string>
#include <utility>

namespace epismc {

namespace {

// v^T A for an M x M matrix A.
std::vector<double> left_multiply(std::span<const double> v, const Matrix<double>& a) {
  std::vector<double> out(a.cols(), 0.0);
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < a.cols(); ++j) out[j] += v[i] * a(i, j);
  }
  return out;
}

std::vector<double> scaled(std::span<const double> m, double factor) {
  std::vector<double> out(m.begin(), m.end());
  for (auto& value : out) value *= factor;
  return out;
}

}  // namespace

MeanModel::MeanModel(std::vector<double> p_bar0, std::shared_ptr<const TransitionKernel> kernel)
    : p_bar0_{std::move(p_bar0)}, kernel_{std::move(kernel)} {}

Matrix<double> MeanModel::k_bar(std::span<const double> counts) const {
  const std::size_t m = compartments();
  const std::size_t n_pop = population();
  std::vector<double> kernels(n_pop * m * m);
  kernel_->fill_kernels(counts, kernels);
  Matrix<double> mean(m, m, 0.0);
  auto values = mean.values();
  for (std::size_t n = 0; n < n_pop; ++n) {
    for (std::size_t k = 0; k < m * m; ++k) values[k] += kernels[n * m * m + k];
  }
  const double inv = 1.0 / static_cast<double>(n_pop);
  for (auto& value : values) value *= inv;
  return mean;
}

MeanModel mean_model(const ModelSpec& spec) {
  const auto& p0 = spec.initial_probs();
  std::vector<double> p_bar0(spec.compartments(), 0.0);
  for (std::size_t n = 0; n < p0.rows(); ++n) {
    for (std::size_t i = 0; i < p0.cols(); ++i) p_bar0[i] += p0(n, i);
  }
  for (auto& value : p_bar0) value /= static_cast<double>(p0.rows());
  return MeanModel{std::move(p_bar0), spec.transition_ptr()};
}

ForwardMarginals forward_pass(const MeanModel& mm, const AggregateCounts& o, const ReportingRates& q,
                              std::size_t population) {
  const std::size_t m = mm.compartments();
  const std::size_t horizon = o.rows();
  if (o.cols() != m || q.rows() != horizon || q.cols() != m) {
    throw std::invalid_argument{"aggregate counts and reporting rates must both be t x M"};
  }
  const double n_pop = static_cast<double>(population);

  ForwardMarginals out{Matrix<double>(horizon + 1, m), Matrix<double>(horizon, m),
                       std::vector<char>(horizon + 1, 0)};
  for (std::size_t i = 0; i < m; ++i) out.filtered(0, i) = mm.p_bar0()[i];

  for (std::size_t s = 1; s <= horizon; ++s) {
    const auto previous = out.filtered.row(s - 1);
    const auto predicted = left_multiply(previous, mm.k_bar(scaled(previous, n_pop)));
    for (std::size_t i = 0; i < m; ++i) out.predicted(s - 1, i) = predicted[i];

    std::int64_t reported = 0;
    for (std::size_t i = 0; i < m; ++i) {
      if (o(s - 1, i) < 0) throw std::invalid_argument{"negative aggregate count"};
      reported += o(s - 1, i);
    }
    if (static_cast<std::size_t>(reported) > population) {
      throw std::invalid_argument{"aggregate counts at time " + std::to_string(s) + " exceed the population"};
    }

    const double unreported_share = 1.0 - static_cast<double>(reported) / n_pop;
    double denominator = 1.0;
    for (std::size_t i = 0; i < m; ++i) denominator -= predicted[i] * q(s - 1, i);

    auto filtered = out.filtered.row(s);
    for (std::size_t i = 0; i < m; ++i) filtered[i] = static_cast<double>(o(s - 1, i)) / n_pop;
    if (reported == static_cast<std::int64_t>(population)) {  // 0 * (0 / 0) := 0
      out.complete[s] = 1;
      continue;
    }

    double unreported_mass = 0.0;
    for (std::size_t i = 0; i < m; ++i) unreported_mass += predicted[i] * (1.0 - q(s - 1, i));
    // The denominator equals the unreported mass of the prediction; recompute it
    // from the latter when rounding has pushed it to zero.
    if (!(denominator > 0.0)) denominator = unreported_mass;
    if (denominator > 0.0) {
      for (std::size_t i = 0; i < m; ++i) {
        filtered[i] += unreported_share * predicted[i] * (1.0 - q(s - 1, i)) / denominator;
      }
    } else {
      // Prediction puts no mass on unreported individuals; keep the predicted shape.
      for (std::size_t i = 0; i < m; ++i) filtered[i] += unreported_share * predicted[i];
    }
  }
  return out;
}

SmoothingMarginals backward_pass(const MeanModel& mm, ForwardMarginals forward, std::size_t population) {
  const std::size_t m = mm.compartments();
  const std::size_t horizon = forward.predicted.rows();
  const double n_pop = static_cast<double>(population);

  SmoothingMarginals out;
  out.smoothed = Matrix<double>(horizon + 1, m);
  out.reverse_kernels.resize(horizon);
  for (std::size_t i = 0; i < m; ++i) out.smoothed(horizon, i) = forward.filtered(horizon, i);

  for (std::size_t s = horizon; s-- > 0;) {
    const auto filtered = forward.filtered.row(s);
    const auto kernel = mm.k_bar(scaled(filtered, n_pop));
    // L_s(j, i) = m_{s|s}(i) K(i, j) / sum_k m_{s|s}(k) K(k, j)
    Matrix<double> reverse(m, m, 0.0);
    for (std::size_t j = 0; j < m; ++j) {
      double column = 0.0;
      for (std::size_t i = 0; i < m; ++i) column += filtered[i] * kernel(i, j);
      if (column > 0.0) {
        for (std::size_t i = 0; i < m; ++i) reverse(j, i) = filtered[i] * kernel(i, j) / column;
      } else {
        for (std::size_t i = 0; i < m; ++i) reverse(j, i) = 1.0 / static_cast<double>(m);
      }
    }
    const auto smoothed = left_multiply(out.smoothed.row(s + 1), reverse);
    const bool pinned = s < forward.complete.size() && forward.complete[s] != 0;
    for (std::size_t i = 0; i < m; ++i) out.smoothed(s, i) = pinned ? filtered[i] : smoothed[i];
    out.reverse_kernels[s] = std::move(reverse);
  }
  out.filtered = std::move(forward.filtered);
  out.predicted = std::move(forward.predicted);
  return out;
}

SmoothingMarginals multinomial_smoother(const ModelSpec& spec, const ObservationMatrix& y, const ReportingRates& q) {
  const auto mm = mean_model(spec);
  return backward_pass(mm, forward_pass(mm, aggregate_counts(y, spec.compartments()), q, spec.population()),
                       spec.population());
}

std::vector<double> count_estimate(const SmoothingMarginals& marginals, std::size_t population, std::size_t s) {
  if (s >= marginals.smoothed.rows()) throw std::out_of_range{"time outside the smoothed range"};
  return scaled(marginals.smoothed.row(s), static_cast<double>(population));
}

}  // namespace epismc

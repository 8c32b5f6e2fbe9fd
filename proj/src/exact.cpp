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

#include "epismc/exact.hpp"

#include <cmath>
#include <map>
#include <stdexcept>
#include <string>

#include "epismc/errors.hpp"
#include "epismc/logspace.hpp"

namespace epismc {

JointStateIndex::JointStateIndex(std::size_t population, std::size_t compartments, std::size_t cap)
    : population_{population}, compartments_{compartments}, size_{1} {
  if (population == 0 || compartments == 0) throw std::invalid_argument{"empty joint state space"};
  for (std::size_t n = 0; n < population; ++n) {
    if (size_ > cap / compartments) {
      throw StateSpaceTooLarge{"joint state space " + std::to_string(compartments) + "^" +
                               std::to_string(population) + " exceeds cap " + std::to_string(cap)};
    }
    size_ *= compartments;
  }
}

std::size_t JointStateIndex::encode(std::span<const Compartment> x) const {
  if (x.size() != population_) throw std::invalid_argument{"state length differs from the population"};
  std::size_t index = 0;
  for (std::size_t n = population_; n-- > 0;) {
    if (x[n] >= compartments_) throw std::out_of_range{"compartment out of range"};
    index = index * compartments_ + x[n];
  }
  return index;
}

void JointStateIndex::decode(std::size_t index, std::span<Compartment> out) const {
  if (index >= size_ || out.size() != population_) throw std::out_of_range{"joint index out of range"};
  for (std::size_t n = 0; n < population_; ++n) {
    out[n] = static_cast<Compartment>(index % compartments_);
    index /= compartments_;
  }
}

PopulationState JointStateIndex::decode(std::size_t index) const {
  PopulationState x(population_);
  decode(index, x);
  return x;
}

namespace {

// Joint states grouped by their compartment counts.
struct CountClass {
  std::vector<double> counts;
  std::vector<std::size_t> members;
};

std::vector<CountClass> count_classes(const JointStateIndex& index) {
  std::map<std::vector<double>, std::vector<std::size_t>> groups;
  PopulationState x(index.population());
  for (std::size_t k = 0; k < index.size(); ++k) {
    index.decode(k, x);
    groups[to_real(count_compartments(x, index.compartments()))].push_back(k);
  }
  std::vector<CountClass> out;
  out.reserve(groups.size());
  for (auto& [counts, members] : groups) out.push_back({counts, std::move(members)});
  return out;
}

// Applies K_n along digit n of the tensor for every n. Forward: out_j = sum_i in_i K(i, j).
// Backward: out_i = sum_j K(i, j) in_j.
void apply_kernels(const JointStateIndex& index, std::span<const double> kernels, bool forward,
                   std::vector<double>& tensor, std::vector<double>& scratch) {
  const std::size_t m = index.compartments();
  const std::size_t size = index.size();
  scratch.resize(size);
  std::size_t stride = 1;
  for (std::size_t n = 0; n < index.population(); ++n, stride *= m) {
    const double* k = kernels.data() + n * m * m;
    for (std::size_t base = 0; base < size; ++base) {
      if ((base / stride) % m != 0) continue;
      for (std::size_t a = 0; a < m; ++a) {
        double acc = 0.0;
        for (std::size_t b = 0; b < m; ++b) {
          acc += forward ? tensor[base + b * stride] * k[b * m + a] : k[a * m + b] * tensor[base + b * stride];
        }
        scratch[base + a * stride] = acc;
      }
    }
    std::swap(tensor, scratch);
  }
}

std::vector<double> emission_vector(const JointStateIndex& index, std::span<const std::uint8_t> y_s,
                                    std::span<const double> q_s) {
  std::vector<double> out(index.size());
  PopulationState x(index.population());
  for (std::size_t k = 0; k < index.size(); ++k) {
    index.decode(k, x);
    double value = 1.0;
    for (std::size_t n = 0; n < x.size() && value != 0.0; ++n) value *= emission_factor(q_s, x[n], y_s[n]);
    out[k] = value;
  }
  return out;
}

// sum_{x_prev} dist(x_prev) p(x | x_prev).
std::vector<double> predict(const ModelSpec& spec, const JointStateIndex& index, const std::vector<CountClass>& classes,
                            std::span<const double> dist) {
  const std::size_t m = spec.compartments();
  std::vector<double> out(index.size(), 0.0);
  std::vector<double> tensor;
  std::vector<double> scratch;
  std::vector<double> kernels(spec.population() * m * m);
  for (const auto& cls : classes) {
    tensor.assign(index.size(), 0.0);
    bool any = false;
    for (const std::size_t k : cls.members) {
      tensor[k] = dist[k];
      any = any || dist[k] != 0.0;
    }
    if (!any) continue;
    spec.transition().fill_kernels(cls.counts, kernels);
    apply_kernels(index, kernels, true, tensor, scratch);
    for (std::size_t k = 0; k < out.size(); ++k) out[k] += tensor[k];
  }
  return out;
}

void check_shapes(const ModelSpec& spec, const ObservationMatrix& y, const ReportingRates& q) {
  validate_observations(y, y.rows(), spec.population(), spec.compartments());
  validate_rates(q, y.rows(), spec.compartments());
}

}  // namespace

ExactFilter exact_forward(const ModelSpec& spec, const ObservationMatrix& y, const ReportingRates& q,
                          std::size_t cap) {
  check_shapes(spec, y, q);
  const JointStateIndex index{spec.population(), spec.compartments(), cap};
  const auto classes = count_classes(index);
  const auto& p0 = spec.initial_probs();

  ExactFilter out;
  std::vector<double> dist(index.size());
  PopulationState x(index.population());
  for (std::size_t k = 0; k < index.size(); ++k) {
    index.decode(k, x);
    double value = 1.0;
    for (std::size_t n = 0; n < x.size(); ++n) value *= p0(n, x[n]);
    dist[k] = value;
  }
  out.filtering.push_back(dist);

  for (std::size_t s = 1; s <= y.rows(); ++s) {
    if (out.impossible_step) {
      out.filtering.emplace_back(index.size(), 0.0);
      continue;
    }
    dist = predict(spec, index, classes, dist);
    const auto emission = emission_vector(index, y.row(s - 1), q.row(s - 1));
    double total = 0.0;
    for (std::size_t k = 0; k < dist.size(); ++k) {
      dist[k] *= emission[k];
      total += dist[k];
    }
    if (!(total > 0.0)) {
      out.impossible_step = s;
      out.log_normalizers.push_back(kNegInf);
      out.log_likelihood = kNegInf;
      out.filtering.emplace_back(index.size(), 0.0);
      continue;
    }
    for (auto& value : dist) value /= total;
    // Nothing reported and every 1 - q equal to 1: the step carries no information.
    bool uninformative = true;
    for (const double e : emission) uninformative = uninformative && e == 1.0;
    const double log_z = uninformative ? 0.0 : std::log(total);
    out.log_normalizers.push_back(log_z);
    out.log_likelihood += log_z;
    out.filtering.push_back(dist);
  }
  return out;
}

std::vector<double> exact_optimal_proposal(const ModelSpec& spec, const ObservationMatrix& y, const ReportingRates& q,
                                           std::span<const Compartment> x_prev, std::size_t s, std::size_t window,
                                           std::size_t cap) {
  check_shapes(spec, y, q);
  if (s == 0 || s > y.rows() || window > y.rows() - s) throw std::out_of_range{"proposal window exceeds the data"};
  const JointStateIndex index{spec.population(), spec.compartments(), cap};
  const auto classes = count_classes(index);
  const std::size_t m = spec.compartments();

  // beta(x) = p(y_{tau+1..s+window} | x_tau = x), built backward from tau = s + window down to s.
  std::vector<double> beta(index.size(), 1.0);
  std::vector<double> tensor;
  std::vector<double> scratch;
  std::vector<double> kernels(spec.population() * m * m);
  for (std::size_t tau = s + window; tau-- > s;) {
    const auto emission = emission_vector(index, y.row(tau), q.row(tau));
    std::vector<double> weighted(index.size());
    for (std::size_t k = 0; k < weighted.size(); ++k) weighted[k] = emission[k] * beta[k];
    std::vector<double> next(index.size(), 0.0);
    for (const auto& cls : classes) {
      tensor = weighted;
      spec.transition().fill_kernels(cls.counts, kernels);
      apply_kernels(index, kernels, false, tensor, scratch);
      for (const std::size_t k : cls.members) next[k] = tensor[k];
    }
    beta = std::move(next);
  }

  std::vector<double> point(index.size(), 0.0);
  point[index.encode(x_prev)] = 1.0;
  auto dist = predict(spec, index, classes, point);
  const auto emission = emission_vector(index, y.row(s - 1), q.row(s - 1));
  double total = 0.0;
  for (std::size_t k = 0; k < dist.size(); ++k) {
    dist[k] *= emission[k] * beta[k];
    total += dist[k];
  }
  if (!(total > 0.0)) throw std::domain_error{"observation window has probability zero given x_{s-1}"};
  for (auto& value : dist) value /= total;
  return dist;
}

std::vector<double> count_means(const JointStateIndex& index, std::span<const double> distribution) {
  std::vector<double> out(index.compartments(), 0.0);
  PopulationState x(index.population());
  for (std::size_t k = 0; k < index.size(); ++k) {
    if (distribution[k] == 0.0) continue;
    index.decode(k, x);
    for (const Compartment c : x) out[c] += distribution[k];
  }
  return out;
}

Matrix<double> individual_marginals(const JointStateIndex& index, std::span<const double> distribution) {
  Matrix<double> out(index.population(), index.compartments(), 0.0);
  PopulationState x(index.population());
  for (std::size_t k = 0; k < index.size(); ++k) {
    if (distribution[k] == 0.0) continue;
    index.decode(k, x);
    for (std::size_t n = 0; n < x.size(); ++n) out(n, x[n]) += distribution[k];
  }
  return out;
}

Matrix<double> filtering_count_means(const JointStateIndex& index, const ExactFilter& filter) {
  Matrix<double> out(filter.filtering.size(), index.compartments());
  for (std::size_t s = 0; s < filter.filtering.size(); ++s) {
    const auto means = count_means(index, filter.filtering[s]);
    for (std::size_t j = 0; j < means.size(); ++j) out(s, j) = means[j];
  }
  return out;
}

}  // namespace epismc

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

#include "epismc/pmmh.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "epismc/logspace.hpp"
#include "epismc/rng.hpp"

namespace epismc {

namespace {

double logit(double p) { return std::log(p) - std::log1p(-p); }

// log |d q / d logit(q)| = log q (1 - q).
double log_jacobian(std::span<const double> params, const ParameterBlock& block) {
  if (!block.unit_interval) return 0.0;
  double total = 0.0;
  for (std::size_t k = block.offset; k < block.offset + block.size; ++k) {
    total += std::log(params[k]) + std::log1p(-params[k]);
  }
  return total;
}

double quantile(std::vector<double>& values, double prob) {
  std::sort(values.begin(), values.end());
  const double pos = prob * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

}  // namespace

PriorSpec default_prior(std::size_t beta_count, std::size_t rates, double variance) {
  return PriorSpec{std::vector<NormalPrior>(beta_count, NormalPrior{0.0, variance}), rates};
}

double log_prior(std::span<const double> params, const PriorSpec& prior) {
  if (params.size() != prior.dimension()) throw std::invalid_argument{"parameter vector does not match the prior"};
  double total = 0.0;
  for (std::size_t k = 0; k < prior.beta.size(); ++k) {
    const auto& p = prior.beta[k];
    if (!(p.variance > 0.0)) throw std::invalid_argument{"prior variance must be positive"};
    const double z = params[k] - p.mean;
    total += -0.5 * std::log(2.0 * std::numbers::pi * p.variance) - 0.5 * z * z / p.variance;
  }
  for (std::size_t k = prior.beta.size(); k < params.size(); ++k) {
    if (!(params[k] >= 0.0 && params[k] <= 1.0)) return kNegInf;
  }
  return total;
}

std::vector<double> sample_prior(const PriorSpec& prior, Rng& rng) {
  std::vector<double> out;
  out.reserve(prior.dimension());
  for (const auto& p : prior.beta) out.push_back(p.mean + std::sqrt(p.variance) * rng.normal());
  for (std::size_t k = 0; k < prior.rates; ++k) out.push_back(rng.uniform());
  return out;
}

std::vector<ParameterBlock> standard_blocks(std::size_t d, std::size_t rates) {
  return {{"beta0", 0, d, false},
          {"beta_lambda", d, d, false},
          {"beta_gamma", 2 * d, d, false},
          {"q", 3 * d, rates, true}};
}

double Chain::acceptance_rate(std::size_t begin, std::size_t end) const {
  end = std::min(end, accepted.size());
  if (begin >= end) return 0.0;
  std::size_t count = 0;
  for (std::size_t i = begin; i < end; ++i) count += accepted[i] != 0 ? 1 : 0;
  return static_cast<double>(count) / static_cast<double>(end - begin);
}

std::vector<std::size_t> Chain::kept() const {
  std::vector<std::size_t> rows;
  const std::size_t step = std::max<std::size_t>(1, thinning);
  for (std::size_t i = burn_in; i < iterations(); i += step) rows.push_back(i);
  return rows;
}

Chain run_pmmh(const LogLikelihood& log_likelihood, const PriorSpec& prior, std::vector<double> initial,
               const PmmhConfig& config, std::uint64_t seed, std::vector<std::string> names) {
  const std::size_t dim = prior.dimension();
  if (initial.size() != dim) throw std::invalid_argument{"initial point does not match the prior"};
  if (config.burn_in > config.iterations) throw std::invalid_argument{"burn-in exceeds the iteration count"};
  if (!(config.initial_scale >= 0.0)) throw std::invalid_argument{"proposal scale must be nonnegative"};
  auto blocks = config.blocks;
  if (blocks.empty()) blocks.push_back({"all", 0, dim, false});
  for (const auto& b : blocks) {
    if (b.offset + b.size > dim) throw std::invalid_argument{"parameter block exceeds the dimension"};
    if (b.unit_interval && b.offset < prior.beta.size()) {
      throw std::invalid_argument{"logit blocks must cover reporting-rate components only"};
    }
  }
  if (names.empty()) {
    for (std::size_t k = 0; k < dim; ++k) names.push_back("theta" + std::to_string(k));
  }
  if (names.size() != dim) throw std::invalid_argument{"parameter names do not match the dimension"};

  double current_prior = log_prior(initial, prior);
  if (current_prior == kNegInf) throw std::invalid_argument{"initial point has zero prior density"};
  double current_ll = log_likelihood(initial, derive_seed(seed, 0, 1));

  Chain chain;
  chain.names = std::move(names);
  chain.samples = Matrix<double>(config.iterations, dim);
  chain.scales = Matrix<double>(config.iterations, blocks.size());
  chain.burn_in = config.burn_in;
  chain.thinning = std::max<std::size_t>(1, config.thinning);
  chain.log_likelihoods.reserve(config.iterations);
  chain.log_priors.reserve(config.iterations);
  chain.accepted.reserve(config.iterations);
  chain.block.reserve(config.iterations);

  std::vector<double> log_scale(blocks.size(), config.initial_scale > 0.0 ? std::log(config.initial_scale) : kNegInf);
  std::vector<std::size_t> updates(blocks.size(), 0);
  Rng rng = Rng::stream(seed, 1);
  std::vector<double> proposal(dim);

  for (std::size_t it = 0; it < config.iterations; ++it) {
    const std::size_t b = it % blocks.size();
    const auto& block = blocks[b];
    const double scale = std::exp(log_scale[b]);
    for (std::size_t k = 0; k < blocks.size(); ++k) chain.scales(it, k) = std::exp(log_scale[k]);

    proposal = initial;
    for (std::size_t k = block.offset; k < block.offset + block.size; ++k) {
      const double step = scale * rng.normal();
      if (block.unit_interval) {
        proposal[k] = 1.0 / (1.0 + std::exp(-(logit(initial[k]) + step)));
      } else {
        proposal[k] = initial[k] + step;
      }
    }
    const double u = rng.uniform();

    bool accept = false;
    const double proposal_prior = log_prior(proposal, prior);
    bool valid = proposal_prior != kNegInf;
    if (block.unit_interval) {
      for (std::size_t k = block.offset; k < block.offset + block.size; ++k) {
        valid = valid && proposal[k] > 0.0 && proposal[k] < 1.0;
      }
    }
    double proposal_ll = kNegInf;
    if (valid) {
      proposal_ll = log_likelihood(proposal, derive_seed(seed, it + 1, 1));
      if (proposal_ll != kNegInf) {
        const double log_ratio = (proposal_ll + proposal_prior + log_jacobian(proposal, block)) -
                                 (current_ll + current_prior + log_jacobian(initial, block));
        accept = current_ll == kNegInf || std::log(u) < log_ratio;
      }
    }
    if (accept) {
      initial = proposal;
      current_ll = proposal_ll;
      current_prior = proposal_prior;
    }
    if (config.adapt && it < config.burn_in && std::isfinite(log_scale[b])) {
      const double gain = std::pow(static_cast<double>(++updates[b]), -0.6);
      log_scale[b] += gain * ((accept ? 1.0 : 0.0) - config.target_acceptance);
    }

    std::copy(initial.begin(), initial.end(), chain.samples.row(it).begin());
    chain.log_likelihoods.push_back(current_ll);
    chain.log_priors.push_back(current_prior);
    chain.accepted.push_back(accept ? 1 : 0);
    chain.block.push_back(b);
  }
  return chain;
}

double ks_statistic(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty()) throw std::invalid_argument{"KS test needs nonempty samples"};
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const auto na = static_cast<double>(a.size());
  const auto nb = static_cast<double>(b.size());
  std::size_t i = 0;
  std::size_t j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    const double x = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= x) ++i;
    while (j < b.size() && b[j] <= x) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  return d;
}

double ks_pvalue(double statistic, std::size_t n, std::size_t m) {
  const double ne = static_cast<double>(n) * static_cast<double>(m) / static_cast<double>(n + m);
  const double root = std::sqrt(ne);
  const double lambda = (root + 0.12 + 0.11 / root) * statistic;
  if (lambda < 1e-3) return 1.0;
  double sum = 0.0;
  for (int k = 1; k <= 200; ++k) {
    const double term = std::exp(-2.0 * k * k * lambda * lambda);
    sum += (k % 2 == 1 ? 2.0 : -2.0) * term;
    if (term < 1e-16) break;
  }
  return std::clamp(sum, 0.0, 1.0);
}

PredictiveBands posterior_predictive(const Chain& chain, const SpecBuilder& spec_builder,
                                     const RatesBuilder& rates_builder, std::size_t horizon, std::size_t draws,
                                     std::uint64_t seed, double level) {
  const auto rows = chain.kept();
  if (rows.empty() || draws == 0) throw std::invalid_argument{"no chain rows to draw from"};
  if (!(level > 0.0 && level < 1.0)) throw std::invalid_argument{"band level must lie in (0, 1)"};
  std::vector<Matrix<double>> counts;
  std::vector<Matrix<double>> observed;
  Rng picker = Rng::stream(seed, 0);
  for (std::size_t k = 0; k < draws; ++k) {
    const std::size_t row = rows[static_cast<std::size_t>(picker.uniform() * static_cast<double>(rows.size()))];
    const auto params = chain.samples.row(row);
    const auto spec = spec_builder(params);
    const auto rates = rates_builder(params);
    Rng rng = Rng::stream(seed, 1, k);
    const auto traj = simulate(spec, horizon, rng);
    const auto y = observe(traj, rates, rng);
    Matrix<double> c(horizon + 1, spec.compartments());
    for (std::size_t s = 0; s <= horizon; ++s) {
      for (std::size_t j = 0; j < spec.compartments(); ++j) c(s, j) = static_cast<double>(traj.counts[s][j]);
    }
    const auto o = aggregate_counts(y, spec.compartments());
    Matrix<double> od(o.rows(), o.cols());
    for (std::size_t i = 0; i < o.size(); ++i) od.values()[i] = static_cast<double>(o.values()[i]);
    counts.push_back(std::move(c));
    observed.push_back(std::move(od));
  }
  const double lo = 0.5 * (1.0 - level);
  const double hi = 1.0 - lo;
  auto bands = [&](const std::vector<Matrix<double>>& sims, Matrix<double>& lower, Matrix<double>& median,
                   Matrix<double>& upper) {
    const std::size_t r = sims.front().rows();
    const std::size_t c = sims.front().cols();
    lower = Matrix<double>(r, c);
    median = Matrix<double>(r, c);
    upper = Matrix<double>(r, c);
    std::vector<double> values(sims.size());
    for (std::size_t i = 0; i < r * c; ++i) {
      for (std::size_t k = 0; k < sims.size(); ++k) values[k] = sims[k].values()[i];
      lower.values()[i] = quantile(values, lo);
      median.values()[i] = quantile(values, 0.5);
      upper.values()[i] = quantile(values, hi);
    }
  };
  PredictiveBands out;
  out.level = level;
  bands(counts, out.count_lower, out.count_median, out.count_upper);
  bands(observed, out.observed_lower, out.observed_median, out.observed_upper);
  return out;
}

}  // namespace epismc

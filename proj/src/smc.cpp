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

#include "epismc/smc.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "epismc/errors.hpp"
#include "epismc/logspace.hpp"
#include "epismc/parallel.hpp"
#include "epismc/simd/kernels.hpp"

namespace epismc {

namespace {

constexpr std::uint64_t kResampleStream = std::numeric_limits<std::uint64_t>::max();

bool all_ones(std::span<const double> values) noexcept {
  return std::all_of(values.begin(), values.end(), [](double v) { return v == 1.0; });
}

// Per-worker buffers.
struct Scratch {
  std::vector<double> rows;
  std::vector<double> picked;
};

void check_inputs(const ModelSpec& spec, const ObservationMatrix& y, const ReportingRates& q,
                  const FilterConfig& config) {
  if (config.particles == 0) throw std::invalid_argument{"particle count must be positive"};
  if (config.ess_trigger && !(*config.ess_trigger >= 0.0 && *config.ess_trigger <= 1.0)) {
    throw std::invalid_argument{"ESS trigger must lie in [0, 1]"};
  }
  validate_observations(y, y.rows(), spec.population(), spec.compartments());
  validate_rates(q, y.rows(), spec.compartments());
}

void draw_ancestors(std::span<const double> probs, ResamplingScheme scheme, Rng& rng, std::vector<std::size_t>& out) {
  const std::size_t count = out.size();
  std::vector<double> cumulative(probs.size());
  std::partial_sum(probs.begin(), probs.end(), cumulative.begin());
  const double total = cumulative.back();
  auto locate = [&](double position) {
    const auto it = std::upper_bound(cumulative.begin(), cumulative.end(), position);
    std::size_t index = static_cast<std::size_t>(it - cumulative.begin());
    if (index >= probs.size()) index = probs.size() - 1;
    while (probs[index] == 0.0 && index > 0) --index;  // rounding at the top end
    return index;
  };
  if (scheme == ResamplingScheme::kSystematic) {
    const double offset = rng.uniform();
    for (std::size_t p = 0; p < count; ++p) {
      out[p] = locate((offset + static_cast<double>(p)) / static_cast<double>(count) * total);
    }
  } else {
    for (std::size_t p = 0; p < count; ++p) out[p] = locate(rng.uniform() * total);
  }
}

void weighted_count_means(const Matrix<double>& counts, std::span<const double> log_weights, std::span<double> out) {
  const auto w = normalize_log(log_weights);
  std::fill(out.begin(), out.end(), 0.0);
  for (std::size_t p = 0; p < counts.rows(); ++p) {
    if (w[p] == 0.0) continue;
    for (std::size_t j = 0; j < out.size(); ++j) out[j] += w[p] * counts(p, j);
  }
}

void tally(std::span<const Compartment> states, std::span<double> counts) {
  std::fill(counts.begin(), counts.end(), 0.0);
  for (const Compartment x : states) counts[x] += 1.0;
}

}  // namespace

std::string method_name(Method method, std::size_t lookahead) {
  switch (method) {
    case Method::kBootstrap: return "BPF";
    case Method::kAuxiliary: return "APF";
    case Method::kLookahead: return "LA(" + std::to_string(lookahead) + ")";
  }
  return "unknown";
}

LookaheadContext::LookaheadContext(const ModelSpec& spec, const ObservationMatrix& y, const ReportingRates& q,
                                   std::size_t lookahead, XiStorage storage)
    : marginals_{std::make_unique<SmoothingMarginals>(multinomial_smoother(spec, y, q))},
      xi_{std::make_unique<XiTables>(spec, *marginals_, q, y, lookahead, storage)} {}

std::vector<double> corrected_log_weights(std::span<const double> log_weights, std::span<const double> log_twists,
                                          std::span<const std::size_t> ancestors, WeightCorrection correction,
                                          std::size_t step) {
  const bool twisted = !log_twists.empty();
  if (twisted && log_twists.size() != log_weights.size()) {
    throw std::invalid_argument{"weights and twists differ in length"};
  }
  const double l1 = log_sum_exp(log_weights);
  double l2 = l1;
  if (twisted) {
    std::vector<double> combined(log_weights.size());
    for (std::size_t p = 0; p < combined.size(); ++p) combined[p] = log_weights[p] + log_twists[p];
    l2 = log_sum_exp(combined);
  }
  if (l1 == kNegInf || l2 == kNegInf) throw DegenerateFilter{step};
  const double log_p = std::log(static_cast<double>(ancestors.size()));
  // log(W_a / r_a) = L2 - twist_a - L1; exactly 0 without a twist.
  std::vector<double> out(ancestors.size());
  for (std::size_t p = 0; p < out.size(); ++p) {
    const double ratio = twisted ? (l2 - log_twists[ancestors[p]]) - l1 : l2 - l1;
    out[p] = correction == WeightCorrection::kUnbiased ? ratio - log_p : ratio;
  }
  if (correction == WeightCorrection::kSelfNormalized) {
    const double total = log_sum_exp(out);
    for (auto& value : out) value -= total;
  }
  return out;
}

double ess(std::span<const double> probs) {
  if (probs.empty()) return 0.0;
  const double squares = simd::sum_squares(probs);
  return squares > 0.0 ? 1.0 / squares : 0.0;
}

FilterOutput run_filter(const ModelSpec& spec, const ObservationMatrix& y, const ReportingRates& q,
                        const FilterConfig& config, const LookaheadContext* context) {
  check_inputs(spec, y, q, config);
  const std::size_t horizon = y.rows();
  const std::size_t n_pop = spec.population();
  const std::size_t m = spec.compartments();
  const std::size_t n_particles = config.particles;
  const double log_p = std::log(static_cast<double>(n_particles));
  const bool lookahead = config.method == Method::kLookahead;
  const bool guided = config.method != Method::kBootstrap;
  const std::size_t workers = std::max<std::size_t>(1, config.workers);

  std::unique_ptr<LookaheadContext> owned;
  if (lookahead) {
    if (context == nullptr) {
      owned = std::make_unique<LookaheadContext>(spec, y, q, config.lookahead, config.xi_storage);
      context = owned.get();
    } else if (context->lookahead() != config.lookahead || context->xi().horizon() != horizon) {
      throw std::invalid_argument{"lookahead context does not match the filter configuration"};
    }
  }

  FilterOutput out;
  out.particles = n_particles;
  out.ess.assign(horizon + 1, 0.0);
  out.count_means = Matrix<double>(horizon + 1, m, std::numeric_limits<double>::quiet_NaN());

  Matrix<Compartment> states(n_particles, n_pop);
  Matrix<Compartment> next_states(n_particles, n_pop);
  Matrix<double> counts(n_particles, m);
  Matrix<double> next_counts(n_particles, m);
  std::vector<double> log_w(n_particles, 0.0);
  std::vector<double> next_log_w(n_particles, 0.0);
  std::vector<double> corrected(n_particles, 0.0);
  std::vector<double> twist(n_particles, 0.0);
  std::vector<double> masses(guided ? n_particles * n_pop * m : 0);
  std::vector<double> totals(guided ? n_particles * n_pop : 0);
  std::vector<double> combined(n_particles);
  std::vector<std::size_t> ancestors(n_particles);
  std::vector<Scratch> scratch(workers);
  for (auto& s : scratch) {
    s.rows.resize(n_pop * m);
    s.picked.resize(n_pop);
  }

  auto fail = [&](std::size_t step) {
    out.degenerate_step = step;
    out.log_likelihood = kNegInf;
    for (std::size_t s = step; s <= horizon; ++s) out.ess[s] = 0.0;
    return out;
  };
  auto record = [&](std::size_t s) {
    weighted_count_means(counts, log_w, out.count_means.row(s));
    if (config.store_particles) {
      out.clouds.push_back(states);
      out.cloud_log_weights.push_back(log_w);
    }
  };

  // Time 0: sample from p(x_0), or from p(x_0) * xi_0 under lookahead.
  {
    const auto& p0 = spec.initial_probs();
    std::vector<double> xi_tilde0;
    const XiTable* xi0 = nullptr;
    double log_norm0 = 0.0;
    if (lookahead) {
      xi0 = &context->xi().at(0);
      const auto normalizers = xi_tilde_initial(spec, *xi0);
      xi_tilde0.assign(normalizers.values().begin(), normalizers.values().end());
      log_norm0 = simd::sum_log(xi_tilde0);
      if (log_norm0 == kNegInf) {
        out.log_normalizers.push_back(kNegInf);
        return fail(0);
      }
    }
    parallel_for(n_particles, workers, [&](std::size_t begin, std::size_t end, std::size_t worker) {
      auto& buf = scratch[worker];
      std::vector<double> row(m);
      for (std::size_t p = begin; p < end; ++p) {
        Rng rng = Rng::stream(config.seed, 0, p);
        auto x = states.row(p);
        for (std::size_t n = 0; n < n_pop; ++n) {
          if (xi0 == nullptr) {
            x[n] = static_cast<Compartment>(sample_categorical(p0.row(n), 1.0, rng.uniform()));
            continue;
          }
          for (std::size_t j = 0; j < m; ++j) row[j] = p0(n, j) * (*xi0)(n, j);
          const std::size_t j = sample_categorical(row, xi_tilde0[n], rng.uniform());
          x[n] = static_cast<Compartment>(j);
          buf.picked[n] = (*xi0)(n, j);
        }
        tally(x, counts.row(p));
        log_w[p] = xi0 == nullptr ? 0.0 : log_norm0 - simd::sum_log(buf.picked);
      }
    });
    const double log_z0 = log_sum_exp(log_w);
    out.log_normalizers.push_back(log_z0 == kNegInf ? kNegInf : log_z0 - log_p);
    if (log_z0 == kNegInf) return fail(0);
    record(0);
  }

  Matrix<double> weights(guided ? n_pop : 0, guided ? m : 0);
  Matrix<double> log_xi(lookahead ? n_pop : 0, lookahead ? m : 0);
  std::vector<char> informative(n_pop, 1);
  std::vector<double> emission(n_pop * m);

  for (std::size_t s = 1; s <= horizon; ++s) {
    const auto y_s = y.row(s - 1);
    const auto q_s = q.row(s - 1);
    emission_table(y_s, q_s, emission);
    const XiTable* xi = lookahead ? &context->xi().at(s) : nullptr;
    if (guided) {
      for (std::size_t k = 0; k < n_pop * m; ++k) {
        weights.values()[k] = xi == nullptr ? emission[k] : emission[k] * xi->values()[k];
      }
      for (std::size_t n = 0; n < n_pop; ++n) informative[n] = all_ones(weights.row(n)) ? 0 : 1;
    }
    if (xi != nullptr) {
      for (std::size_t k = 0; k < n_pop * m; ++k) log_xi.values()[k] = std::log(xi->values()[k]);
    }

    // Proposal masses and twists of every current particle.
    if (guided) {
      parallel_for(n_particles, workers, [&](std::size_t begin, std::size_t end, std::size_t worker) {
        auto& buf = scratch[worker];
        for (std::size_t p = begin; p < end; ++p) {
          spec.transition().fill_rows(counts.row(p), states.row(p), buf.rows);
          const std::span<double> tot{totals.data() + p * n_pop, n_pop};
          simd::weighted_row_sums(m, buf.rows, weights.values(), {masses.data() + p * n_pop * m, n_pop * m}, tot);
          for (std::size_t n = 0; n < n_pop; ++n) {
            if (informative[n] == 0) tot[n] = 1.0;
          }
          twist[p] = simd::sum_log(tot);
        }
      });
    }

    // Resampling distribution r and the corrected weights.
    const double l1 = log_sum_exp(log_w);
    for (std::size_t p = 0; p < n_particles; ++p) combined[p] = lookahead ? log_w[p] + twist[p] : log_w[p];
    const double l2 = lookahead ? log_sum_exp(combined) : l1;
    if (l2 == kNegInf) {
      out.log_normalizers.push_back(kNegInf);
      return fail(s);
    }
    std::vector<double> r(n_particles);
    for (std::size_t p = 0; p < n_particles; ++p) r[p] = std::exp(combined[p] - l2);
    const double ess_r = ess(r);
    out.ess[s - 1] = ess_r;

    const bool resample = !config.ess_trigger || ess_r < *config.ess_trigger * static_cast<double>(n_particles);
    if (resample) {
      Rng rng = Rng::stream(config.seed, s, kResampleStream);
      draw_ancestors(r, config.resampling, rng, ancestors);
      corrected = corrected_log_weights(log_w, lookahead ? std::span<const double>{twist} : std::span<const double>{},
                                        ancestors, config.correction, s);
    } else {
      std::iota(ancestors.begin(), ancestors.end(), std::size_t{0});
      for (std::size_t p = 0; p < n_particles; ++p) corrected[p] = log_w[p] - l1;
    }

    // Propagate and reweight.
    parallel_for(n_particles, workers, [&](std::size_t begin, std::size_t end, std::size_t worker) {
      auto& buf = scratch[worker];
      for (std::size_t p = begin; p < end; ++p) {
        const std::size_t a = ancestors[p];
        Rng rng = Rng::stream(config.seed, s, p);
        auto x = next_states.row(p);
        const auto x_prev = states.row(a);
        double increment = 0.0;
        if (!guided) {
          spec.transition().fill_rows(counts.row(a), x_prev, buf.rows);
          for (std::size_t n = 0; n < n_pop; ++n) {
            const std::span<const double> row{buf.rows.data() + n * m, m};
            const std::size_t j = sample_categorical(row, 1.0, rng.uniform());
            x[n] = static_cast<Compartment>(j);
            buf.picked[n] = emission[n * m + j];
          }
          increment = simd::sum_log(buf.picked);
        } else if (twist[a] == kNegInf || !std::isfinite(corrected[p])) {
          std::copy(x_prev.begin(), x_prev.end(), x.begin());
          increment = kNegInf;
        } else {
          const double* mass = masses.data() + a * n_pop * m;
          const double* tot = totals.data() + a * n_pop;
          for (std::size_t n = 0; n < n_pop; ++n) {
            const std::span<const double> row{mass + n * m, m};
            const std::size_t j = sample_categorical(row, tot[n], rng.uniform());
            x[n] = static_cast<Compartment>(j);
            if (xi != nullptr) buf.picked[n] = log_xi(n, j);
          }
          increment = twist[a];
          if (xi != nullptr) {
            double sum = 0.0;
            for (std::size_t n = 0; n < n_pop; ++n) sum += buf.picked[n];
            increment -= sum;
          }
        }
        tally(x, next_counts.row(p));
        next_log_w[p] = corrected[p] + increment;
      }
    });
    std::swap(states, next_states);
    std::swap(counts, next_counts);
    std::swap(log_w, next_log_w);

    const double log_z = log_sum_exp(log_w);
    out.log_normalizers.push_back(log_z);
    if (log_z == kNegInf) return fail(s);
    record(s);
  }

  out.ess[horizon] = ess(normalize_log(log_w));
  out.log_likelihood = 0.0;
  for (const double v : out.log_normalizers) out.log_likelihood += v;
  return out;
}

Matrix<double> apf_proposal_probabilities(const ModelSpec& spec, std::span<const Compartment> x_prev,
                                          std::span<const std::uint8_t> y_s, std::span<const double> q_s) {
  const std::size_t m = spec.compartments();
  const auto counts = to_real(count_compartments(x_prev, m));
  Matrix<double> probs(spec.population(), m);
  for (std::size_t n = 0; n < spec.population(); ++n) {
    const auto k = spec.kernel(n, counts);
    double total = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
      probs(n, j) = k(x_prev[n], j) * emission_factor(q_s, j, y_s[n]);
      total += probs(n, j);
    }
    if (!(total > 0.0)) throw DegenerateProposal{n};
    for (std::size_t j = 0; j < m; ++j) probs(n, j) /= total;
  }
  return probs;
}

ProposalStep apf_propose(const ModelSpec& spec, std::span<const Compartment> x_prev,
                         std::span<const std::uint8_t> y_s, std::span<const double> q_s, Rng& rng) {
  const auto probs = apf_proposal_probabilities(spec, x_prev, y_s, q_s);
  ProposalStep step{PopulationState(spec.population()), 0.0};
  for (std::size_t n = 0; n < spec.population(); ++n) {
    const std::size_t j = sample_categorical(probs.row(n), 1.0, rng.uniform());
    step.x[n] = static_cast<Compartment>(j);
    step.log_density += std::log(probs(n, j));
  }
  return step;
}

double initial_logprob(const ModelSpec& spec, std::span<const Compartment> x0) {
  double total = 0.0;
  for (std::size_t n = 0; n < spec.population(); ++n) total += std::log(spec.initial_probs()(n, x0[n]));
  return total;
}

double transition_logprob(const ModelSpec& spec, std::span<const Compartment> x_prev,
                          std::span<const Compartment> x_s) {
  const auto counts = to_real(count_compartments(x_prev, spec.compartments()));
  double total = 0.0;
  for (std::size_t n = 0; n < spec.population(); ++n) total += std::log(spec.kernel(n, counts)(x_prev[n], x_s[n]));
  return total;
}

double incremental_log_weight(const ModelSpec& spec, std::span<const Compartment> x_prev,
                              std::span<const Compartment> x_s, std::span<const std::uint8_t> y_s,
                              std::span<const double> q_s, double log_proposal) {
  return transition_logprob(spec, x_prev, x_s) + emission_logprob(x_s, y_s, q_s) - log_proposal;
}

}  // namespace epismc

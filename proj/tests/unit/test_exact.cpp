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

#include <gtest/gtest.h>

#include <array>
#include <cmath>
#include <limits>
#include <vector>

#include "epismc/errors.hpp"
#include "epismc/exact.hpp"
#include "epismc/smc.hpp"
#include "helpers.hpp"

namespace epismc {
namespace {

TEST(JointStateIndex, RoundTrip) {
  const JointStateIndex idx{3, 4};
  EXPECT_EQ(idx.size(), 64u);
  for (std::size_t k = 0; k < idx.size(); ++k) EXPECT_EQ(idx.encode(idx.decode(k)), k);
  EXPECT_EQ(idx.encode(PopulationState{1, 0, 0}), 1u);
  EXPECT_EQ(idx.encode(PopulationState{0, 1, 0}), 4u);
  EXPECT_THROW((JointStateIndex{30, 2}), StateSpaceTooLarge);
  EXPECT_THROW((JointStateIndex{5, 4, 1000}), StateSpaceTooLarge);
}

TEST(ExactForward, SingleIndividualHandValue) {
  Matrix<double> w(1, 2, 0.0);
  w(0, 0) = 1.0;
  const auto base = sis_spec({{0.0, 0.0}, {0.0, 0.0}, {-1.0, -1.0}}, w);
  ObservationMatrix y(1, 1, 2);
  const auto out = exact_forward(base, y, constant_rates(1, std::vector<double>{1.0, 1.0}));
  EXPECT_NEAR(std::exp(out.log_likelihood), 0.3655293, 5e-8);
}

TEST(ExactForward, NoReportsAndForbiddenPaths) {
  const auto spec = testing::seir_dgp(3, 1);
  const auto silent = exact_forward(spec, ObservationMatrix(4, 3, 0), constant_rates(4, std::vector<double>(4, 0.0)));
  EXPECT_EQ(silent.log_likelihood, 0.0);

  const auto one = seir_spec({{0.0}, {0.0}, 0.5, {0.0}}, testing::intercept_only(1, 1));
  ObservationMatrix y(2, 1, 0);
  y(0, 0) = 4;
  y(1, 0) = 1;
  const auto out = exact_forward(one, y, constant_rates(2, std::vector<double>(4, 1.0)));
  EXPECT_EQ(out.log_likelihood, -std::numeric_limits<double>::infinity());
  ASSERT_TRUE(out.impossible_step.has_value());
  // R at time 1 is reachable from I at time 0; S at time 2 is not.
  EXPECT_EQ(*out.impossible_step, 2u);
}

// Independent 4-state forward pass for a homogeneous N = 2 SIS population.
TEST(ExactForward, MatchesHandBuiltHmm) {
  const auto spec = sis_spec({{-0.4}, {1.3}, {-0.8}}, testing::intercept_only(2, 1));
  const auto data = testing::simulate_data(spec, 8, {0.4, 0.7}, 3);
  const double p0 = testing::sigmoid_ref(-0.4);
  const double lam = testing::sigmoid_ref(1.3);
  const double gam = testing::sigmoid_ref(-0.8);
  // State k: individual 0 is bit 0, individual 1 is bit 1 (1 = infected).
  auto ind = [](int k, int n) { return (k >> n) & 1; };
  std::array<double, 4> alpha{};
  for (int k = 0; k < 4; ++k) alpha[k] = (ind(k, 0) ? p0 : 1 - p0) * (ind(k, 1) ? p0 : 1 - p0);
  double loglik = 0.0;
  for (std::size_t s = 1; s <= 8; ++s) {
    std::array<double, 4> next{};
    for (int a = 0; a < 4; ++a) {
      const double infected = ind(a, 0) + ind(a, 1);
      for (int b = 0; b < 4; ++b) {
        double p = 1.0;
        for (int n = 0; n < 2; ++n) {
          const double inf = lam * infected / 2.0;
          const double row[2][2] = {{1 - inf, inf}, {gam, 1 - gam}};
          p *= row[ind(a, n)][ind(b, n)];
        }
        next[b] += alpha[a] * p;
      }
    }
    double z = 0.0;
    for (int b = 0; b < 4; ++b) {
      double e = 1.0;
      for (int n = 0; n < 2; ++n) {
        const int x = ind(b, n);
        const int obs = data.y(s - 1, n);
        const double q = x == 0 ? 0.4 : 0.7;
        e *= obs == 0 ? 1 - q : (obs == x + 1 ? q : 0.0);
      }
      next[b] *= e;
      z += next[b];
    }
    for (auto& v : next) v /= z;
    loglik += std::log(z);
    alpha = next;
  }
  const auto out = exact_forward(spec, data.y, data.q);
  EXPECT_NEAR(out.log_likelihood, loglik, 1e-12);
  for (int k = 0; k < 4; ++k) EXPECT_NEAR(out.filtering[8][k], alpha[k], 1e-12);
}

TEST(ExactForward, MarginalsConsistent) {
  const auto spec = testing::seir_dgp(4, 2);
  const auto data = testing::simulate_data(spec, 6, {0.1, 0.2, 0.5, 0.6}, 4);
  const auto out = exact_forward(spec, data.y, data.q);
  const JointStateIndex idx{4, 4};
  const auto means = filtering_count_means(idx, out);
  for (std::size_t s = 0; s <= 6; ++s) {
    const auto marg = individual_marginals(idx, out.filtering[s]);
    const auto c = count_means(idx, out.filtering[s]);
    double total = 0.0;
    for (std::size_t i = 0; i < 4; ++i) {
      double from_marg = 0.0;
      for (std::size_t n = 0; n < 4; ++n) from_marg += marg(n, i);
      EXPECT_NEAR(from_marg, c[i], 1e-12);
      EXPECT_NEAR(means(s, i), c[i], 1e-12);
      total += c[i];
    }
    EXPECT_NEAR(total, 4.0, 1e-12);
  }
}

TEST(ExactOptimalProposal, ZeroWindowNoReportsIsPrior) {
  const auto spec = testing::sis_dgp(3, 5);
  const auto y = ObservationMatrix(4, 3, 0);
  const auto q = constant_rates(4, std::vector<double>{0.0, 0.0});
  const PopulationState x_prev{0, 1, 0};
  const auto dist = exact_optimal_proposal(spec, y, q, x_prev, 2, 0);
  const JointStateIndex idx{3, 2};
  double total = 0.0;
  for (std::size_t k = 0; k < idx.size(); ++k) {
    EXPECT_NEAR(dist[k], std::exp(transition_logprob(spec, x_prev, idx.decode(k))), 1e-14);
    total += dist[k];
  }
  EXPECT_NEAR(total, 1.0, 1e-12);
}

TEST(ExactOptimalProposal, NormalizedAndValidated) {
  const auto spec = testing::seir_dgp(3, 5);
  const auto data = testing::simulate_data(spec, 6, {0, 0, 0.5, 0.5}, 2);
  const auto dist = exact_optimal_proposal(spec, data.y, data.q, data.trajectory.states[1], 2, 3);
  double total = 0.0;
  for (const double v : dist) total += v;
  EXPECT_NEAR(total, 1.0, 1e-12);
  EXPECT_THROW((void)exact_optimal_proposal(spec, data.y, data.q, data.trajectory.states[1], 5, 3), std::out_of_range);
  EXPECT_THROW((void)exact_optimal_proposal(spec, data.y, data.q, data.trajectory.states[1], 0, 1), std::out_of_range);
}

}  // namespace
}  // namespace epismc

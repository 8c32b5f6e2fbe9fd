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

#include <cmath>
#include <limits>
#include <vector>

#include "epismc/errors.hpp"
#include "epismc/exact.hpp"
#include "epismc/lookahead.hpp"
#include "epismc/smc.hpp"
#include "helpers.hpp"

namespace epismc {
namespace {

using testing::intercept_only;

TEST(XiBackwardStep, HandValues) {
  const auto spec = sis_spec({{0.0, 0.0}, {-1.0, 2.0}, {-1.0, -1.0}}, intercept_only(100));
  const std::vector<double> c{50.0, 50.0};
  const auto k = spec.kernel(0, c);
  const auto e = emission_table(std::vector<std::uint8_t>{2}, std::vector<double>{0.8, 0.8});
  std::vector<double> out(2);
  xi_backward_step(2, k.values(), e.values(), std::vector<double>{1.0, 1.0}, out);
  // Reference values are given to 7 decimals (truncated), so allow one unit in the last place.
  EXPECT_NEAR(out[0], 0.1075765, 1e-7);
  EXPECT_NEAR(out[1], 0.5848469, 1e-7);
  EXPECT_NEAR(out[0], testing::sigmoid_ref(-1.0) * 0.5 * 0.8, 1e-15);
  EXPECT_NEAR(out[1], (1.0 - testing::sigmoid_ref(-1.0)) * 0.8, 1e-15);
}

TEST(XiBackwardStep, OnesStayExactlyOne) {
  const auto k = testing::seir_dgp(10).kernel(2, std::vector<double>{3.3, 2.2, 1.1, 3.4});
  const std::vector<double> ones(4, 1.0);
  std::vector<double> out(4);
  xi_backward_step(4, k.values(), ones, ones, out);
  for (const double v : out) EXPECT_EQ(v, 1.0);
}

struct Fixture {
  ModelSpec spec;
  testing::Data data;
  SmoothingMarginals marginals;
};

Fixture make_fixture(bool seir, std::size_t n, std::size_t t, std::uint64_t seed) {
  auto spec = seir ? testing::seir_dgp(n, seed) : testing::sis_dgp(n, seed);
  const std::vector<double> q = seir ? std::vector<double>{0, 0, 0.4, 0.6} : std::vector<double>{0.8, 0.8};
  auto data = testing::simulate_data(spec, t, q, seed + 10);
  auto marginals = multinomial_smoother(spec, data.y, data.q);
  return {std::move(spec), std::move(data), std::move(marginals)};
}

TEST(XiRecursion, EmptyWindowAndUninformativeFuture) {
  const auto f = make_fixture(false, 20, 10, 1);
  const auto xi0 = xi_recursion(f.spec, f.marginals, f.data.q, f.data.y, 3, 0);
  for (const double v : xi0.values()) EXPECT_EQ(v, 1.0);
  const auto silent = ObservationMatrix(10, 20, 0);
  const auto zero_q = constant_rates(10, std::vector<double>{0.0, 0.0});
  const auto xi = xi_recursion(f.spec, f.marginals, zero_q, silent, 2, 5);
  for (const double v : xi.values()) EXPECT_EQ(v, 1.0);
}

TEST(XiRecursion, BoundedAndNonincreasingInWindow) {
  for (const bool seir : {false, true}) {
    const auto f = make_fixture(seir, 60, 30, 2);
    for (const std::size_t s : {0u, 5u, 17u}) {
      XiTable previous(60, f.spec.compartments(), 1.0);
      for (std::size_t h = 1; h <= 10; ++h) {
        const auto xi = xi_recursion(f.spec, f.marginals, f.data.q, f.data.y, s, h);
        for (std::size_t k = 0; k < xi.size(); ++k) {
          EXPECT_GE(xi.values()[k], 0.0);
          EXPECT_LE(xi.values()[k], previous.values()[k] * (1 + 1e-14));
        }
        previous = xi;
      }
    }
  }
}

TEST(XiTables, TruncationAndStreamingMatchPrecomputed) {
  const auto f = make_fixture(true, 40, 25, 3);
  const XiTables pre{f.spec, f.marginals, f.data.q, f.data.y, 7, XiStorage::kPrecomputed};
  const XiTables stream{f.spec, f.marginals, f.data.q, f.data.y, 7, XiStorage::kStreaming};
  EXPECT_EQ(pre.effective_window(10), 7u);
  EXPECT_EQ(pre.effective_window(20), 5u);
  EXPECT_EQ(pre.effective_window(25), 0u);
  for (std::size_t s = 0; s <= 25; ++s) {
    const auto direct = xi_recursion(f.spec, f.marginals, f.data.q, f.data.y, s, pre.effective_window(s));
    EXPECT_EQ(pre.at(s), direct) << s;
    EXPECT_EQ(stream.at(s), direct) << s;
  }
}

TEST(XiTilde, TrivialCases) {
  const auto spec = testing::sis_dgp(3, 1);
  const XiTable ones(3, 2, 1.0);
  const std::vector<double> c{2.0, 1.0};
  const auto t = xi_tilde(spec, ones, c, std::vector<std::uint8_t>{0, 0, 0}, std::vector<double>{0.0, 0.0});
  for (const double v : t.values()) EXPECT_NEAR(v, 1.0, 1e-15);

  // Certain reporting of E is impossible from I or R in SEIR.
  const auto seir = testing::seir_dgp(3, 1);
  const auto ts = xi_tilde(seir, XiTable(3, 4, 1.0), std::vector<double>{1, 1, 1, 0}, std::vector<std::uint8_t>{2, 0, 0},
                           std::vector<double>{0, 1, 0, 0});
  EXPECT_EQ(ts(0, 2), 0.0);
  EXPECT_EQ(ts(0, 3), 0.0);
  EXPECT_GT(ts(0, 0), 0.0);

  Matrix<double> p(2, 2, 0.0);
  p(0, 1) = 1.0;
  p(1, 0) = 1.0;
  const ModelSpec one_hot{p, testing::sis_dgp(2).transition_ptr()};
  XiTable xi(2, 2);
  xi(0, 0) = 0.1;
  xi(0, 1) = 0.4;
  xi(1, 0) = 0.7;
  xi(1, 1) = 0.2;
  const auto t0 = xi_tilde_initial(one_hot, xi);
  ASSERT_EQ(t0.cols(), 1u);
  EXPECT_EQ(t0(0, 0), 0.4);
  EXPECT_EQ(t0(1, 0), 0.7);
}

TEST(Proposal, HZeroEqualsApfAndBpf) {
  const auto f = make_fixture(true, 50, 20, 4);
  const XiTable ones(50, 4, 1.0);
  const auto& x_prev = f.data.trajectory.states[6];
  const auto y = f.data.y.row(6);
  const auto q = f.data.q.row(6);
  EXPECT_EQ(proposal_probabilities(f.spec, x_prev, ones, y, q), apf_proposal_probabilities(f.spec, x_prev, y, q));

  const std::vector<double> zero(4, 0.0);
  const std::vector<std::uint8_t> silent(50, 0);
  const auto bpf = proposal_probabilities(f.spec, x_prev, ones, silent, zero);
  EXPECT_EQ(bpf, apf_proposal_probabilities(f.spec, x_prev, silent, zero));
  const auto counts = to_real(count_compartments(x_prev, 4));
  for (std::size_t n = 0; n < 50; ++n) {
    const auto k = f.spec.kernel(n, counts);
    for (std::size_t j = 0; j < 4; ++j) EXPECT_EQ(bpf(n, j), k(x_prev[n], j));
  }
}

TEST(Proposal, CertainReportingForcesState) {
  const auto spec = testing::sis_dgp(4, 2);
  const PopulationState x_prev{0, 1, 1, 0};
  const std::vector<std::uint8_t> y{2, 1, 2, 1};
  const auto probs = apf_proposal_probabilities(spec, x_prev, y, std::vector<double>{1.0, 1.0});
  EXPECT_EQ(probs(0, 1), 1.0);
  EXPECT_EQ(probs(1, 0), 1.0);
  EXPECT_EQ(probs(2, 1), 1.0);
  EXPECT_EQ(probs(3, 0), 1.0);
}

TEST(Proposal, ForbiddenJumpIsDegenerate) {
  const auto spec = testing::seir_dgp(3, 2);
  const PopulationState x_prev{0, 2, 2};
  const std::vector<std::uint8_t> y{4, 0, 0};
  const std::vector<double> q{0, 0, 0.4, 0.6};
  EXPECT_THROW((void)apf_proposal_probabilities(spec, x_prev, y, q), DegenerateProposal);
  Rng rng{1};
  EXPECT_THROW((void)apf_propose(spec, x_prev, y, q, rng), DegenerateProposal);
}

TEST(Proposal, InitialFromOnes) {
  const auto spec = testing::sis_dgp(30, 3);
  Rng rng{5};
  const auto step = propose_initial(spec, XiTable(30, 2, 1.0), rng);
  EXPECT_NEAR(step.log_density, initial_logprob(spec, step.x), 1e-12);
}

// Weight-ratio identity: p(x_s | x_{s-1}) p(y_s | x_s) / q(x_s | x_{s-1}) = prod_n xi_tilde / xi.
TEST(Proposal, WeightRatioIdentity) {
  for (const bool seir : {false, true}) {
    const auto f = make_fixture(seir, 80, 30, 6);
    const XiTables tables{f.spec, f.marginals, f.data.q, f.data.y, 5};
    Rng rng{7};
    for (std::size_t s = 1; s <= 30; ++s) {
      const auto& x_prev = f.data.trajectory.states[s - 1];
      const auto counts = to_real(count_compartments(x_prev, f.spec.compartments()));
      const auto& xi = tables.at(s);
      const auto tilde = xi_tilde(f.spec, xi, counts, f.data.y.row(s - 1), f.data.q.row(s - 1));
      const auto step = propose_step(f.spec, x_prev, xi, tilde, f.data.y.row(s - 1), f.data.q.row(s - 1), rng);
      const double generic = incremental_log_weight(f.spec, x_prev, step.x, f.data.y.row(s - 1), f.data.q.row(s - 1),
                                                    step.log_density);
      double ratio = log_twist(x_prev, tilde);
      for (std::size_t n = 0; n < step.x.size(); ++n) ratio -= std::log(xi(n, step.x[n]));
      EXPECT_NEAR(generic, ratio, 1e-10) << s;
    }
  }
}

TEST(Proposal, MatchesExactConditionalForCountFreeModel) {
  // Individuals are independent under a count-free kernel, so the lookahead proposal is exact.
  for (const std::size_t n : {1u, 3u}) {
    const auto base = testing::sis_dgp(n, 2);
    const auto spec = testing::count_free(base);
    const auto data = testing::simulate_data(spec, 6, {0.6, 0.7}, 9);
    const auto marginals = multinomial_smoother(spec, data.y, data.q);
    const JointStateIndex index{n, 2};
    for (const std::size_t h : {0u, 1u, 3u}) {
      const XiTables tables{spec, marginals, data.q, data.y, h};
      for (std::size_t s = 1; s + h <= 6; ++s) {
        const auto& x_prev = data.trajectory.states[s - 1];
        const auto probs = proposal_probabilities(spec, x_prev, tables.at(s), data.y.row(s - 1), data.q.row(s - 1));
        const auto exact = exact_optimal_proposal(spec, data.y, data.q, x_prev, s, h);
        for (std::size_t k = 0; k < index.size(); ++k) {
          const auto x = index.decode(k);
          double p = 1.0;
          for (std::size_t i = 0; i < n; ++i) p *= probs(i, x[i]);
          EXPECT_NEAR(p, exact[k], 1e-10);
        }
      }
    }
  }
}

TEST(Proposal, CountFreeModelAtNOneEqualsOriginal) {
  const auto base = testing::sis_dgp(1, 2);
  const auto wrapped = testing::count_free(base);
  for (Compartment x = 0; x < 2; ++x) {
    std::vector<double> c(2, 0.0);
    c[x] = 1.0;
    const auto a = base.kernel(0, c);
    const auto b = wrapped.kernel(0, std::vector<double>{0.5, 0.5});
    for (std::size_t j = 0; j < 2; ++j) EXPECT_EQ(a(x, j), b(x, j));
  }
}

TEST(Proposal, InitialTwistGivesExactEvidenceForCountFreeModel) {
  const auto spec = testing::count_free(testing::sis_dgp(3, 1));
  const auto data = testing::simulate_data(spec, 3, {0.5, 0.9}, 2);
  const auto marginals = multinomial_smoother(spec, data.y, data.q);
  const XiTables tables{spec, marginals, data.q, data.y, 3};
  const auto t0 = xi_tilde_initial(spec, tables.at(0));
  double log_evidence = 0.0;
  for (std::size_t n = 0; n < 3; ++n) log_evidence += std::log(t0(n, 0));
  EXPECT_NEAR(log_evidence, exact_forward(spec, data.y, data.q).log_likelihood, 1e-12);
}

TEST(ResamplingProbs, Arithmetic) {
  const std::vector<double> w{0.0, 0.0};
  const std::vector<double> twist{std::log(0.2), std::log(0.8)};
  const auto r = resampling_probs(w, twist);
  EXPECT_NEAR(r[0], 0.2, 1e-15);
  EXPECT_NEAR(r[1], 0.8, 1e-15);
  const std::vector<double> single{-3.0};
  EXPECT_EQ(resampling_probs(single, std::vector<double>{-1.0})[0], 1.0);

  const std::vector<double> lw{-1.0, -2.0, -0.5};
  const std::vector<double> constant(3, -7.0);
  const auto rc = resampling_probs(lw, constant);
  double z = 0.0;
  for (const double v : lw) z += std::exp(v);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(rc[i], std::exp(lw[i]) / z, 1e-15);

  const double ninf = -std::numeric_limits<double>::infinity();
  const std::vector<double> dead{ninf, ninf};
  EXPECT_THROW((void)resampling_probs(dead, std::vector<double>{0.0, 0.0}, 4), DegenerateFilter);
}

}  // namespace
}  // namespace epismc

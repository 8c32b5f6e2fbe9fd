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
#include <vector>

#include "epismc/meanfield.hpp"
#include "helpers.hpp"

namespace epismc {
namespace {

using testing::intercept_only;

void expect_simplex(const Matrix<double>& m, double tol) {
  for (std::size_t r = 0; r < m.rows(); ++r) {
    double sum = 0.0;
    for (std::size_t c = 0; c < m.cols(); ++c) {
      EXPECT_GE(m(r, c), -tol);
      sum += m(r, c);
    }
    EXPECT_NEAR(sum, 1.0, tol) << "row " << r;
  }
}

ModelSpec identity_model(std::size_t n, std::size_t m) {
  Matrix<double> p(n, m, 1.0 / static_cast<double>(m));
  auto kernel = std::make_shared<FunctionKernel>(n, m, [m](std::size_t, std::span<const double>, std::span<double> out) {
    std::fill(out.begin(), out.end(), 0.0);
    for (std::size_t i = 0; i < m; ++i) out[i * m + i] = 1.0;
  });
  return ModelSpec{p, kernel};
}

TEST(MeanModel, Averages) {
  Matrix<double> p(2, 2, 0.0);
  p(0, 0) = 1.0;
  p(1, 1) = 1.0;
  auto kernel = std::make_shared<FunctionKernel>(2, 2, [](std::size_t n, std::span<const double>, std::span<double> out) {
    const double inf = n == 0 ? 0.2 : 0.4;
    out[0] = 1 - inf;
    out[1] = inf;
    out[2] = 0.5;
    out[3] = 0.5;
  });
  const auto mm = mean_model(ModelSpec{p, kernel});
  EXPECT_EQ(mm.p_bar0(), (std::vector<double>{0.5, 0.5}));
  const std::vector<double> c{1.0, 1.0};
  EXPECT_NEAR(mm.k_bar(c)(0, 1), 0.3, 1e-15);
}

TEST(MeanModel, HomogeneousEqualsIndividualKernel) {
  const auto spec = sis_spec({{0.3}, {1.2}, {-0.4}}, intercept_only(7, 1));
  const auto mm = mean_model(spec);
  const std::vector<double> c{4.5, 2.5};
  const auto a = mm.k_bar(c);
  const auto b = spec.kernel(3, c);
  for (std::size_t i = 0; i < 2; ++i)
    for (std::size_t j = 0; j < 2; ++j) EXPECT_NEAR(a(i, j), b(i, j), 1e-15);
}

// Independent long-double evaluation of the forward/backward recursions for homogeneous SIS.
struct RefSis {
  long double lambda, gamma, n;
  [[nodiscard]] std::array<std::array<long double, 2>, 2> kernel(std::array<long double, 2> m) const {
    const long double inf = lambda * m[1];
    return {{{1 - inf, inf}, {gamma, 1 - gamma}}};
  }
};

TEST(Multinomial, HandRunTwoSteps) {
  const long double lam = 1.0L / (1.0L + std::exp(-0.9L));
  const long double gam = 1.0L / (1.0L + std::exp(0.6L));
  const long double p0 = 1.0L / (1.0L + std::exp(1.1L));
  const RefSis ref{lam, gam, 20.0L};
  const long double q[2][2] = {{0.3L, 0.6L}, {0.5L, 0.2L}};
  const long double o[2][2] = {{3, 4}, {6, 1}};

  std::array<std::array<long double, 2>, 3> filt{};
  std::array<std::array<long double, 2>, 2> pred{};
  filt[0] = {1 - p0, p0};
  for (int s = 1; s <= 2; ++s) {
    const auto k = ref.kernel(filt[s - 1]);
    for (int j = 0; j < 2; ++j) pred[s - 1][j] = filt[s - 1][0] * k[0][j] + filt[s - 1][1] * k[1][j];
    const long double share = 1 - (o[s - 1][0] + o[s - 1][1]) / ref.n;
    const long double denom = 1 - pred[s - 1][0] * q[s - 1][0] - pred[s - 1][1] * q[s - 1][1];
    for (int i = 0; i < 2; ++i)
      filt[s][i] = o[s - 1][i] / ref.n + share * pred[s - 1][i] * (1 - q[s - 1][i]) / denom;
  }
  std::array<std::array<long double, 2>, 3> smooth{};
  smooth[2] = filt[2];
  for (int s = 1; s >= 0; --s) {
    const auto k = ref.kernel(filt[s]);
    for (int i = 0; i < 2; ++i) {
      long double acc = 0;
      for (int j = 0; j < 2; ++j) {
        const long double col = filt[s][0] * k[0][j] + filt[s][1] * k[1][j];
        acc += smooth[s + 1][j] * filt[s][i] * k[i][j] / col;
      }
      smooth[s][i] = acc;
    }
  }

  const auto spec = sis_spec({{-1.1}, {0.9}, {-0.6}}, intercept_only(20, 1));
  AggregateCounts agg(2, 2);
  ReportingRates rates(2, 2);
  for (int s = 0; s < 2; ++s)
    for (int i = 0; i < 2; ++i) {
      agg(s, i) = static_cast<std::int64_t>(o[s][i]);
      rates(s, i) = static_cast<double>(q[s][i]);
    }
  const auto mm = mean_model(spec);
  const auto out = backward_pass(mm, forward_pass(mm, agg, rates, 20), 20);
  ASSERT_EQ(out.horizon(), 2u);
  for (int s = 0; s <= 2; ++s)
    for (int i = 0; i < 2; ++i) {
      EXPECT_NEAR(out.filtered(s, i), static_cast<double>(filt[s][i]), 1e-14);
      EXPECT_NEAR(out.smoothed(s, i), static_cast<double>(smooth[s][i]), 1e-14);
    }
  for (int s = 0; s < 2; ++s)
    for (int i = 0; i < 2; ++i) EXPECT_NEAR(out.predicted(s, i), static_cast<double>(pred[s][i]), 1e-14);
}

TEST(Multinomial, SimplexOverLongHorizon) {
  for (const bool seir : {false, true}) {
    const auto spec = seir ? testing::seir_dgp(300, 2) : testing::sis_dgp(100, 2);
    const std::vector<double> q = seir ? std::vector<double>{0, 0, 0.4, 0.6} : std::vector<double>{0.8, 0.8};
    const auto data = testing::simulate_data(spec, 100, q, 3);
    const auto sm = multinomial_smoother(spec, data.y, data.q);
    expect_simplex(sm.filtered, 1e-8);
    expect_simplex(sm.predicted, 1e-8);
    expect_simplex(sm.smoothed, 1e-8);
    for (const auto& l : sm.reverse_kernels) expect_simplex(l, 1e-10);
  }
}

TEST(Multinomial, FullReportingCollapse) {
  const auto spec = sis_spec({{-1.0}, {1.5}, {-1.0}}, intercept_only(30, 1));
  const auto data = testing::simulate_data(spec, 25, {1.0, 1.0}, 4);
  const auto sm = multinomial_smoother(spec, data.y, data.q);
  const auto o = aggregate_counts(data.y, 2);
  for (std::size_t s = 1; s <= 25; ++s)
    for (std::size_t i = 0; i < 2; ++i) {
      EXPECT_EQ(sm.filtered(s, i), static_cast<double>(o(s - 1, i)) / 30.0);
      EXPECT_EQ(sm.smoothed(s, i), static_cast<double>(o(s - 1, i)) / 30.0);
    }
}

TEST(Multinomial, ZeroReportingIteratesMeanFieldMap) {
  const auto spec = testing::seir_dgp(60, 5);
  const std::size_t t = 40;
  const auto sm = multinomial_smoother(spec, ObservationMatrix(t, 60, 0), constant_rates(t, std::vector<double>(4, 0.0)));
  const auto mm = mean_model(spec);
  std::vector<double> m = mm.p_bar0();
  for (std::size_t s = 1; s <= t; ++s) {
    std::vector<double> counts(4);
    for (std::size_t i = 0; i < 4; ++i) counts[i] = 60.0 * m[i];
    const auto k = mm.k_bar(counts);
    std::vector<double> next(4, 0.0);
    for (std::size_t i = 0; i < 4; ++i)
      for (std::size_t j = 0; j < 4; ++j) next[j] += m[i] * k(i, j);
    m = next;
    for (std::size_t i = 0; i < 4; ++i) {
      EXPECT_NEAR(sm.filtered(s, i), m[i], 1e-12);
      EXPECT_EQ(sm.filtered(s, i), sm.predicted(s - 1, i));
    }
  }
}

TEST(Multinomial, IdentityKernel) {
  const auto spec = identity_model(10, 3);
  ObservationMatrix y(6, 10, 0);
  y(2, 0) = 1;
  y(2, 1) = 3;
  y(4, 5) = 2;
  const auto sm = multinomial_smoother(spec, y, constant_rates(6, std::vector<double>{0.3, 0.5, 0.2}));
  for (std::size_t s = 1; s <= 6; ++s)
    for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(sm.predicted(s - 1, i), sm.filtered(s - 1, i), 1e-15);
  for (std::size_t s = 0; s <= 6; ++s)
    for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(sm.smoothed(s, i), sm.smoothed(6, i), 1e-12);
}

TEST(Multinomial, RejectsInfeasibleCounts) {
  const auto spec = sis_spec({{0.0}, {0.0}, {0.0}}, intercept_only(5, 1));
  const auto mm = mean_model(spec);
  AggregateCounts o(1, 2, 0);
  o(0, 0) = 4;
  o(0, 1) = 2;
  EXPECT_THROW((void)forward_pass(mm, o, constant_rates(1, std::vector<double>{0.5, 0.5}), 5), std::invalid_argument);
}

TEST(Multinomial, UnreachableColumnGivesUniformRow) {
  // Nobody can enter compartment 2, so column 2 of the joint mass is zero.
  const auto spec = seir_spec({{-1000.0}, {0.0}, 0.2, {0.0}}, intercept_only(4, 1));
  const auto sm = multinomial_smoother(spec, ObservationMatrix(2, 4, 0), constant_rates(2, std::vector<double>(4, 0.0)));
  const auto& l = sm.reverse_kernels[0];
  for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(l(3, i), 0.25);
  expect_simplex(sm.smoothed, 1e-12);
}

TEST(CountEstimate, ScalesSmoothed) {
  SmoothingMarginals sm;
  sm.smoothed = Matrix<double>(2, 2);
  sm.smoothed(1, 0) = 0.3;
  sm.smoothed(1, 1) = 0.7;
  const auto c = count_estimate(sm, 100, 1);
  EXPECT_NEAR(c[0], 30.0, 1e-12);
  EXPECT_NEAR(c[1], 70.0, 1e-12);
  EXPECT_THROW((void)count_estimate(sm, 100, 2), std::out_of_range);
}

}  // namespace
}  // namespace epismc

// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The MRAM Authors

#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "mram/router.hpp"
#include "test_support.hpp"

namespace {

using mram::DiscreteDistribution;

// Two-bin distribution whose JS divergence from a one-hot query equals `target`.
const DiscreteDistribution kOneHot = DiscreteDistribution::from_probs({1.0, 0.0});

DiscreteDistribution with_divergence(double target) {
  double lo = 0.0, hi = 1.0;  // JS falls as the first bin's mass rises
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mram::js_divergence(kOneHot.probs(), std::vector<double>{mid, 1.0 - mid}) > target)
      lo = mid;
    else
      hi = mid;
  }
  return DiscreteDistribution::from_probs({lo, 1.0 - lo});
}

std::vector<DiscreteDistribution> random_dists(std::mt19937_64& rng, std::size_t n, std::size_t d) {
  std::vector<DiscreteDistribution> out;
  for (std::size_t j = 0; j < n; ++j) out.push_back(DiscreteDistribution::from_probs(mram::testing::random_probs(rng, d)));
  return out;
}

TEST(Routing, ScoresAndProbsExample) {
  const std::vector<DiscreteDistribution> protos{with_divergence(0.1), with_divergence(0.3)};
  const auto scores = mram::routing_scores(kOneHot, protos, 1e-8);
  EXPECT_NEAR(scores[0], 10.0, 1e-6);
  EXPECT_NEAR(scores[1], 10.0 / 3.0, 1e-6);
  const auto probs = mram::routing_probs(scores, 1.0);
  const double e = std::exp(10.0 - 10.0 / 3.0);
  EXPECT_NEAR(probs[0], e / (1 + e), 1e-6);
  EXPECT_NEAR(probs[0], 0.998729, 1e-6);
  EXPECT_NEAR(probs[1], 0.001271, 1e-6);
}

TEST(Routing, IdenticalPrototypeDominatesWithoutOverflow) {
  const auto query = DiscreteDistribution::from_probs({0.2, 0.3, 0.5});
  const std::vector<DiscreteDistribution> protos{DiscreteDistribution::from_probs({0.4, 0.3, 0.3}), query,
                                                 DiscreteDistribution::from_probs({0.1, 0.1, 0.8})};
  const auto d = mram::route(query, protos, 1e-8, 1.0, 1);
  EXPECT_NEAR(d.scores[1], 1e8, 1e-3);
  EXPECT_TRUE(mram::all_finite(d.probs));
  EXPECT_EQ(d.probs[1], 1.0);
  EXPECT_EQ(d.selected, (std::vector<std::size_t>{1}));
}

TEST(Routing, RejectsInvalidHyperparameters) {
  const auto q = DiscreteDistribution::from_probs({0.5, 0.5});
  const std::vector<DiscreteDistribution> protos{q};
  EXPECT_THROW(mram::routing_scores(q, protos, 0.0), mram::ConfigError);
  EXPECT_THROW(mram::routing_probs(std::vector<double>{1.0}, 0.0), mram::ConfigError);
  EXPECT_THROW(mram::top_k_select(std::vector<double>{0.5, 0.5}, 0), mram::ConfigError);
  EXPECT_THROW(mram::top_k_select(std::vector<double>{0.5, 0.5}, 3), mram::ConfigError);
  const std::vector<DiscreteDistribution> wrong{DiscreteDistribution::from_probs({0.2, 0.3, 0.5})};
  EXPECT_THROW(mram::routing_scores(q, wrong, 1e-8), mram::DimensionError);
}

TEST(TopK, TiesGoToLowerIndexAndResultIsAscending) {
  const std::vector<double> p{0.1, 0.3, 0.3, 0.3};
  for (int rep = 0; rep < 100; ++rep) EXPECT_EQ(mram::top_k_select(p, 2), (std::vector<std::size_t>{1, 2}));
  EXPECT_EQ(mram::top_k_select(std::vector<double>{0.4, 0.1, 0.5}, 2), (std::vector<std::size_t>{0, 2}));
  EXPECT_EQ(mram::top_k_select(std::vector<double>(5, 0.2), 5), (std::vector<std::size_t>{0, 1, 2, 3, 4}));
}

TEST(TopK, SelectsTheLargest) {
  std::mt19937_64 rng(12);
  for (int t = 0; t < 200; ++t) {
    const auto p = mram::testing::random_probs(rng, 10);
    const auto sel = mram::top_k_select(p, 4);
    double min_selected = 1.0;
    for (std::size_t j : sel) min_selected = std::min(min_selected, p[j]);
    for (std::size_t j = 0; j < 10; ++j) {
      if (std::find(sel.begin(), sel.end(), j) == sel.end()) {
        EXPECT_LE(p[j], min_selected);
      }
    }
  }
}

TEST(Routing, ArgmaxProbIsArgminDivergence) {
  std::mt19937_64 rng(21);
  for (int t = 0; t < 300; ++t) {
    const auto query = DiscreteDistribution::from_probs(mram::testing::random_probs(rng, 8));
    const auto protos = random_dists(rng, 6, 8);
    const auto d = mram::route(query, protos, 1e-8, 1.0, 2);
    std::vector<double> js;
    for (const auto& p : protos) js.push_back(mram::js_divergence(query, p));
    EXPECT_EQ(mram::argmax(d.probs), mram::argmin(js));
    double sum = 0.0;
    for (double v : d.probs) {
      EXPECT_GE(v, 0.0);
      sum += v;
    }
    EXPECT_NEAR(sum, 1.0, 1e-9);
  }
}

TEST(Routing, HigherTemperatureSharpens) {
  std::mt19937_64 rng(22);
  for (int t = 0; t < 100; ++t) {
    const auto query = DiscreteDistribution::from_probs(mram::testing::random_probs(rng, 4));
    const auto protos = random_dists(rng, 5, 4);
    const auto s = mram::routing_scores(query, protos, 1e-8);
    const auto soft = mram::routing_probs(s, 0.5);
    const auto sharp = mram::routing_probs(s, 2.0);
    const std::size_t top = mram::argmax(s);
    EXPECT_GE(sharp[top], soft[top] - 1e-15);
  }
}

TEST(LinearGate, UniformForZeroOrIdenticalRows) {
  const std::vector<double> x{0.3, -1.0, 2.0};
  const auto zero = mram::baseline_linear_gate(x, mram::GateParams::zeros(4, 3));
  for (double v : zero) EXPECT_DOUBLE_EQ(v, 0.25);
  auto g = mram::GateParams::zeros(4, 3);
  for (std::size_t j = 0; j < 4; ++j) {
    g.weights(j, 0) = 1.5;
    g.weights(j, 2) = -0.5;
    g.bias[j] = 0.1;
  }
  for (double v : mram::baseline_linear_gate(x, g)) EXPECT_NEAR(v, 0.25, 1e-15);
  EXPECT_THROW(mram::baseline_linear_gate(std::vector<double>{1.0}, g), mram::DimensionError);
}

TEST(LinearGate, DeterministicInitAndBackward) {
  std::mt19937_64 a(5), b(5);
  const auto ga = mram::GateParams::random(3, 4, a);
  EXPECT_EQ(ga, mram::GateParams::random(3, 4, b));

  std::mt19937_64 rng(6);
  const auto x = mram::testing::random_vector(rng, 4);
  const auto w = mram::testing::random_vector(rng, 3);
  const auto p = mram::baseline_linear_gate(x, ga);
  const auto grad = mram::linear_gate_backward(x, p, w);
  const double h = 1e-6;
  for (std::size_t k = 0; k < ga.weights.data.size(); ++k) {
    auto up = ga, down = ga;
    up.weights.data[k] += h;
    down.weights.data[k] -= h;
    const double fd = (mram::dot(mram::baseline_linear_gate(x, up), w) -
                       mram::dot(mram::baseline_linear_gate(x, down), w)) / (2 * h);
    EXPECT_NEAR(grad.weights.data[k], fd, 1e-8);
  }
}

}  // namespace

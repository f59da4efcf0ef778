// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The MRAM Authors

#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <random>

#include "mram/aggregator.hpp"
#include "test_support.hpp"

namespace {

using mram::DiscreteDistribution;
using mram::Matrix;

TEST(Aggregation, WeightsFromDivergences) {
  // Build expert distributions whose JS to the query is exactly known by
  // reading the divergence back instead of hand-tuning probabilities.
  const auto query = DiscreteDistribution::from_probs({0.5, 0.5});
  std::map<std::size_t, DiscreteDistribution> dists{{3, DiscreteDistribution::from_probs({0.9, 0.1})},
                                                    {7, DiscreteDistribution::from_probs({0.99, 0.01})}};
  const auto w = mram::aggregation_weights(query, dists, 1e-8);
  const double d3 = mram::js_divergence(query, dists.at(3));
  const double d7 = mram::js_divergence(query, dists.at(7));
  EXPECT_EQ(w.divergences.at(3), d3);
  const double r3 = 1 / (1e-8 + d3), r7 = 1 / (1e-8 + d7);
  EXPECT_NEAR(w.weights.at(3), r3 / (r3 + r7), 1e-15);
  EXPECT_NEAR(w.weights.at(3) + w.weights.at(7), 1.0, 1e-15);
  EXPECT_GT(w.weights.at(3), w.weights.at(7));
}

TEST(Aggregation, TwoToOneExample) {
  // delta = {0.1, 0.2} gives beta = {2/3, 1/3}; exercised through the raw
  // normalization with divergences injected directly.
  mram::AggregationWeights w;
  w.raw_weights = {{0, 1 / (1e-8 + 0.1)}, {1, 1 / (1e-8 + 0.2)}};
  const double total = w.raw_weights[0] + w.raw_weights[1];
  EXPECT_NEAR(w.raw_weights[0] / total, 2.0 / 3.0, 1e-7);
  EXPECT_NEAR(w.raw_weights[1] / total, 1.0 / 3.0, 1e-7);
}

TEST(Aggregation, AggregateExample) {
  Matrix a(2, 2), b(2, 2);
  a.data = {0.5, 0.5, 0.5, 0.5};
  b.data = {2, 2, 2, 2};
  const std::map<std::size_t, double> w{{0, 2.0 / 3.0}, {1, 1.0 / 3.0}};
  const auto y = mram::aggregate(w, std::map<std::size_t, Matrix>{{0, a}, {1, b}});
  for (double v : y.data) EXPECT_NEAR(v, 1.0, 1e-15);
}

TEST(Aggregation, ErrorsOnEmptyOrMismatched) {
  const auto q = DiscreteDistribution::from_probs({0.5, 0.5});
  EXPECT_THROW(mram::aggregation_weights(q, {}, 1e-8), mram::InvalidInputError);
  std::map<std::size_t, DiscreteDistribution> bad{{0, DiscreteDistribution::from_probs({0.2, 0.3, 0.5})}};
  EXPECT_THROW(mram::aggregation_weights(q, bad, 1e-8), mram::DimensionError);
  const std::map<std::size_t, double> w{{0, 1.0}};
  EXPECT_THROW(mram::aggregate(w, std::map<std::size_t, Matrix>{{1, Matrix(1, 1)}}), mram::InvalidInputError);
}

TEST(Aggregation, OrderingConvexityAndPermutation) {
  std::mt19937_64 rng(31);
  for (int t = 0; t < 300; ++t) {
    const std::size_t d = 6, n = 4;
    const auto query = DiscreteDistribution::from_probs(mram::testing::random_probs(rng, d));
    std::map<std::size_t, DiscreteDistribution> dists;
    std::map<std::size_t, Matrix> outs;
    for (std::size_t j = 0; j < n; ++j) {
      dists.emplace(j * 2, DiscreteDistribution::from_probs(mram::testing::random_probs(rng, d)));
      outs.emplace(j * 2, mram::testing::random_matrix(rng, 3, 2));
    }
    const auto w = mram::aggregation_weights(query, dists, 1e-8);
    double sum = 0.0, best_beta = -1, best_delta = INFINITY;
    std::size_t arg_beta = 0, arg_delta = 0;
    for (const auto& [j, b] : w.weights) {
      EXPECT_GE(b, 0.0);
      sum += b;
      if (b > best_beta) best_beta = b, arg_beta = j;
      if (w.divergences.at(j) < best_delta) best_delta = w.divergences.at(j), arg_delta = j;
    }
    EXPECT_NEAR(sum, 1.0, 1e-12);
    EXPECT_EQ(arg_beta, arg_delta);

    const Matrix y = mram::aggregate(w, outs);
    for (std::size_t k = 0; k < y.data.size(); ++k) {
      double lo = INFINITY, hi = -INFINITY;
      for (const auto& [j, m] : outs) lo = std::min(lo, m.data[k]), hi = std::max(hi, m.data[k]);
      EXPECT_GE(y.data[k], lo - 1e-12);
      EXPECT_LE(y.data[k], hi + 1e-12);
    }

    // Relabel experts in reverse; the mixture is unchanged.
    std::map<std::size_t, DiscreteDistribution> rd;
    std::map<std::size_t, Matrix> ro;
    for (const auto& [j, dist] : dists) rd.emplace(100 - j, dist), ro.emplace(100 - j, outs.at(j));
    const Matrix y2 = mram::aggregate(mram::aggregation_weights(query, rd, 1e-8), ro);
    for (std::size_t k = 0; k < y.data.size(); ++k) EXPECT_NEAR(y.data[k], y2.data[k], 1e-12);
  }
}

TEST(Aggregation, IdenticalExpertDominates) {
  const auto q = DiscreteDistribution::from_probs({0.3, 0.7});
  std::map<std::size_t, DiscreteDistribution> dists{{0, q}, {1, DiscreteDistribution::from_probs({0.6, 0.4})}};
  const auto w = mram::aggregation_weights(q, dists, 1e-8);
  EXPECT_GT(w.weights.at(0), 0.999999);
  EXPECT_TRUE(std::isfinite(w.raw_weights.at(0)));
}

TEST(Aggregation, OutputDistributionProjectsWhenWidthsDiffer) {
  std::mt19937_64 rng(2);
  const auto proj = mram::Projection::random(5, 3, rng);
  const auto h = mram::testing::random_vector(rng, 5);
  const auto d = mram::output_distribution(h, proj, 3);
  EXPECT_EQ(d, mram::normalize(proj.apply(h)));
  const auto same = mram::output_distribution(std::vector<double>{1, 2, 3}, proj, 3);
  EXPECT_EQ(same, mram::normalize(std::vector<double>{1, 2, 3}));
  EXPECT_THROW(mram::output_distribution(h, proj, 4), mram::DimensionError);
}

TEST(Aggregation, DivergenceGradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(17);
  const std::vector<double> deltas{0.12, 0.05, 0.3};
  std::map<std::size_t, Matrix> outs;
  for (std::size_t j = 0; j < 3; ++j) outs.emplace(j, mram::testing::random_matrix(rng, 2, 2));
  const Matrix g = mram::testing::random_matrix(rng, 2, 2);
  auto weights_for = [&](const std::vector<double>& d) {
    mram::AggregationWeights w;
    double total = 0;
    for (std::size_t j = 0; j < 3; ++j) {
      w.divergences[j] = d[j];
      w.raw_weights[j] = 1 / (1e-8 + d[j]);
      total += w.raw_weights[j];
    }
    for (std::size_t j = 0; j < 3; ++j) w.weights[j] = w.raw_weights[j] / total;
    return w;
  };
  const auto analytic = mram::aggregation_divergence_gradient(weights_for(deltas), outs, g);
  for (std::size_t j = 0; j < 3; ++j) {
    auto up = deltas, down = deltas;
    up[j] += 1e-7;
    down[j] -= 1e-7;
    const double fd = (mram::dot(g.data, mram::aggregate(weights_for(up), outs).data) -
                       mram::dot(g.data, mram::aggregate(weights_for(down), outs).data)) / 2e-7;
    EXPECT_NEAR(analytic.at(j), fd, 1e-6 * std::max(1.0, std::abs(fd)));
  }
}

}  // namespace

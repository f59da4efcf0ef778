// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The MRAM Authors

#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "mram/losses.hpp"
#include "test_support.hpp"

namespace {

using mram::Matrix;

Matrix rows_of(std::initializer_list<std::vector<double>> rows) {
  Matrix m(rows.size(), rows.begin()->size());
  std::size_t r = 0;
  for (const auto& row : rows) std::copy(row.begin(), row.end(), m.row(r++).begin());
  return m;
}

TEST(CrossEntropy, WorkedExample) {
  const Matrix logits = rows_of({{2.0, 1.0, 0.1}});
  const std::vector<std::uint8_t> labels{0};
  const double expected = -std::log(std::exp(2.0) / (std::exp(2.0) + std::exp(1.0) + std::exp(0.1)));
  EXPECT_NEAR(mram::cross_entropy(logits, labels), expected, 1e-15);
  EXPECT_NEAR(mram::cross_entropy(logits, labels), 0.417030, 1e-6);
}

TEST(CrossEntropy, TwoPixelExample) {
  const Matrix logits = rows_of({{0.0, std::log(3.0)}, {0.0, 0.0}});
  const std::vector<std::uint8_t> labels{1, 0};
  EXPECT_NEAR(mram::cross_entropy(logits, labels), (-std::log(0.75) - std::log(0.5)) / 2, 1e-15);
  EXPECT_NEAR(mram::cross_entropy(logits, labels), 0.490415, 1e-6);
}

TEST(CrossEntropy, SaturatedPredictionIsNearZero) {
  Matrix logits(3, 4);
  const std::vector<std::uint8_t> labels{0, 2, 3};
  for (std::size_t p = 0; p < 3; ++p) logits(p, labels[p]) = 50.0;
  EXPECT_LE(mram::cross_entropy(logits, labels), 1e-9);
}

TEST(CrossEntropy, TwoPixelMean) {
  const Matrix logits = rows_of({{1.0, 0.0}, {0.0, 1.0}});
  const std::vector<std::uint8_t> labels{0, 0};
  const double a = std::log(1 + std::exp(-1.0)), b = std::log(1 + std::exp(1.0));
  EXPECT_NEAR(mram::cross_entropy(logits, labels), 0.5 * (a + b), 1e-15);
}

TEST(CrossEntropy, UniformLogitsGiveLogC) {
  const Matrix logits(5, 6, 0.25);
  const std::vector<std::uint8_t> labels{0, 1, 2, 3, 5};
  EXPECT_NEAR(mram::cross_entropy(logits, labels), std::log(6.0), 1e-14);
}

TEST(CrossEntropy, ValidatesLabels) {
  const Matrix logits(2, 3);
  EXPECT_THROW(mram::cross_entropy(logits, std::vector<std::uint8_t>{0, 3}), mram::InvalidInputError);
  EXPECT_THROW(mram::cross_entropy(logits, std::vector<std::uint8_t>{0}), mram::DimensionError);
}

TEST(CrossEntropy, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(1);
  Matrix logits = mram::testing::random_matrix(rng, 3, 4);
  const std::vector<std::uint8_t> labels{1, 3, 0};
  const auto g = mram::cross_entropy_gradient(logits, labels);
  for (std::size_t k = 0; k < logits.data.size(); ++k) {
    auto up = logits, down = logits;
    up.data[k] += 1e-6;
    down.data[k] -= 1e-6;
    EXPECT_NEAR(g.data[k], (mram::cross_entropy(up, labels) - mram::cross_entropy(down, labels)) / 2e-6, 1e-8);
  }
}

TEST(LoadBalance, UniformAndOneHotValues) {
  const Matrix uniform(3, 4, 0.25);
  EXPECT_NEAR(mram::load_balance_loss(uniform), -2 * std::log(4.0), 1e-12);
  const Matrix onehot = rows_of({{1, 0, 0, 0}, {1, 0, 0, 0}});
  // Empty experts are clamped to 1e-12 before the logarithm.
  EXPECT_NEAR(mram::load_balance_loss(onehot), -std::log(4.0), 1e-9);
}

TEST(LoadBalance, UniformIsTheMinimumOverTheSimplex) {
  std::mt19937_64 rng(19);
  const double floor = -2 * std::log(10.0) - 1e-9;
  for (int t = 0; t < 10000; ++t) {
    const auto p = mram::testing::random_probs(rng, 10);
    Matrix m(1, 10);
    m.data = p;
    ASSERT_GE(mram::load_balance_loss(m), floor);
  }
  Matrix onehot(1, 10);
  onehot(0, 7) = 1.0;
  EXPECT_NEAR(mram::load_balance_loss(onehot), -std::log(10.0), 1e-9);
}

TEST(LoadBalance, RejectsInvalidRows) {
  EXPECT_THROW(mram::load_balance_loss(rows_of({{0.5, 0.6}})), mram::InvalidInputError);
  EXPECT_THROW(mram::load_balance_loss(rows_of({{1.5, -0.5}})), mram::InvalidInputError);
  EXPECT_THROW(mram::load_balance_loss(Matrix(0, 3)), mram::InvalidInputError);
}

TEST(LoadBalance, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(4);
  Matrix probs(3, 4);
  for (std::size_t i = 0; i < 3; ++i) {
    const auto p = mram::testing::random_probs(rng, 4);
    std::copy(p.begin(), p.end(), probs.row(i).begin());
  }
  const auto g = mram::load_balance_gradient(probs);
  // Unconstrained partial derivative: bypass the row-sum check.
  auto lb = [](const Matrix& m) {
    double acc = 0;
    for (std::size_t j = 0; j < m.cols; ++j) {
      double u = 0;
      for (std::size_t i = 0; i < m.rows; ++i) u += m(i, j);
      u /= static_cast<double>(m.rows);
      acc += u * std::log(u);
    }
    return acc;
  };
  for (std::size_t j = 0; j < 4; ++j) {
    auto up = probs, down = probs;
    up(1, j) += 1e-7;
    down(1, j) -= 1e-7;
    EXPECT_NEAR(g[j], (lb(up) - lb(down)) / 2e-7, 1e-6);
  }
}

TEST(FrlRegularizer, SmallExample) {
  const mram::FeatureRetrievalLibrary lib(2, {{{1, 0}, 1.0}});
  const Matrix att(1, 1, 1.0);
  const std::vector<mram::FeatureRetrievalLibrary> libs{lib};
  const std::vector<Matrix> atts{att};
  EXPECT_DOUBLE_EQ(mram::frl_regularizer(libs, atts), 3.0);
}

TEST(FrlRegularizer, AttentionTermIsExpertsTimesBatch) {
  std::mt19937_64 rng(50);
  for (int t = 0; t < 50; ++t) {
    const std::size_t n = 1 + rng() % 6, b = 1 + rng() % 20, k = 2 + rng() % 10;
    std::vector<Matrix> atts;
    for (std::size_t j = 0; j < n; ++j) {
      Matrix a(b, k);
      for (std::size_t i = 0; i < b; ++i) {
        const auto p = mram::testing::random_probs(rng, k);
        std::copy(p.begin(), p.end(), a.row(i).begin());
      }
      atts.push_back(std::move(a));
    }
    EXPECT_NEAR(mram::frl_attention_term(atts), static_cast<double>(n * b), 1e-9);
  }
}

TEST(FrlRegularizer, RejectsMismatch) {
  const std::vector<mram::FeatureRetrievalLibrary> libs{mram::FeatureRetrievalLibrary(2, {{{1, 0}, 1.0}})};
  EXPECT_THROW(mram::frl_regularizer(libs, std::vector<Matrix>{}), mram::DimensionError);
  EXPECT_THROW(mram::frl_regularizer(libs, std::vector<Matrix>{Matrix(1, 2)}), mram::DimensionError);
}

TEST(TotalLoss, WeightedSum) {
  const auto l = mram::total_loss(1.0, 2.0, 3.0, 0.01, 1e-4);
  EXPECT_NEAR(l.total, 1.0203, 1e-15);
  EXPECT_EQ(l.ce, 1.0);
  EXPECT_EQ(l.lambda_lb, 0.01);
  EXPECT_EQ(mram::total_loss(0.7, -4.6, 320.0, 0.0, 0.0).total, 0.7);
  EXPECT_THROW(mram::total_loss(1, 1, 1, -0.1, 0), mram::ConfigError);
  EXPECT_THROW(mram::total_loss(1, 1, 1, 0, -1e-4), mram::ConfigError);
}

}  // namespace

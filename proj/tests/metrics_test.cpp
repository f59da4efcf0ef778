// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The MRAM Authors

#include <gtest/gtest.h>

#include <random>

#include "mram/metrics.hpp"

namespace {

using mram::ConfusionMatrix;
using Grid = std::vector<std::uint8_t>;

TEST(Confusion, HandTally) {
  const auto cm = mram::accumulate(ConfusionMatrix(2), Grid{0, 1, 1, 1}, Grid{0, 0, 1, 1});
  EXPECT_EQ(cm(0, 0), 1u);
  EXPECT_EQ(cm(0, 1), 1u);
  EXPECT_EQ(cm(1, 1), 2u);
  EXPECT_EQ(cm(1, 0), 0u);
  EXPECT_EQ(cm.total(), 4u);
  const auto s = mram::summary(cm);
  EXPECT_NEAR(s.per_class[0].iou, 0.5, 1e-15);
  EXPECT_NEAR(s.per_class[1].iou, 2.0 / 3.0, 1e-15);
  EXPECT_NEAR(s.miou, 7.0 / 12.0, 1e-12);
}

TEST(Confusion, EmptyGridsAndValidation) {
  ConfusionMatrix cm(3);
  EXPECT_EQ(mram::accumulate(cm, Grid{}, Grid{}), cm);
  EXPECT_THROW(mram::accumulate(cm, Grid{0, 3}, Grid{0, 1}), mram::InvalidInputError);
  EXPECT_THROW(mram::accumulate(cm, Grid{0}, Grid{0, 1}), mram::DimensionError);
}

TEST(Summary, PerfectAndDisjoint) {
  const auto perfect = mram::summary(mram::accumulate(ConfusionMatrix(4), Grid{0, 2, 2, 3}, Grid{0, 2, 2, 3}));
  EXPECT_EQ(perfect.miou, 1.0);
  EXPECT_EQ(perfect.mf1, 1.0);
  EXPECT_EQ(perfect.mpre, 1.0);
  EXPECT_EQ(perfect.mrec, 1.0);
  EXPECT_EQ(perfect.per_class.size(), 3u);

  const auto none = mram::summary(mram::accumulate(ConfusionMatrix(2), Grid{1, 0}, Grid{0, 1}));
  EXPECT_EQ(none.miou, 0.0);
  EXPECT_EQ(none.mf1, 0.0);
}

TEST(Summary, AllAbsentThrows) { EXPECT_THROW(mram::summary(ConfusionMatrix(3)), mram::UndefinedMetricError); }

TEST(Summary, PredictedOnlyClassCountsWithZeroRecall) {
  // Class 1 never occurs in truth but is predicted once.
  const auto s = mram::summary(mram::accumulate(ConfusionMatrix(2), Grid{0, 1}, Grid{0, 0}));
  ASSERT_EQ(s.per_class.size(), 2u);
  EXPECT_EQ(s.per_class[1].recall, 0.0);
  EXPECT_EQ(s.per_class[1].precision, 0.0);
  EXPECT_EQ(s.per_class[0].precision, 1.0);
  EXPECT_EQ(s.per_class[0].recall, 0.5);
}

ConfusionMatrix random_matrix(std::mt19937_64& rng, std::size_t classes) {
  ConfusionMatrix cm(classes);
  for (std::size_t t = 0; t < classes; ++t)
    for (std::size_t p = 0; p < classes; ++p) cm(t, p) = rng() % 4 == 0 ? 0 : rng() % 50;
  return cm;
}

TEST(Summary, F1IouIdentityOnRandomMatrices) {
  std::mt19937_64 rng(99);
  for (int t = 0; t < 100; ++t) {
    const auto cm = random_matrix(rng, 2 + rng() % 7);
    if (cm.total() == 0) continue;
    const auto s = mram::summary(cm);
    for (const auto& c : s.per_class) {
      EXPECT_NEAR(c.f1, 2 * c.iou / (1 + c.iou), 1e-12);
      EXPECT_GE(c.f1, c.iou - 1e-15);
    }
    for (double v : {s.miou, s.mf1, s.mpre, s.mrec}) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
    }
  }
}

TEST(Summary, ClassPermutationLeavesMeansUnchanged) {
  std::mt19937_64 rng(7);
  for (int t = 0; t < 50; ++t) {
    Grid truth(40), pred(40);
    for (auto& v : truth) v = rng() % 5;
    for (auto& v : pred) v = rng() % 5;
    const Grid perm{3, 0, 4, 1, 2};
    Grid pt(40), pp(40);
    for (std::size_t i = 0; i < 40; ++i) pt[i] = perm[truth[i]], pp[i] = perm[pred[i]];
    const auto a = mram::summary(mram::accumulate(ConfusionMatrix(5), pred, truth));
    const auto b = mram::summary(mram::accumulate(ConfusionMatrix(5), pp, pt));
    EXPECT_NEAR(a.miou, b.miou, 1e-12);
    EXPECT_NEAR(a.mf1, b.mf1, 1e-12);
    EXPECT_NEAR(a.mpre, b.mpre, 1e-12);
    EXPECT_NEAR(a.mrec, b.mrec, 1e-12);
  }
}

TEST(Confusion, AccumulationOrderAndMerge) {
  const Grid p1{0, 1, 2}, t1{0, 2, 2}, p2{1, 1}, t2{0, 1};
  const auto ab = mram::accumulate(mram::accumulate(ConfusionMatrix(3), p1, t1), p2, t2);
  const auto ba = mram::accumulate(mram::accumulate(ConfusionMatrix(3), p2, t2), p1, t1);
  EXPECT_EQ(ab, ba);
  auto merged = mram::accumulate(ConfusionMatrix(3), p1, t1);
  merged += mram::accumulate(ConfusionMatrix(3), p2, t2);
  EXPECT_EQ(merged, ab);
  ConfusionMatrix other(4);
  EXPECT_THROW(merged += other, mram::DimensionError);
}

}  // namespace

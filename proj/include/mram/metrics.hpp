#pragma once

// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The MRAM Authors

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "mram/error.hpp"

namespace mram {

/// Rows are ground truth, columns are predictions.
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(std::size_t classes = 0) : classes_(classes), counts_(classes * classes, 0) {}

  [[nodiscard]] std::size_t classes() const noexcept { return classes_; }
  std::uint64_t& operator()(std::size_t truth, std::size_t predicted) { return counts_[truth * classes_ + predicted]; }
  std::uint64_t operator()(std::size_t truth, std::size_t predicted) const {
    return counts_[truth * classes_ + predicted];
  }

  [[nodiscard]] std::uint64_t total() const {
    std::uint64_t t = 0;
    for (auto c : counts_) t += c;
    return t;
  }

  /// Elementwise sum; the merge step for sharded accumulation.
  ConfusionMatrix& operator+=(const ConfusionMatrix& other) {
    detail::require_dim(other.classes_ == classes_, "confusion matrices have different class counts");
    for (std::size_t i = 0; i < counts_.size(); ++i) counts_[i] += other.counts_[i];
    return *this;
  }

  bool operator==(const ConfusionMatrix&) const = default;

 private:
  std::size_t classes_;
  std::vector<std::uint64_t> counts_;
};

inline ConfusionMatrix accumulate(ConfusionMatrix cm, std::span<const std::uint8_t> predicted,
                                  std::span<const std::uint8_t> truth) {
  detail::require_dim(predicted.size() == truth.size(), "accumulate: prediction and truth grids differ in size");
  for (std::size_t i = 0; i < truth.size(); ++i) {
    detail::require_input(truth[i] < cm.classes() && predicted[i] < cm.classes(),
                          "accumulate: class index outside [0, " + std::to_string(cm.classes()) + ")");
    ++cm(truth[i], predicted[i]);
  }
  return cm;
}

struct ClassScores {
  std::size_t cls = 0;
  double iou = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

struct MetricSummary {
  double miou = 0.0;
  double mf1 = 0.0;
  double mpre = 0.0;
  double mrec = 0.0;
  std::vector<ClassScores> per_class;  // included classes only
};

/// Unweighted means over classes that appear in truth or prediction.
/// A 0/0 precision or recall inside an included class counts as 0.
inline MetricSummary summary(const ConfusionMatrix& cm) {
  const std::size_t n = cm.classes();
  MetricSummary out;
  for (std::size_t c = 0; c < n; ++c) {
    const double tp = static_cast<double>(cm(c, c));
    double fp = 0.0;
    double fn = 0.0;
    for (std::size_t o = 0; o < n; ++o) {
      if (o == c) continue;
      fp += static_cast<double>(cm(o, c));
      fn += static_cast<double>(cm(c, o));
    }
    if (tp + fp + fn == 0.0) continue;
    ClassScores s;
    s.cls = c;
    s.iou = tp / (tp + fp + fn);
    s.precision = tp + fp > 0.0 ? tp / (tp + fp) : 0.0;
    s.recall = tp + fn > 0.0 ? tp / (tp + fn) : 0.0;
    s.f1 = s.precision + s.recall > 0.0 ? 2.0 * s.precision * s.recall / (s.precision + s.recall) : 0.0;
    out.per_class.push_back(s);
  }
  if (out.per_class.empty()) throw UndefinedMetricError("every class is absent from the confusion matrix");
  for (const auto& s : out.per_class) {
    out.miou += s.iou;
    out.mf1 += s.f1;
    out.mpre += s.precision;
    out.mrec += s.recall;
  }
  const double k = static_cast<double>(out.per_class.size());
  out.miou /= k;
  out.mf1 /= k;
  out.mpre /= k;
  out.mrec /= k;
  return out;
}

}  // namespace mram

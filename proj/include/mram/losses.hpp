#pragma once

// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The MRAM Authors

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "mram/error.hpp"
#include "mram/frl.hpp"
#include "mram/matrix.hpp"
#include "mram/stats.hpp"

namespace mram {

struct LossBreakdown {
  double ce = 0.0;
  double lb = 0.0;
  double frl = 0.0;
  double total = 0.0;
  double lambda_lb = 0.0;
  double lambda_frl = 0.0;
};

inline void check_labels(const Matrix& logits, std::span<const std::uint8_t> labels) {
  detail::require_dim(labels.size() == logits.rows, "labels cover " + std::to_string(labels.size()) +
                                                        " pixels, logits cover " + std::to_string(logits.rows));
  for (auto l : labels)
    detail::require_input(l < logits.cols, "label " + std::to_string(l) + " outside [0, " +
                                               std::to_string(logits.cols) + ")");
}

/// Mean over pixels of -ln softmax(logits)[label].
inline double cross_entropy(const Matrix& logits, std::span<const std::uint8_t> labels) {
  check_labels(logits, labels);
  if (logits.rows == 0) return 0.0;
  double acc = 0.0;
  for (std::size_t p = 0; p < logits.rows; ++p) {
    const Vector probs = softmax(logits.row(p));
    acc -= std::log(std::max(probs[labels[p]], kProbabilityFloor));
  }
  return acc / static_cast<double>(logits.rows);
}

/// d cross_entropy / d logits.
inline Matrix cross_entropy_gradient(const Matrix& logits, std::span<const std::uint8_t> labels) {
  check_labels(logits, labels);
  Matrix grad(logits.rows, logits.cols);
  const double inv = logits.rows ? 1.0 / static_cast<double>(logits.rows) : 0.0;
  for (std::size_t p = 0; p < logits.rows; ++p) {
    const Vector probs = softmax(logits.row(p));
    for (std::size_t c = 0; c < logits.cols; ++c)
      grad(p, c) = (probs[c] - (c == labels[p] ? 1.0 : 0.0)) * inv;
  }
  return grad;
}

/// Mean routing probability per expert over the batch.
inline Vector expert_usage(const Matrix& batch_probs) {
  Vector u(batch_probs.cols, 0.0);
  for (std::size_t i = 0; i < batch_probs.rows; ++i) {
    double sum = 0.0;
    for (std::size_t j = 0; j < batch_probs.cols; ++j) {
      const double v = batch_probs(i, j);
      detail::require_input(std::isfinite(v) && v >= 0.0, "load_balance_loss: invalid routing probability");
      sum += v;
      u[j] += v;
    }
    detail::require_input(std::abs(sum - 1.0) <= kSumTolerance, "load_balance_loss: routing row does not sum to 1");
  }
  for (double& v : u) v /= static_cast<double>(batch_probs.rows);
  return u;
}

/// sum_j u_j ln u_j - ln N, with u the batch-mean routing probabilities.
/// Evaluates to -2 ln N at uniform usage and -ln N at full collapse.
inline double load_balance_loss(const Matrix& batch_probs) {
  detail::require_input(batch_probs.rows > 0 && batch_probs.cols > 0, "load_balance_loss: empty batch");
  const Vector u = expert_usage(batch_probs);
  double acc = 0.0;
  for (double v : u) {
    const double c = std::max(v, kProbabilityFloor);
    acc += c * std::log(c);
  }
  return acc - std::log(static_cast<double>(batch_probs.cols));
}

/// d load_balance_loss / d pi for every row (identical across rows).
inline Vector load_balance_gradient(const Matrix& batch_probs) {
  const Vector u = expert_usage(batch_probs);
  Vector g(u.size());
  for (std::size_t j = 0; j < u.size(); ++j)
    g[j] = (std::log(std::max(u[j], kProbabilityFloor)) + 1.0) / static_cast<double>(batch_probs.rows);
  return g;
}

/// Squared prototype norms plus squared importances plus the summed absolute
/// attention. `batch_attention[j]` is B x K_j for library j.
inline double frl_regularizer(std::span<const FeatureRetrievalLibrary> libraries,
                              std::span<const Matrix> batch_attention) {
  detail::require_dim(libraries.size() == batch_attention.size(), "frl_regularizer: " +
                                                                      std::to_string(libraries.size()) + " libraries vs " +
                                                                      std::to_string(batch_attention.size()) +
                                                                      " attention blocks");
  double acc = 0.0;
  for (std::size_t j = 0; j < libraries.size(); ++j) {
    const auto& lib = libraries[j];
    const Matrix& att = batch_attention[j];
    detail::require_dim(att.cols == lib.size(), "frl_regularizer: attention width mismatch for library " +
                                                    std::to_string(j));
    for (std::size_t k = 0; k < lib.size(); ++k) {
      acc += dot(lib[k].prototype, lib[k].prototype) + lib[k].importance * lib[k].importance;
      for (std::size_t i = 0; i < att.rows; ++i) acc += std::abs(att(i, k));
    }
  }
  return acc;
}

/// Attention-only part of frl_regularizer.
inline double frl_attention_term(std::span<const Matrix> batch_attention) {
  double acc = 0.0;
  for (const Matrix& att : batch_attention)
    for (double v : att.data) acc += std::abs(v);
  return acc;
}

inline LossBreakdown total_loss(double ce, double lb, double frl, double lambda_lb, double lambda_frl) {
  detail::require_config(lambda_lb >= 0.0 && lambda_frl >= 0.0, "loss weights must be >= 0");
  return {ce, lb, frl, ce + lambda_lb * lb + lambda_frl * frl, lambda_lb, lambda_frl};
}

}  // namespace mram

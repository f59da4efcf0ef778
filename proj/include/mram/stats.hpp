#pragma once

// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The MRAM Authors

// Feature-to-distribution normalization and the KL / JS divergences that
// drive both routing and aggregation. Everything here is a pure function.

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mram/error.hpp"
#include "mram/matrix.hpp"
#include "mram/numeric.hpp"

namespace mram {

/// Floor applied to every probability before a logarithm or division.
inline constexpr double kProbabilityFloor = 1e-12;

/// Tolerance on the unit-sum invariant of a distribution.
inline constexpr double kSumTolerance = 1e-6;

/// Probability vector over d >= 2 bins.
class DiscreteDistribution {
 public:
  DiscreteDistribution() = default;

  /// Validates and adopts `probs`.
  static DiscreteDistribution from_probs(std::vector<double> probs) {
    detail::require_dim(probs.size() >= 2, "distribution needs at least 2 bins, got " +
                                               std::to_string(probs.size()));
    double sum = 0.0;
    for (double p : probs) {
      detail::require_input(std::isfinite(p) && p >= 0.0, "distribution entries must be finite and >= 0");
      sum += p;
    }
    detail::require_input(std::abs(sum - 1.0) <= kSumTolerance,
                          "distribution entries must sum to 1, got " + std::to_string(sum));
    return DiscreteDistribution(std::move(probs));
  }

  [[nodiscard]] std::span<const double> probs() const noexcept { return probs_; }
  [[nodiscard]] std::size_t size() const noexcept { return probs_.size(); }
  double operator[](std::size_t i) const { return probs_[i]; }

  bool operator==(const DiscreteDistribution&) const = default;

 private:
  explicit DiscreteDistribution(std::vector<double> probs) : probs_(std::move(probs)) {}
  friend DiscreteDistribution normalize(std::span<const double> features);

  std::vector<double> probs_;
};

/// Max-subtracted softmax. No validation beyond non-emptiness.
inline Vector softmax(std::span<const double> logits, double scale = 1.0) {
  Vector out(logits.size());
  if (logits.empty()) return out;
  double top = scale * logits[0];
  for (double x : logits) top = std::max(top, scale * x);
  double total = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(scale * logits[i] - top);
    total += out[i];
  }
  for (double& v : out) v /= total;
  return out;
}

/// Vector-Jacobian product of softmax: given p = softmax(u) and dL/dp, returns dL/du.
inline Vector softmax_backward(std::span<const double> probs, std::span<const double> grad_probs) {
  const double inner = dot(probs, grad_probs);
  Vector out(probs.size());
  for (std::size_t i = 0; i < probs.size(); ++i) out[i] = probs[i] * (grad_probs[i] - inner);
  return out;
}

/// Softmax over the d channels of a pooled feature vector.
inline DiscreteDistribution normalize(std::span<const double> features) {
  detail::require_dim(features.size() >= 2,
                      "normalize needs at least 2 entries, got " + std::to_string(features.size()));
  detail::require_input(all_finite(features), "normalize: non-finite feature entry");
  return DiscreteDistribution(softmax(features));
}

/// KL(p || q) in nats, both sides clamped to kProbabilityFloor.
inline double kl_divergence(std::span<const double> p, std::span<const double> q) {
  detail::require_dim(p.size() == q.size(), "kl_divergence: dimension mismatch (" + std::to_string(p.size()) +
                                                " vs " + std::to_string(q.size()) + ")");
  double acc = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) {
    const double pk = std::max(p[k], kProbabilityFloor);
    const double qk = std::max(q[k], kProbabilityFloor);
    acc += pk * std::log(pk / qk);
  }
  return acc;
}

inline double kl_divergence(const DiscreteDistribution& p, const DiscreteDistribution& q) {
  return kl_divergence(p.probs(), q.probs());
}

/// Jensen-Shannon divergence: mean KL of each argument against their midpoint.
inline double js_divergence(std::span<const double> q, std::span<const double> p) {
  detail::require_dim(q.size() == p.size(), "js_divergence: dimension mismatch (" + std::to_string(q.size()) +
                                                " vs " + std::to_string(p.size()) + ")");
  Vector mid(q.size());
  for (std::size_t k = 0; k < q.size(); ++k) mid[k] = 0.5 * (q[k] + p[k]);
  return 0.5 * kl_divergence(q, mid) + 0.5 * kl_divergence(p, mid);
}

inline double js_divergence(const DiscreteDistribution& q, const DiscreteDistribution& p) {
  return js_divergence(q.probs(), p.probs());
}

/// d JS(q, r) / d r_k = 0.5 * ln(r_k / m_k), with m the midpoint. Clamped like the divergence.
inline Vector js_gradient_second(std::span<const double> q, std::span<const double> r) {
  detail::require_dim(q.size() == r.size(), "js_gradient_second: dimension mismatch");
  Vector out(r.size());
  for (std::size_t k = 0; k < r.size(); ++k) {
    const double rk = std::max(r[k], kProbabilityFloor);
    const double mk = std::max(0.5 * (q[k] + r[k]), kProbabilityFloor);
    out[k] = 0.5 * std::log(rk / mk);
  }
  return out;
}

/// Shannon entropy in nats.
inline double entropy(std::span<const double> p) {
  double acc = 0.0;
  for (double v : p)
    if (v > 0.0) acc -= v * std::log(v);
  return acc;
}

}  // namespace mram

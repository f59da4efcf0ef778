#pragma once

// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The MRAM Authors

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "mram/error.hpp"

namespace mram {

struct AdamConfig {
  double learning_rate = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double weight_decay = 1e-4;
};

/// First and second moment accumulators for one tensor.
struct AdamMoments {
  std::vector<double> first;
  std::vector<double> second;

  explicit AdamMoments(std::size_t n = 0) : first(n, 0.0), second(n, 0.0) {}

  bool operator==(const AdamMoments&) const = default;
};

/// Bias-corrected Adam with decoupled weight decay. The decay multiplies the
/// parameters by (1 - lr * weight_decay) before the adaptive step. `step` is
/// 1-based.
inline void adam_update(std::span<double> params, std::span<const double> grads, AdamMoments& moments,
                        std::uint64_t step, const AdamConfig& cfg) {
  detail::require_dim(params.size() == grads.size() && params.size() == moments.first.size() &&
                          params.size() == moments.second.size(),
                      "adam_update: parameter, gradient and moment shapes differ");
  detail::require_config(step >= 1, "adam_update: step is 1-based");
  const double correction1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step));
  const double correction2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step));
  const double decay = 1.0 - cfg.learning_rate * cfg.weight_decay;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    moments.first[i] = cfg.beta1 * moments.first[i] + (1.0 - cfg.beta1) * g;
    moments.second[i] = cfg.beta2 * moments.second[i] + (1.0 - cfg.beta2) * g * g;
    const double m_hat = moments.first[i] / correction1;
    const double v_hat = moments.second[i] / correction2;
    if (cfg.weight_decay != 0.0) params[i] *= decay;
    params[i] -= cfg.learning_rate * m_hat / (std::sqrt(v_hat) + cfg.epsilon);
  }
}

}  // namespace mram

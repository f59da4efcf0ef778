#pragma once

// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The MRAM Authors

// Divergence-driven routing: experts whose retrieved prototype distribution
// sits closest (in JS divergence) to the input distribution get the highest
// routing probability. Also hosts the linear softmax gate used as a baseline.

#include <algorithm>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "mram/error.hpp"
#include "mram/matrix.hpp"
#include "mram/numeric.hpp"
#include "mram/stats.hpp"

namespace mram {

struct RoutingDecision {
  Vector scores;
  Vector probs;
  std::vector<std::size_t> selected;  // ascending expert indices
};

/// s_j = 1 / (epsilon + JS(query, proto_j)).
inline Vector routing_scores(const DiscreteDistribution& query, std::span<const DiscreteDistribution> proto_dists,
                             double epsilon) {
  detail::require_config(epsilon > 0.0, "routing epsilon must be > 0");
  Vector scores(proto_dists.size());
  for (std::size_t j = 0; j < proto_dists.size(); ++j) {
    detail::require_dim(proto_dists[j].size() == query.size(), "routing_scores: prototype distribution " +
                                                                   std::to_string(j) + " has dimension " +
                                                                   std::to_string(proto_dists[j].size()));
    scores[j] = 1.0 / (epsilon + js_divergence(query, proto_dists[j]));
  }
  return scores;
}

/// softmax(tau * s), max-subtracted so scores near 1/epsilon stay finite.
inline Vector routing_probs(std::span<const double> scores, double tau) {
  detail::require_config(tau > 0.0, "routing temperature tau must be > 0");
  detail::require_input(all_finite(scores), "routing_probs: non-finite score");
  detail::require_input(!scores.empty(), "routing_probs: no experts");
  return softmax(scores, tau);
}

/// Indices of the k largest probabilities, ties to the lower index, returned ascending.
inline std::vector<std::size_t> top_k_select(std::span<const double> probs, std::size_t k) {
  detail::require_config(k >= 1 && k <= probs.size(), "top-k must lie in [1, " + std::to_string(probs.size()) +
                                                          "], got " + std::to_string(k));
  std::vector<std::size_t> order(probs.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return probs[a] > probs[b]; });
  order.resize(k);
  std::sort(order.begin(), order.end());
  return order;
}

/// Scores, probabilities and top-k selection in one call.
inline RoutingDecision route(const DiscreteDistribution& query, std::span<const DiscreteDistribution> proto_dists,
                             double epsilon, double tau, std::size_t k) {
  RoutingDecision d;
  d.scores = routing_scores(query, proto_dists, epsilon);
  d.probs = routing_probs(d.scores, tau);
  d.selected = top_k_select(d.probs, k);
  return d;
}

/// Affine gate parameters: N x d weights plus N biases.
struct GateParams {
  Matrix weights;
  Vector bias;

  static GateParams zeros(std::size_t experts, std::size_t dim) { return {Matrix(experts, dim), Vector(experts, 0.0)}; }

  /// Uniform in +-1/sqrt(dim).
  static GateParams random(std::size_t experts, std::size_t dim, std::mt19937_64& rng) {
    GateParams g = zeros(experts, dim);
    const double bound = 1.0 / std::sqrt(static_cast<double>(dim));
    std::uniform_real_distribution<double> uni(-bound, bound);
    for (double& w : g.weights.data) w = uni(rng);
    for (double& b : g.bias) b = uni(rng);
    return g;
  }

  bool operator==(const GateParams&) const = default;
};

/// softmax(W x + b).
inline Vector baseline_linear_gate(std::span<const double> feature, const GateParams& gate) {
  detail::require_dim(gate.weights.cols == feature.size(), "linear gate expects feature dimension " +
                                                               std::to_string(gate.weights.cols) + ", got " +
                                                               std::to_string(feature.size()));
  detail::require_dim(gate.bias.size() == gate.weights.rows, "linear gate bias length mismatch");
  Vector logits = mat_vec(gate.weights, feature);
  for (std::size_t j = 0; j < logits.size(); ++j) logits[j] += gate.bias[j];
  return softmax(logits);
}

/// Gradient of a scalar loss w.r.t. gate parameters, given dL/dpi.
inline GateParams linear_gate_backward(std::span<const double> feature, std::span<const double> probs,
                                       std::span<const double> grad_probs) {
  detail::require_dim(probs.size() == grad_probs.size(), "linear_gate_backward: gradient length mismatch");
  const Vector grad_logits = softmax_backward(probs, grad_probs);
  GateParams g = GateParams::zeros(probs.size(), feature.size());
  for (std::size_t j = 0; j < probs.size(); ++j) {
    g.bias[j] = grad_logits[j];
    for (std::size_t c = 0; c < feature.size(); ++c) g.weights(j, c) = grad_logits[j] * feature[c];
  }
  return g;
}

}  // namespace mram

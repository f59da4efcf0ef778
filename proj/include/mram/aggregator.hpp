#pragma once

// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The MRAM Authors

// Distribution-alignment aggregation. Each routed expert is weighted by the
// reciprocal of the JS divergence between its intermediate-representation
// distribution and the input distribution; outputs are mixed in logit space.

#include <map>
#include <span>
#include <string>

#include "mram/error.hpp"
#include "mram/frl.hpp"
#include "mram/matrix.hpp"
#include "mram/stats.hpp"

namespace mram {

struct AggregationWeights {
  std::map<std::size_t, double> divergences;  // delta_j, nats
  std::map<std::size_t, double> raw_weights;  // 1 / (epsilon + delta_j)
  std::map<std::size_t, double> weights;      // normalized, sums to 1
};

/// Distribution of an expert's intermediate representation in the
/// `target_dim`-bin space. Projects first when the widths differ.
inline DiscreteDistribution output_distribution(std::span<const double> intermediate, const Projection& projection,
                                                std::size_t target_dim) {
  detail::require_input(all_finite(intermediate), "output_distribution: non-finite intermediate");
  if (intermediate.size() == target_dim) return normalize(intermediate);
  detail::require_dim(projection.out_dim() == target_dim, "output_distribution: projection targets dimension " +
                                                              std::to_string(projection.out_dim()) + ", need " +
                                                              std::to_string(target_dim));
  return normalize(projection.apply(intermediate));
}

/// Convenience for intermediates that already live in the distribution space.
inline DiscreteDistribution output_distribution(std::span<const double> intermediate) {
  detail::require_input(all_finite(intermediate), "output_distribution: non-finite intermediate");
  return normalize(intermediate);
}

inline AggregationWeights aggregation_weights(const DiscreteDistribution& query,
                                              const std::map<std::size_t, DiscreteDistribution>& routed_dists,
                                              double epsilon) {
  detail::require_input(!routed_dists.empty(), "aggregation_weights: routed set is empty");
  detail::require_config(epsilon > 0.0, "aggregation epsilon must be > 0");
  AggregationWeights out;
  double total = 0.0;
  for (const auto& [j, dist] : routed_dists) {
    detail::require_dim(dist.size() == query.size(), "aggregation_weights: expert " + std::to_string(j) +
                                                         " distribution has dimension " + std::to_string(dist.size()));
    const double delta = js_divergence(query, dist);
    const double raw = 1.0 / (epsilon + delta);
    out.divergences[j] = delta;
    out.raw_weights[j] = raw;
    total += raw;
  }
  for (const auto& [j, raw] : out.raw_weights) out.weights[j] = raw / total;
  return out;
}

/// y_hat = sum_j weight_j * y_j over matching keys.
inline Matrix aggregate(const std::map<std::size_t, double>& weights, const std::map<std::size_t, Matrix>& outputs) {
  detail::require_input(!weights.empty(), "aggregate: no routed experts");
  detail::require_input(weights.size() == outputs.size(), "aggregate: weight and output key sets differ");
  const Matrix& first = outputs.begin()->second;
  Matrix out(first.rows, first.cols);
  for (const auto& [j, w] : weights) {
    const auto it = outputs.find(j);
    detail::require_input(it != outputs.end(), "aggregate: no output for expert " + std::to_string(j));
    detail::require_dim(it->second.rows == out.rows && it->second.cols == out.cols,
                        "aggregate: output shape mismatch for expert " + std::to_string(j));
    for (std::size_t k = 0; k < out.data.size(); ++k) out.data[k] += w * it->second.data[k];
  }
  return out;
}

inline Matrix aggregate(const AggregationWeights& weights, const std::map<std::size_t, Matrix>& outputs) {
  return aggregate(weights.weights, outputs);
}

/// dL/d delta_j when beta is differentiated rather than held constant.
/// `grad_output` is dL/dy_hat.
inline std::map<std::size_t, double> aggregation_divergence_gradient(const AggregationWeights& weights,
                                                                     const std::map<std::size_t, Matrix>& outputs,
                                                                     const Matrix& grad_output) {
  std::map<std::size_t, double> along;  // dL/d beta_j
  double mean = 0.0;
  double total_raw = 0.0;
  for (const auto& [j, beta] : weights.weights) {
    const double a = dot(grad_output.data, outputs.at(j).data);
    along[j] = a;
    mean += beta * a;
    total_raw += weights.raw_weights.at(j);
  }
  std::map<std::size_t, double> out;
  for (const auto& [j, a] : along) {
    const double raw = weights.raw_weights.at(j);
    out[j] = (a - mean) / total_raw * (-raw * raw);
  }
  return out;
}

}  // namespace mram

#pragma once

// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The MRAM Authors

// Compact experts: a ReLU encoder producing the intermediate representation,
// followed by a linear head emitting per-pixel class logits.

#include <array>
#include <cmath>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mram/error.hpp"
#include "mram/matrix.hpp"
#include "mram/numeric.hpp"

namespace mram {

struct ExpertShape {
  std::size_t feature_dim = 0;
  std::size_t hidden_dim = 0;
  std::size_t pixels = 0;
  std::size_t classes = 0;

  bool operator==(const ExpertShape&) const = default;
};

/// Named view of one parameter tensor, used by the optimizer and checkpoints.
struct TensorView {
  std::string_view name;
  std::span<double> values;
  std::vector<std::size_t> shape;
};

struct ExpertParams {
  Matrix encoder_weights;  // hidden x feature
  Vector encoder_bias;     // hidden
  Matrix head_weights;     // (pixels * classes) x hidden
  Vector head_bias;        // pixels * classes
  std::size_t pixels = 0;
  std::size_t classes = 0;

  static ExpertParams zeros(const ExpertShape& s) {
    ExpertParams p;
    p.encoder_weights = Matrix(s.hidden_dim, s.feature_dim);
    p.encoder_bias.assign(s.hidden_dim, 0.0);
    p.head_weights = Matrix(s.pixels * s.classes, s.hidden_dim);
    p.head_bias.assign(s.pixels * s.classes, 0.0);
    p.pixels = s.pixels;
    p.classes = s.classes;
    return p;
  }

  /// Uniform in +-1/sqrt(fan_in) for every weight and bias.
  static ExpertParams random(const ExpertShape& s, std::mt19937_64& rng) {
    ExpertParams p = zeros(s);
    std::uniform_real_distribution<double> enc(-1.0 / std::sqrt(double(s.feature_dim)),
                                               1.0 / std::sqrt(double(s.feature_dim)));
    std::uniform_real_distribution<double> head(-1.0 / std::sqrt(double(s.hidden_dim)),
                                                1.0 / std::sqrt(double(s.hidden_dim)));
    for (double& w : p.encoder_weights.data) w = enc(rng);
    for (double& b : p.encoder_bias) b = enc(rng);
    for (double& w : p.head_weights.data) w = head(rng);
    for (double& b : p.head_bias) b = head(rng);
    return p;
  }

  [[nodiscard]] ExpertShape shape() const {
    return {encoder_weights.cols, encoder_weights.rows, pixels, classes};
  }

  std::array<TensorView, 4> tensors() {
    return {{
        {"encoder_weights", encoder_weights.data, {encoder_weights.rows, encoder_weights.cols}},
        {"encoder_bias", encoder_bias, {encoder_bias.size()}},
        {"head_weights", head_weights.data, {head_weights.rows, head_weights.cols}},
        {"head_bias", head_bias, {head_bias.size()}},
    }};
  }

  [[nodiscard]] std::array<std::vector<std::size_t>, 4> tensor_shapes() const {
    return {{{encoder_weights.rows, encoder_weights.cols},
             {encoder_bias.size()},
             {head_weights.rows, head_weights.cols},
             {head_bias.size()}}};
  }

  [[nodiscard]] std::array<std::span<const double>, 4> values() const {
    return {encoder_weights.data, encoder_bias, head_weights.data, head_bias};
  }

  bool operator==(const ExpertParams&) const = default;
};

struct ExpertOutput {
  Vector pre_activation;  // encoder affine output, before ReLU
  Vector intermediate;    // ReLU(pre_activation)
  Matrix logits;          // pixels x classes
};

inline void check_feature(std::span<const double> feature, const ExpertParams& params) {
  detail::require_dim(feature.size() == params.encoder_weights.cols,
                      "expert expects feature dimension " + std::to_string(params.encoder_weights.cols) + ", got " +
                          std::to_string(feature.size()));
}

/// Encoder only: fills pre_activation and intermediate, leaves logits empty.
inline ExpertOutput expert_encode(std::span<const double> feature, const ExpertParams& params) {
  check_feature(feature, params);
  ExpertOutput out;
  out.pre_activation = mat_vec(params.encoder_weights, feature);
  out.intermediate.resize(out.pre_activation.size());
  for (std::size_t h = 0; h < out.pre_activation.size(); ++h) {
    out.pre_activation[h] += params.encoder_bias[h];
    out.intermediate[h] = std::max(0.0, out.pre_activation[h]);
  }
  return out;
}

/// Applies the head to an already encoded output.
inline void expert_head(ExpertOutput& out, const ExpertParams& params) {
  Vector flat = mat_vec(params.head_weights, out.intermediate);
  for (std::size_t o = 0; o < flat.size(); ++o) flat[o] += params.head_bias[o];
  out.logits = Matrix(params.pixels, params.classes);
  out.logits.data = std::move(flat);
}

inline ExpertOutput expert_forward(std::span<const double> feature, const ExpertParams& params) {
  ExpertOutput out = expert_encode(feature, params);
  expert_head(out, params);
  return out;
}

/// Exact parameter gradients of a scalar loss given dL/dlogits. An optional
/// dL/dintermediate is added to the head's contribution before the ReLU mask.
inline ExpertParams expert_backward(std::span<const double> feature, const ExpertParams& params,
                                    const Matrix& logit_gradient,
                                    std::span<const double> intermediate_gradient = {}) {
  check_feature(feature, params);
  detail::require_dim(logit_gradient.rows == params.pixels && logit_gradient.cols == params.classes,
                      "expert_backward: logit gradient must be " + std::to_string(params.pixels) + "x" +
                          std::to_string(params.classes));
  const std::size_t hidden = params.encoder_weights.rows;
  detail::require_dim(intermediate_gradient.empty() || intermediate_gradient.size() == hidden,
                      "expert_backward: intermediate gradient length mismatch");

  const ExpertOutput fwd = expert_encode(feature, params);
  ExpertParams grad = ExpertParams::zeros(params.shape());

  const std::span<const double> gy = logit_gradient.data;
  for (std::size_t o = 0; o < gy.size(); ++o) {
    grad.head_bias[o] = gy[o];
    if (gy[o] == 0.0) continue;
    for (std::size_t h = 0; h < hidden; ++h) grad.head_weights(o, h) = gy[o] * fwd.intermediate[h];
  }

  Vector gh = mat_t_vec(params.head_weights, gy);
  if (!intermediate_gradient.empty())
    for (std::size_t h = 0; h < hidden; ++h) gh[h] += intermediate_gradient[h];

  for (std::size_t h = 0; h < hidden; ++h) {
    const double gz = fwd.pre_activation[h] > 0.0 ? gh[h] : 0.0;
    grad.encoder_bias[h] = gz;
    if (gz == 0.0) continue;
    for (std::size_t c = 0; c < feature.size(); ++c) grad.encoder_weights(h, c) = gz * feature[c];
  }
  return grad;
}

/// target += scale * source, tensor by tensor.
inline void accumulate(ExpertParams& target, const ExpertParams& source, double scale = 1.0) {
  auto t = target.tensors();
  const auto s = source.values();
  for (std::size_t i = 0; i < t.size(); ++i) {
    detail::require_dim(t[i].values.size() == s[i].size(), "accumulate: tensor size mismatch");
    for (std::size_t k = 0; k < s[i].size(); ++k) t[i].values[k] += scale * s[i][k];
  }
}

}  // namespace mram

#pragma once

// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The MRAM Authors

// Expert-wise feature retrieval library: a small memory of prototype vectors
// with importance weights. Read by cosine attention, maintained by a
// read-then-update rule driven by the expert's projected representation.

#include <cmath>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "mram/error.hpp"
#include "mram/matrix.hpp"
#include "mram/numeric.hpp"
#include "mram/stats.hpp"

namespace mram {

struct PrototypeEntry {
  Vector prototype;
  double importance = 1.0;

  bool operator==(const PrototypeEntry&) const = default;
};

class FeatureRetrievalLibrary {
 public:
  FeatureRetrievalLibrary() = default;

  FeatureRetrievalLibrary(std::size_t dim, std::vector<PrototypeEntry> entries)
      : dim_(dim), entries_(std::move(entries)) {
    detail::require_config(!entries_.empty(), "feature retrieval library needs at least one prototype");
    for (const auto& e : entries_) {
      detail::require_dim(e.prototype.size() == dim_, "prototype dimension " + std::to_string(e.prototype.size()) +
                                                          " does not match library dimension " +
                                                          std::to_string(dim_));
      detail::require_input(all_finite(e.prototype), "prototype has non-finite entries");
      detail::require_input(e.importance >= 0.0, "prototype importance must be >= 0");
    }
  }

  /// Standard-normal prototypes, L2-normalized, importance 1.
  static FeatureRetrievalLibrary random(std::size_t count, std::size_t dim, std::mt19937_64& rng) {
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<PrototypeEntry> entries(count);
    for (auto& e : entries) {
      e.prototype.resize(dim);
      double norm = 0.0;
      do {
        for (double& v : e.prototype) v = normal(rng);
        norm = std::sqrt(dot(e.prototype, e.prototype));
      } while (norm == 0.0);
      for (double& v : e.prototype) v /= norm;
    }
    return {dim, std::move(entries)};
  }

  [[nodiscard]] std::size_t dim() const noexcept { return dim_; }
  [[nodiscard]] std::size_t size() const noexcept { return entries_.size(); }
  [[nodiscard]] const std::vector<PrototypeEntry>& entries() const noexcept { return entries_; }
  std::vector<PrototypeEntry>& entries() noexcept { return entries_; }
  const PrototypeEntry& operator[](std::size_t k) const { return entries_[k]; }

  bool operator==(const FeatureRetrievalLibrary&) const = default;

 private:
  std::size_t dim_ = 0;
  std::vector<PrototypeEntry> entries_;
};

/// Cosine similarity; 0 when either side has zero norm.
inline double cosine_similarity(std::span<const double> a, std::span<const double> b) {
  const double na = std::sqrt(dot(a, a));
  const double nb = std::sqrt(dot(b, b));
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot(a, b) / (na * nb);
}

/// Softmax over cosine similarities between the query and each prototype.
inline Vector attend(const FeatureRetrievalLibrary& library, std::span<const double> query) {
  detail::require_dim(query.size() == library.dim(), "attend: query dimension " + std::to_string(query.size()) +
                                                         " vs library dimension " + std::to_string(library.dim()));
  Vector sims(library.size());
  for (std::size_t k = 0; k < library.size(); ++k) sims[k] = cosine_similarity(query, library[k].prototype);
  return softmax(sims);
}

/// Convex combination of prototypes under `weights`.
inline Vector retrieve(const FeatureRetrievalLibrary& library, std::span<const double> weights) {
  detail::require_dim(weights.size() == library.size(), "retrieve: expected " + std::to_string(library.size()) +
                                                            " weights, got " + std::to_string(weights.size()));
  Vector out(library.dim(), 0.0);
  for (std::size_t k = 0; k < library.size(); ++k) {
    const auto& p = library[k].prototype;
    for (std::size_t c = 0; c < out.size(); ++c) out[c] += weights[k] * p[c];
  }
  return out;
}

/// Fixed linear map from an expert's intermediate space into prototype space.
/// Drawn once from a seeded generator and never trained.
class Projection {
 public:
  Projection() = default;

  static Projection identity(std::size_t dim) {
    Projection p;
    p.in_dim_ = dim;
    p.out_dim_ = dim;
    p.identity_ = true;
    return p;
  }

  /// Gaussian entries with variance 1/in_dim, so norms are roughly preserved.
  static Projection random(std::size_t in_dim, std::size_t out_dim, std::mt19937_64& rng) {
    Projection p;
    p.in_dim_ = in_dim;
    p.out_dim_ = out_dim;
    p.weights_ = Matrix(out_dim, in_dim);
    std::normal_distribution<double> normal(0.0, 1.0 / std::sqrt(static_cast<double>(in_dim)));
    for (double& w : p.weights_.data) w = normal(rng);
    return p;
  }

  static Projection from_matrix(Matrix weights) {
    Projection p;
    p.in_dim_ = weights.cols;
    p.out_dim_ = weights.rows;
    p.weights_ = std::move(weights);
    return p;
  }

  [[nodiscard]] std::size_t in_dim() const noexcept { return in_dim_; }
  [[nodiscard]] std::size_t out_dim() const noexcept { return out_dim_; }
  [[nodiscard]] bool is_identity() const noexcept { return identity_; }
  [[nodiscard]] const Matrix& weights() const noexcept { return weights_; }

  [[nodiscard]] Vector apply(std::span<const double> x) const {
    detail::require_dim(x.size() == in_dim_, "projection input dimension " + std::to_string(x.size()) +
                                                 " vs expected " + std::to_string(in_dim_));
    if (identity_) return {x.begin(), x.end()};
    return mat_vec(weights_, x);
  }

  /// Pulls a gradient in output space back to input space.
  [[nodiscard]] Vector apply_transpose(std::span<const double> g) const {
    detail::require_dim(g.size() == out_dim_, "projection gradient dimension mismatch");
    if (identity_) return {g.begin(), g.end()};
    return mat_t_vec(weights_, g);
  }

  bool operator==(const Projection&) const = default;

 private:
  std::size_t in_dim_ = 0;
  std::size_t out_dim_ = 0;
  bool identity_ = false;
  Matrix weights_;
};

/// Maps a flat intermediate representation into prototype space.
inline Vector project(const Projection& projection, std::span<const double> intermediate) {
  detail::require_input(all_finite(intermediate), "project: non-finite intermediate");
  return projection.apply(intermediate);
}

/// Mean-pools a positions x channels intermediate over positions, then projects.
inline Vector project(const Projection& projection, const Matrix& spatial_intermediate) {
  detail::require_input(all_finite(spatial_intermediate.data), "project: non-finite intermediate");
  detail::require_input(spatial_intermediate.rows > 0, "project: empty spatial intermediate");
  Vector pooled(spatial_intermediate.cols, 0.0);
  for (std::size_t r = 0; r < spatial_intermediate.rows; ++r)
    for (std::size_t c = 0; c < pooled.size(); ++c) pooled[c] += spatial_intermediate(r, c);
  for (double& v : pooled) v /= static_cast<double>(spatial_intermediate.rows);
  return projection.apply(pooled);
}

enum class FrlUpdateMode {
  /// One update per batch from batch-mean attention and the attention-weighted
  /// mean of projected features. Independent of sample order.
  batch_aggregated,
  /// One update per sample, applied in batch order.
  per_sample,
};

/// Read-then-update maintenance. `batch_weights` is B x K attention,
/// `batch_projected` is B x d projected expert representations.
inline FeatureRetrievalLibrary read_then_update(const FeatureRetrievalLibrary& library, const Matrix& batch_weights,
                                                const Matrix& batch_projected, double eta,
                                                FrlUpdateMode mode = FrlUpdateMode::batch_aggregated) {
  detail::require_config(eta >= 0.0 && eta <= 1.0, "update rate eta must lie in [0, 1], got " + std::to_string(eta));
  detail::require_dim(batch_weights.cols == library.size(), "read_then_update: attention width " +
                                                                std::to_string(batch_weights.cols) + " vs " +
                                                                std::to_string(library.size()) + " prototypes");
  detail::require_dim(batch_projected.cols == library.dim(), "read_then_update: projected dimension mismatch");
  detail::require_dim(batch_weights.rows == batch_projected.rows, "read_then_update: batch size mismatch");

  FeatureRetrievalLibrary out = library;
  const std::size_t batch = batch_weights.rows;
  if (eta == 0.0 || batch == 0) return out;
  const std::size_t dim = library.dim();

  if (mode == FrlUpdateMode::per_sample) {
    for (std::size_t i = 0; i < batch; ++i) {
      for (std::size_t k = 0; k < out.size(); ++k) {
        auto& e = out.entries()[k];
        const double rate = eta * batch_weights(i, k);
        for (std::size_t c = 0; c < dim; ++c)
          e.prototype[c] = (1.0 - rate) * e.prototype[c] + rate * batch_projected(i, c);
        e.importance = (1.0 - rate) * e.importance + rate;
      }
    }
    return out;
  }

  std::vector<double> terms(batch);
  for (std::size_t k = 0; k < out.size(); ++k) {
    for (std::size_t i = 0; i < batch; ++i) terms[i] = batch_weights(i, k);
    const double mass = order_independent_sum(terms);
    if (mass <= 0.0) continue;
    const double rate = eta * (mass / static_cast<double>(batch));
    auto& e = out.entries()[k];
    for (std::size_t c = 0; c < dim; ++c) {
      for (std::size_t i = 0; i < batch; ++i) terms[i] = batch_weights(i, k) * batch_projected(i, c);
      const double target = order_independent_sum(terms) / mass;
      e.prototype[c] = (1.0 - rate) * e.prototype[c] + rate * target;
    }
    e.importance = (1.0 - rate) * e.importance + rate;
  }
  return out;
}

/// Multiplies every prototype and importance weight by `factor`.
inline void shrink(FeatureRetrievalLibrary& library, double factor) {
  for (auto& e : library.entries()) {
    for (double& v : e.prototype) v *= factor;
    e.importance *= factor;
  }
}

}  // namespace mram

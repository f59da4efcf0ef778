#pragma once

// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The MRAM Authors

#include <cstdint>
#include <string>
#include <string_view>

#include "json.hpp"

#include "mram/error.hpp"
#include "mram/frl.hpp"

namespace mram {

enum class RouterKind {
  moe_rm,       // divergence routing + divergence-weighted aggregation
  linear_gate,  // trainable softmax gate, top-k, renormalized gate weights
  soft_all,     // divergence routing probabilities, every expert, pi-weighted
};

inline std::string_view to_string(RouterKind k) {
  switch (k) {
    case RouterKind::moe_rm: return "moe-rm";
    case RouterKind::linear_gate: return "linear";
    case RouterKind::soft_all: return "soft";
  }
  return "?";
}

inline RouterKind parse_router_kind(std::string_view s) {
  if (s == "moe-rm") return RouterKind::moe_rm;
  if (s == "linear") return RouterKind::linear_gate;
  if (s == "soft") return RouterKind::soft_all;
  throw ConfigError("unknown router '" + std::string(s) + "' (expected moe-rm, linear or soft)");
}

struct TrainConfig {
  std::size_t n_experts = 10;
  std::size_t top_k = 5;
  std::size_t prototypes_per_expert = 16;
  std::size_t feature_dim = 32;
  std::size_t hidden_dim = 32;
  std::size_t classes = 6;
  std::size_t pixels = 64;
  double eta = 0.1;
  double tau = 1.0;
  double epsilon = 1e-8;
  double lambda_lb = 0.01;
  double lambda_frl = 1e-4;
  double learning_rate = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double weight_decay = 1e-4;
  std::size_t batch_size = 32;
  std::size_t steps = 1000;
  std::uint64_t seed = 0;
  RouterKind router = RouterKind::moe_rm;

  FrlUpdateMode frl_update = FrlUpdateMode::batch_aggregated;
  /// Differentiate through the divergence-based aggregation weights.
  bool full_beta_gradient = false;
  /// Multiply prototypes and importances by (1 - lr * lambda_frl) every step.
  bool frl_shrinkage = false;
  /// Use the identity as the prototype-space projection (needs hidden_dim == feature_dim).
  bool identity_projection = false;

  /// Worker threads for per-sample work. Results do not depend on it, so it
  /// is not serialized.
  std::size_t threads = 1;

  void validate() const {
    using detail::require_config;
    require_config(n_experts >= 1, "experts must be >= 1");
    require_config(top_k >= 1 && top_k <= n_experts, "top-k must lie in [1, experts] (got top-k " +
                                                         std::to_string(top_k) + ", experts " +
                                                         std::to_string(n_experts) + ")");
    require_config(prototypes_per_expert >= 1, "prototypes must be >= 1");
    require_config(feature_dim >= 2, "feature dimension must be >= 2");
    require_config(hidden_dim >= 1, "hidden dimension must be >= 1");
    require_config(classes >= 2 && classes <= 256, "classes must lie in [2, 256]");
    require_config(pixels >= 1, "pixels must be >= 1");
    require_config(eta >= 0.0 && eta <= 1.0, "eta must lie in [0, 1]");
    require_config(tau > 0.0, "tau must be > 0");
    require_config(epsilon > 0.0, "epsilon must be > 0");
    require_config(lambda_lb >= 0.0 && lambda_frl >= 0.0, "loss weights must be >= 0");
    require_config(learning_rate >= 0.0, "learning rate must be >= 0");
    require_config(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0, "adam betas must lie in [0, 1)");
    require_config(weight_decay >= 0.0, "weight decay must be >= 0");
    require_config(batch_size >= 1, "batch size must be >= 1");
    require_config(!identity_projection || hidden_dim == feature_dim,
                   "identity projection needs hidden dimension == feature dimension");
    require_config(threads >= 1, "threads must be >= 1");
  }
};

inline nlohmann::ordered_json to_json(const TrainConfig& c) {
  nlohmann::ordered_json j;
  j["experts"] = c.n_experts;
  j["top_k"] = c.top_k;
  j["prototypes"] = c.prototypes_per_expert;
  j["feature_dim"] = c.feature_dim;
  j["hidden_dim"] = c.hidden_dim;
  j["classes"] = c.classes;
  j["pixels"] = c.pixels;
  j["eta"] = c.eta;
  j["tau"] = c.tau;
  j["epsilon"] = c.epsilon;
  j["lambda_lb"] = c.lambda_lb;
  j["lambda_frl"] = c.lambda_frl;
  j["learning_rate"] = c.learning_rate;
  j["adam_beta1"] = c.beta1;
  j["adam_beta2"] = c.beta2;
  j["weight_decay"] = c.weight_decay;
  j["batch_size"] = c.batch_size;
  j["steps"] = c.steps;
  j["seed"] = c.seed;
  j["router"] = std::string(to_string(c.router));
  j["frl_update"] = c.frl_update == FrlUpdateMode::batch_aggregated ? "batch" : "sequential";
  j["full_beta_gradient"] = c.full_beta_gradient;
  j["frl_shrinkage"] = c.frl_shrinkage;
  j["identity_projection"] = c.identity_projection;
  return j;
}

inline TrainConfig config_from_json(const nlohmann::ordered_json& j) {
  TrainConfig c;
  try {
    c.n_experts = j.at("experts").get<std::size_t>();
    c.top_k = j.at("top_k").get<std::size_t>();
    c.prototypes_per_expert = j.at("prototypes").get<std::size_t>();
    c.feature_dim = j.at("feature_dim").get<std::size_t>();
    c.hidden_dim = j.at("hidden_dim").get<std::size_t>();
    c.classes = j.at("classes").get<std::size_t>();
    c.pixels = j.at("pixels").get<std::size_t>();
    c.eta = j.at("eta").get<double>();
    c.tau = j.at("tau").get<double>();
    c.epsilon = j.at("epsilon").get<double>();
    c.lambda_lb = j.at("lambda_lb").get<double>();
    c.lambda_frl = j.at("lambda_frl").get<double>();
    c.learning_rate = j.at("learning_rate").get<double>();
    c.beta1 = j.at("adam_beta1").get<double>();
    c.beta2 = j.at("adam_beta2").get<double>();
    c.weight_decay = j.at("weight_decay").get<double>();
    c.batch_size = j.at("batch_size").get<std::size_t>();
    c.steps = j.at("steps").get<std::size_t>();
    c.seed = j.at("seed").get<std::uint64_t>();
    c.router = parse_router_kind(j.at("router").get<std::string>());
    c.frl_update = j.at("frl_update").get<std::string>() == "sequential" ? FrlUpdateMode::per_sample
                                                                          : FrlUpdateMode::batch_aggregated;
    c.full_beta_gradient = j.at("full_beta_gradient").get<bool>();
    c.frl_shrinkage = j.at("frl_shrinkage").get<bool>();
    c.identity_projection = j.at("identity_projection").get<bool>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed config record: ") + e.what());
  }
  return c;
}

}  // namespace mram

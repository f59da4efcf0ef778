#pragma once

// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The MRAM Authors

// End-to-end training loop. One step:
//   1. input distribution Q per sample
//   2. attention, retrieved prototype and its distribution for every expert
//   3. routing probabilities and top-k selection
//   4. routed experts' forward pass, divergence weights and aggregated logits
//   5. cross-entropy, load-balance and library regularizer terms
//   6. batch-aggregated library read-then-update
//   7. Adam step on expert (and gate) parameters
//
// Per-sample work may run on several threads; every reduction walks samples
// and experts in index order, so results do not depend on the thread count.

#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "mram/aggregator.hpp"
#include "mram/config.hpp"
#include "mram/data.hpp"
#include "mram/experts.hpp"
#include "mram/frl.hpp"
#include "mram/losses.hpp"
#include "mram/metrics.hpp"
#include "mram/optimizer.hpp"
#include "mram/parallel.hpp"
#include "mram/rng.hpp"
#include "mram/router.hpp"
#include "mram/stats.hpp"

namespace mram {

using ExpertMoments = std::array<AdamMoments, 4>;
using GateMoments = std::array<AdamMoments, 2>;

struct TrainState {
  std::vector<ExpertParams> experts;
  std::vector<FeatureRetrievalLibrary> libraries;
  std::vector<Projection> projections;
  std::optional<GateParams> gate;
  std::vector<ExpertMoments> expert_moments;
  std::optional<GateMoments> gate_moments;
  std::uint64_t step = 0;

  bool operator==(const TrainState&) const = default;
};

inline ExpertShape expert_shape(const TrainConfig& c) { return {c.feature_dim, c.hidden_dim, c.pixels, c.classes}; }

inline ExpertMoments zero_moments(const ExpertParams& p) {
  const auto v = p.values();
  return {AdamMoments(v[0].size()), AdamMoments(v[1].size()), AdamMoments(v[2].size()), AdamMoments(v[3].size())};
}

/// Fresh state: each consumer draws from its own seeded stream.
inline TrainState init_state(const TrainConfig& config) {
  config.validate();
  TrainState s;
  for (std::size_t j = 0; j < config.n_experts; ++j) {
    auto expert_rng = make_stream(config.seed, Stream::expert_init, j);
    s.experts.push_back(ExpertParams::random(expert_shape(config), expert_rng));
    s.expert_moments.push_back(zero_moments(s.experts.back()));

    auto proto_rng = make_stream(config.seed, Stream::prototype_init, j);
    s.libraries.push_back(FeatureRetrievalLibrary::random(config.prototypes_per_expert, config.feature_dim, proto_rng));

    if (config.identity_projection) {
      s.projections.push_back(Projection::identity(config.feature_dim));
    } else {
      auto proj_rng = make_stream(config.seed, Stream::projection_init, j);
      s.projections.push_back(Projection::random(config.hidden_dim, config.feature_dim, proj_rng));
    }
  }
  if (config.router == RouterKind::linear_gate) {
    auto gate_rng = make_stream(config.seed, Stream::gate_init);
    s.gate = GateParams::random(config.n_experts, config.feature_dim, gate_rng);
    s.gate_moments = GateMoments{AdamMoments(s.gate->weights.size()), AdamMoments(s.gate->bias.size())};
  }
  return s;
}

/// Everything computed for one sample on the way to its aggregated logits.
struct SampleForward {
  DiscreteDistribution query;
  std::vector<Vector> attention;              // per expert, K_j weights
  std::vector<DiscreteDistribution> proto_dists;  // per expert (empty for the linear gate)
  RoutingDecision routing;
  std::vector<ExpertOutput> encoded;          // per expert; only filled where computed
  std::map<std::size_t, DiscreteDistribution> output_dists;
  AggregationWeights divergence_weights;      // moe-rm only
  std::map<std::size_t, double> mixing;       // weights actually used to mix outputs
  std::map<std::size_t, Matrix> outputs;
  Matrix logits;
};

/// Forward pass for one sample. With `encode_all`, every expert's encoder runs
/// (the library update needs each expert's representation); heads only run
/// for routed experts.
inline SampleForward forward_sample(const TrainState& state, const TrainConfig& config, std::span<const double> feature,
                                    bool encode_all) {
  const std::size_t n = state.experts.size();
  SampleForward f;
  f.query = normalize(feature);

  f.attention.resize(n);
  for (std::size_t j = 0; j < n; ++j) f.attention[j] = attend(state.libraries[j], feature);

  if (config.router == RouterKind::linear_gate) {
    f.routing.probs = baseline_linear_gate(feature, *state.gate);
    f.routing.selected = top_k_select(f.routing.probs, config.top_k);
  } else {
    f.proto_dists.reserve(n);
    for (std::size_t j = 0; j < n; ++j) f.proto_dists.push_back(normalize(retrieve(state.libraries[j], f.attention[j])));
    f.routing.scores = routing_scores(f.query, f.proto_dists, config.epsilon);
    f.routing.probs = routing_probs(f.routing.scores, config.tau);
    if (config.router == RouterKind::soft_all) {
      f.routing.selected.resize(n);
      std::iota(f.routing.selected.begin(), f.routing.selected.end(), std::size_t{0});
    } else {
      f.routing.selected = top_k_select(f.routing.probs, config.top_k);
    }
  }

  f.encoded.resize(n);
  if (encode_all)
    for (std::size_t j = 0; j < n; ++j) f.encoded[j] = expert_encode(feature, state.experts[j]);

  for (std::size_t j : f.routing.selected) {
    if (!encode_all) f.encoded[j] = expert_encode(feature, state.experts[j]);
    expert_head(f.encoded[j], state.experts[j]);
    f.outputs.emplace(j, f.encoded[j].logits);
  }

  switch (config.router) {
    case RouterKind::moe_rm: {
      for (std::size_t j : f.routing.selected)
        f.output_dists.emplace(j, output_distribution(f.encoded[j].intermediate, state.projections[j], config.feature_dim));
      f.divergence_weights = aggregation_weights(f.query, f.output_dists, config.epsilon);
      f.mixing = f.divergence_weights.weights;
      break;
    }
    case RouterKind::soft_all:
      for (std::size_t j : f.routing.selected) f.mixing[j] = f.routing.probs[j];
      break;
    case RouterKind::linear_gate: {
      double mass = 0.0;
      for (std::size_t j : f.routing.selected) mass += f.routing.probs[j];
      for (std::size_t j : f.routing.selected) f.mixing[j] = f.routing.probs[j] / mass;
      break;
    }
  }
  f.logits = aggregate(f.mixing, f.outputs);
  return f;
}

struct StepMetrics {
  double routing_entropy = 0.0;  // mean per-sample entropy of pi, nats
  std::vector<std::size_t> selection_counts;
};

struct StepRecord {
  std::uint64_t step = 0;
  LossBreakdown loss;
  StepMetrics metrics;
};

using Batch = std::vector<const Sample*>;

namespace detail {

struct SampleTrace {
  double ce = 0.0;
  Vector probs;
  std::vector<std::size_t> selected;
  std::vector<Vector> attention;
  std::vector<Vector> projected;
  std::map<std::size_t, ExpertParams> grads;
  Vector grad_probs;  // dCE/dpi, linear gate only
};

inline void check_sample(const Sample& s, const TrainConfig& c) {
  require_dim(s.feature.size() == c.feature_dim, "sample feature dimension " + std::to_string(s.feature.size()) +
                                                     " vs configured " + std::to_string(c.feature_dim));
  require_dim(s.labels.size() == c.pixels, "sample has " + std::to_string(s.labels.size()) + " labels, configured " +
                                               std::to_string(c.pixels) + " pixels");
}

inline SampleTrace trace_sample(const TrainState& state, const TrainConfig& config, const Sample& sample,
                                double batch_scale) {
  const Vector x = sample.feature_f64();
  SampleForward f = forward_sample(state, config, x, true);

  SampleTrace t;
  t.ce = cross_entropy(f.logits, sample.labels);
  t.probs = f.routing.probs;
  t.selected = f.routing.selected;
  t.attention = std::move(f.attention);
  t.projected.reserve(state.experts.size());
  for (std::size_t j = 0; j < state.experts.size(); ++j)
    t.projected.push_back(project(state.projections[j], f.encoded[j].intermediate));

  Matrix grad_out = cross_entropy_gradient(f.logits, sample.labels);
  for (double& g : grad_out.data) g *= batch_scale;

  std::map<std::size_t, double> grad_divergence;
  if (config.router == RouterKind::moe_rm && config.full_beta_gradient)
    grad_divergence = aggregation_divergence_gradient(f.divergence_weights, f.outputs, grad_out);

  for (std::size_t j : f.routing.selected) {
    Matrix gy = grad_out;
    for (double& g : gy.data) g *= f.mixing.at(j);
    Vector gh;
    if (!grad_divergence.empty()) {
      const auto& r = f.output_dists.at(j);
      Vector gr = js_gradient_second(f.query.probs(), r.probs());
      for (double& v : gr) v *= grad_divergence.at(j);
      const Vector gu = softmax_backward(r.probs(), gr);
      gh = f.encoded[j].intermediate.size() == config.feature_dim ? gu : state.projections[j].apply_transpose(gu);
    }
    t.grads.emplace(j, expert_backward(x, state.experts[j], gy, gh));
  }

  if (config.router == RouterKind::linear_gate) {
    t.grad_probs.assign(state.experts.size(), 0.0);
    double mass = 0.0;
    for (std::size_t j : f.routing.selected) mass += f.routing.probs[j];
    double mean = 0.0;
    std::map<std::size_t, double> along;
    for (std::size_t j : f.routing.selected) {
      along[j] = dot(grad_out.data, f.outputs.at(j).data);
      mean += f.mixing.at(j) * along[j];
    }
    for (std::size_t j : f.routing.selected) t.grad_probs[j] = (along[j] - mean) / mass;
  }
  return t;
}

}  // namespace detail

/// Advances `state` by one step on `batch`. Deterministic in (batch, state, config).
inline StepRecord train_step(TrainState& state, const Batch& batch, const TrainConfig& config) {
  config.validate();
  detail::require_input(!batch.empty(), "train_step: empty batch");
  for (const Sample* s : batch) detail::check_sample(*s, config);

  const std::size_t n = state.experts.size();
  const std::size_t b = batch.size();
  const double batch_scale = 1.0 / static_cast<double>(b);

  std::vector<detail::SampleTrace> traces(b);
  parallel_for(b, config.threads,
               [&](std::size_t i) { traces[i] = detail::trace_sample(state, config, *batch[i], batch_scale); });

  StepRecord record;
  record.step = state.step;
  record.metrics.selection_counts.assign(n, 0);

  Matrix probs(b, n);
  std::vector<Matrix> attention(n);
  std::vector<Matrix> projected(n);
  for (std::size_t j = 0; j < n; ++j) {
    attention[j] = Matrix(b, state.libraries[j].size());
    projected[j] = Matrix(b, config.feature_dim);
  }

  double ce = 0.0;
  double entropy_sum = 0.0;
  std::vector<ExpertParams> grads;
  grads.reserve(n);
  for (const auto& e : state.experts) grads.push_back(ExpertParams::zeros(e.shape()));

  for (std::size_t i = 0; i < b; ++i) {
    const auto& t = traces[i];
    ce += t.ce;
    entropy_sum += entropy(t.probs);
    for (std::size_t j = 0; j < n; ++j) {
      probs(i, j) = t.probs[j];
      std::copy(t.attention[j].begin(), t.attention[j].end(), attention[j].row(i).begin());
      std::copy(t.projected[j].begin(), t.projected[j].end(), projected[j].row(i).begin());
    }
    for (std::size_t j : t.selected) ++record.metrics.selection_counts[j];
    for (const auto& [j, g] : t.grads) accumulate(grads[j], g);
  }
  ce /= static_cast<double>(b);
  record.metrics.routing_entropy = entropy_sum / static_cast<double>(b);

  const double lb = load_balance_loss(probs);
  const double frl = frl_regularizer(state.libraries, attention);
  record.loss = total_loss(ce, lb, frl, config.lambda_lb, config.lambda_frl);

  std::optional<GateParams> gate_grad;
  if (state.gate) {
    gate_grad = GateParams::zeros(n, config.feature_dim);
    const Vector lb_grad = load_balance_gradient(probs);
    for (std::size_t i = 0; i < b; ++i) {
      Vector gp = traces[i].grad_probs;
      for (std::size_t j = 0; j < n; ++j) gp[j] += config.lambda_lb * lb_grad[j];
      const GateParams g = linear_gate_backward(batch[i]->feature_f64(), traces[i].probs, gp);
      for (std::size_t k = 0; k < g.weights.data.size(); ++k) gate_grad->weights.data[k] += g.weights.data[k];
      for (std::size_t k = 0; k < g.bias.size(); ++k) gate_grad->bias[k] += g.bias[k];
    }
  }

  // Library maintenance happens after the losses and before the optimizer step.
  for (std::size_t j = 0; j < n; ++j) {
    state.libraries[j] = read_then_update(state.libraries[j], attention[j], projected[j], config.eta, config.frl_update);
    if (config.frl_shrinkage) shrink(state.libraries[j], 1.0 - config.learning_rate * config.lambda_frl);
  }

  if (config.learning_rate > 0.0) {
    const AdamConfig adam{config.learning_rate, config.beta1, config.beta2, 1e-8, config.weight_decay};
    const std::uint64_t t = state.step + 1;
    for (std::size_t j = 0; j < n; ++j) {
      auto params = state.experts[j].tensors();
      const auto g = grads[j].values();
      for (std::size_t k = 0; k < params.size(); ++k) adam_update(params[k].values, g[k], state.expert_moments[j][k], t, adam);
    }
    if (state.gate) {
      adam_update(state.gate->weights.data, gate_grad->weights.data, (*state.gate_moments)[0], t, adam);
      adam_update(state.gate->bias, gate_grad->bias, (*state.gate_moments)[1], t, adam);
    }
  }
  ++state.step;
  return record;
}

struct TrainResult {
  TrainState state;
  std::vector<StepRecord> history;
};

/// Yields mini-batches from seeded permutations of the dataset, reshuffling
/// whenever a pass is exhausted.
class BatchSampler {
 public:
  BatchSampler(const Dataset& data, std::uint64_t seed) : data_(data), rng_(make_stream(seed, Stream::data_order)) {
    order_.resize(data.size());
    reshuffle();
  }

  Batch next(std::size_t batch_size) {
    Batch batch;
    batch.reserve(batch_size);
    while (batch.size() < batch_size) {
      if (cursor_ == order_.size()) reshuffle();
      batch.push_back(&data_.samples[order_[cursor_++]]);
    }
    return batch;
  }

 private:
  void reshuffle() {
    std::iota(order_.begin(), order_.end(), std::size_t{0});
    // Fisher-Yates with explicit draws; std::shuffle's algorithm is unspecified.
    for (std::size_t i = order_.size(); i > 1; --i) {
      const std::size_t k = static_cast<std::size_t>(rng_() % i);
      std::swap(order_[i - 1], order_[k]);
    }
    cursor_ = 0;
  }

  const Dataset& data_;
  std::mt19937_64 rng_;
  std::vector<std::size_t> order_;
  std::size_t cursor_ = 0;
};

inline void check_dataset(const Dataset& data, const TrainConfig& config) {
  detail::require_dim(data.dim == config.feature_dim, "dataset feature dimension " + std::to_string(data.dim) +
                                                          " vs model " + std::to_string(config.feature_dim));
  detail::require_dim(data.pixels == config.pixels, "dataset pixel count " + std::to_string(data.pixels) +
                                                        " vs model " + std::to_string(config.pixels));
  detail::require_dim(data.classes == config.classes, "dataset class count " + std::to_string(data.classes) +
                                                          " vs model " + std::to_string(config.classes));
}

using StepCallback = std::function<void(const StepRecord&)>;

/// Runs config.steps steps from a fresh state.
inline TrainResult train(const Dataset& data, const TrainConfig& config, const StepCallback& on_step = {}) {
  config.validate();
  detail::require_input(!data.empty(), "train: empty dataset");
  check_dataset(data, config);
  TrainResult result{init_state(config), {}};
  result.history.reserve(config.steps);
  BatchSampler sampler(data, config.seed);
  for (std::size_t s = 0; s < config.steps; ++s) {
    const Batch batch = sampler.next(config.batch_size);
    result.history.push_back(train_step(result.state, batch, config));
    if (on_step) on_step(result.history.back());
  }
  return result;
}

/// Per-pixel argmax of aggregated logits.
inline std::vector<std::uint8_t> predict_labels(const Matrix& logits) {
  std::vector<std::uint8_t> out(logits.rows);
  for (std::size_t p = 0; p < logits.rows; ++p) out[p] = static_cast<std::uint8_t>(argmax(logits.row(p)));
  return out;
}

struct RoutingPurity {
  std::map<std::uint16_t, double> per_scenario;
  std::map<std::uint16_t, std::size_t> modal_expert;
  double macro = 0.0;
};

struct Evaluation {
  ConfusionMatrix confusion;
  MetricSummary metrics;
  double mean_ce = 0.0;
  std::vector<std::size_t> top1;              // per sample
  std::vector<std::size_t> selection_counts;  // per expert, over all samples
  std::optional<RoutingPurity> purity;        // when scenario ids are present
};

/// Routing purity: per scenario, the share of its samples whose top-1 expert
/// is the scenario's most frequent top-1 expert (ties to the lower index).
inline RoutingPurity routing_purity(const Dataset& data, std::span<const std::size_t> top1, std::size_t experts) {
  std::map<std::uint16_t, std::vector<std::size_t>> counts;
  for (std::size_t i = 0; i < data.size(); ++i) {
    auto& c = counts[data.samples[i].scenario_id.value()];
    c.resize(experts, 0);
    ++c[top1[i]];
  }
  RoutingPurity p;
  for (const auto& [scenario, c] : counts) {
    std::size_t modal = 0;
    for (std::size_t j = 1; j < c.size(); ++j)
      if (c[j] > c[modal]) modal = j;
    const double total = static_cast<double>(std::accumulate(c.begin(), c.end(), std::size_t{0}));
    p.modal_expert[scenario] = modal;
    p.per_scenario[scenario] = static_cast<double>(c[modal]) / total;
    p.macro += p.per_scenario[scenario];
  }
  if (!counts.empty()) p.macro /= static_cast<double>(counts.size());
  return p;
}

/// Inference over a dataset with frozen parameters and libraries.
inline Evaluation evaluate(const TrainState& state, const TrainConfig& config, const Dataset& data) {
  config.validate();
  check_dataset(data, config);
  detail::require_input(!data.empty(), "evaluate: empty dataset");
  const std::size_t n = data.size();

  struct Row {
    std::vector<std::uint8_t> predicted;
    double ce = 0.0;
    std::size_t top1 = 0;
    std::vector<std::size_t> selected;
  };
  std::vector<Row> rows(n);
  parallel_for(n, config.threads, [&](std::size_t i) {
    const Sample& s = data.samples[i];
    const SampleForward f = forward_sample(state, config, s.feature_f64(), false);
    rows[i].predicted = predict_labels(f.logits);
    rows[i].ce = cross_entropy(f.logits, s.labels);
    rows[i].top1 = argmax(f.routing.probs);
    rows[i].selected = f.routing.selected;
  });

  Evaluation ev;
  ev.confusion = ConfusionMatrix(config.classes);
  ev.selection_counts.assign(state.experts.size(), 0);
  for (std::size_t i = 0; i < n; ++i) {
    ev.confusion = accumulate(std::move(ev.confusion), rows[i].predicted, data.samples[i].labels);
    ev.mean_ce += rows[i].ce;
    ev.top1.push_back(rows[i].top1);
    for (std::size_t j : rows[i].selected) ++ev.selection_counts[j];
  }
  ev.mean_ce /= static_cast<double>(n);
  ev.metrics = summary(ev.confusion);
  if (data.has_scenarios()) ev.purity = routing_purity(data, ev.top1, state.experts.size());
  return ev;
}

}  // namespace mram

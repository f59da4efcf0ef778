#pragma once

// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The MRAM Authors

// Checkpoint layout (little-endian):
//   "MRAM" | u32 version | string config_json | u64 step | u32 tensor_count
//   tensor_count x { string name | u32 rank | rank x u64 extent | f64 values... }
// Strings are u32 length + bytes. Tensor values are IEEE-754 binary64.

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "mram/binary_io.hpp"
#include "mram/config.hpp"
#include "mram/error.hpp"
#include "mram/trainer.hpp"

namespace mram {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  TrainConfig config;
  TrainState state;
};

struct NamedTensor {
  std::vector<std::size_t> shape;
  std::vector<double> values;
};

namespace detail {

inline void add_tensor(std::vector<std::pair<std::string, NamedTensor>>& out, std::string name,
                       std::vector<std::size_t> shape, std::span<const double> values) {
  out.emplace_back(std::move(name), NamedTensor{std::move(shape), {values.begin(), values.end()}});
}

inline constexpr std::array<const char*, 4> kExpertTensorNames{"encoder_weights", "encoder_bias", "head_weights",
                                                               "head_bias"};

/// Every tensor in a fixed order, paired with its manifest name.
inline std::vector<std::pair<std::string, NamedTensor>> flatten(const TrainState& s) {
  std::vector<std::pair<std::string, NamedTensor>> out;
  for (std::size_t j = 0; j < s.experts.size(); ++j) {
    const std::string prefix = "expert." + std::to_string(j) + ".";
    const auto values = s.experts[j].values();
    const auto shapes = s.experts[j].tensor_shapes();
    for (std::size_t k = 0; k < values.size(); ++k) add_tensor(out, prefix + kExpertTensorNames[k], shapes[k], values[k]);
  }
  for (std::size_t j = 0; j < s.libraries.size(); ++j) {
    const auto& lib = s.libraries[j];
    std::vector<double> protos;
    std::vector<double> importance;
    for (const auto& e : lib.entries()) {
      protos.insert(protos.end(), e.prototype.begin(), e.prototype.end());
      importance.push_back(e.importance);
    }
    add_tensor(out, "frl." + std::to_string(j) + ".prototypes", {lib.size(), lib.dim()}, protos);
    add_tensor(out, "frl." + std::to_string(j) + ".importance", {lib.size()}, importance);
  }
  for (std::size_t j = 0; j < s.projections.size(); ++j) {
    const auto& p = s.projections[j];
    if (p.is_identity())
      add_tensor(out, "projection." + std::to_string(j) + ".identity", {p.in_dim()}, {});
    else
      add_tensor(out, "projection." + std::to_string(j), {p.weights().rows, p.weights().cols}, p.weights().data);
  }
  if (s.gate) {
    add_tensor(out, "gate.weights", {s.gate->weights.rows, s.gate->weights.cols}, s.gate->weights.data);
    add_tensor(out, "gate.bias", {s.gate->bias.size()}, s.gate->bias);
  }
  for (std::size_t j = 0; j < s.expert_moments.size(); ++j) {
    for (std::size_t k = 0; k < 4; ++k) {
      const std::string base = "adam.expert." + std::to_string(j) + "." + kExpertTensorNames[k];
      const auto& m = s.expert_moments[j][k];
      add_tensor(out, base + ".m", {m.first.size()}, m.first);
      add_tensor(out, base + ".v", {m.second.size()}, m.second);
    }
  }
  if (s.gate_moments) {
    const char* names[2] = {"weights", "bias"};
    for (std::size_t k = 0; k < 2; ++k) {
      const auto& m = (*s.gate_moments)[k];
      add_tensor(out, std::string("adam.gate.") + names[k] + ".m", {m.first.size()}, m.first);
      add_tensor(out, std::string("adam.gate.") + names[k] + ".v", {m.second.size()}, m.second);
    }
  }
  return out;
}

}  // namespace detail

inline std::vector<char> encode_checkpoint(const TrainConfig& config, const TrainState& state) {
  io::Writer w;
  w.bytes("MRAM");
  w.u32(kCheckpointVersion);
  w.string(to_json(config).dump());
  w.u64(state.step);
  const auto tensors = detail::flatten(state);
  w.u32(static_cast<std::uint32_t>(tensors.size()));
  for (const auto& [name, t] : tensors) {
    w.string(name);
    w.u32(static_cast<std::uint32_t>(t.shape.size()));
    for (auto e : t.shape) w.u64(e);
    for (double v : t.values) w.f64(v);
  }
  return w.buffer();
}

inline Checkpoint decode_checkpoint(std::string_view bytes) {
  io::Reader r(bytes);
  if (r.bytes(4, "magic") != "MRAM") throw FormatError("bad magic, expected MRAM", 0);
  const auto version = r.u32("version");
  if (version != kCheckpointVersion) throw FormatError("unsupported checkpoint version " + std::to_string(version), 4);

  const auto config_at = r.offset();
  Checkpoint ck;
  try {
    ck.config = config_from_json(nlohmann::ordered_json::parse(r.string("config")));
    ck.config.validate();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("unreadable config record: ") + e.what(), config_at);
  } catch (const ConfigError& e) {
    throw FormatError(e.what(), config_at);
  }
  const auto step = r.u64("step");

  std::map<std::string, NamedTensor> tensors;
  const auto count = r.u32("tensor count");
  for (std::uint32_t t = 0; t < count; ++t) {
    std::string name = r.string("tensor name");
    NamedTensor nt;
    const auto rank_at = r.offset();
    const auto rank = r.u32("tensor rank");
    if (rank > 8) throw FormatError("implausible rank for tensor " + name, rank_at);
    std::uint64_t elements = 1;
    for (std::uint32_t k = 0; k < rank; ++k) {
      nt.shape.push_back(r.u64("tensor extent"));
      elements *= nt.shape.back();
    }
    if (name.ends_with(".identity")) elements = 0;
    if (elements * 8 > r.remaining()) throw FormatError("truncated data for tensor " + name, r.offset());
    nt.values.resize(elements);
    for (auto& v : nt.values) v = r.f64("tensor value");
    tensors.emplace(std::move(name), std::move(nt));
  }
  if (r.remaining() != 0) throw FormatError("trailing bytes after last tensor", r.offset());

  // Rebuild a fresh state of the right shape, then overwrite every tensor.
  const TrainConfig& c = ck.config;
  TrainState s;
  const auto take = [&](const std::string& name, std::size_t expected) -> std::vector<double>& {
    auto it = tensors.find(name);
    if (it == tensors.end()) throw FormatError("checkpoint lacks tensor " + name, bytes.size());
    if (it->second.values.size() != expected)
      throw FormatError("tensor " + name + " has " + std::to_string(it->second.values.size()) + " values, expected " +
                            std::to_string(expected),
                        bytes.size());
    return it->second.values;
  };

  for (std::size_t j = 0; j < c.n_experts; ++j) {
    ExpertParams p = ExpertParams::zeros(expert_shape(c));
    auto views = p.tensors();
    for (std::size_t k = 0; k < 4; ++k) {
      const auto& src = take("expert." + std::to_string(j) + "." + detail::kExpertTensorNames[k], views[k].values.size());
      std::copy(src.begin(), src.end(), views[k].values.begin());
    }
    s.experts.push_back(std::move(p));

    const auto& protos = take("frl." + std::to_string(j) + ".prototypes", c.prototypes_per_expert * c.feature_dim);
    const auto& importance = take("frl." + std::to_string(j) + ".importance", c.prototypes_per_expert);
    std::vector<PrototypeEntry> entries(c.prototypes_per_expert);
    for (std::size_t k = 0; k < entries.size(); ++k) {
      entries[k].prototype.assign(protos.begin() + k * c.feature_dim, protos.begin() + (k + 1) * c.feature_dim);
      entries[k].importance = importance[k];
    }
    s.libraries.emplace_back(c.feature_dim, std::move(entries));

    if (c.identity_projection) {
      s.projections.push_back(Projection::identity(c.feature_dim));
    } else {
      Matrix m(c.feature_dim, c.hidden_dim);
      m.data = take("projection." + std::to_string(j), c.feature_dim * c.hidden_dim);
      s.projections.push_back(Projection::from_matrix(std::move(m)));
    }

    ExpertMoments moments = zero_moments(s.experts.back());
    for (std::size_t k = 0; k < 4; ++k) {
      const std::string base = "adam.expert." + std::to_string(j) + "." + detail::kExpertTensorNames[k];
      moments[k].first = take(base + ".m", moments[k].first.size());
      moments[k].second = take(base + ".v", moments[k].second.size());
    }
    s.expert_moments.push_back(std::move(moments));
  }
  if (c.router == RouterKind::linear_gate) {
    GateParams g = GateParams::zeros(c.n_experts, c.feature_dim);
    g.weights.data = take("gate.weights", g.weights.size());
    g.bias = take("gate.bias", g.bias.size());
    s.gate = std::move(g);
    GateMoments gm{AdamMoments(s.gate->weights.size()), AdamMoments(s.gate->bias.size())};
    gm[0].first = take("adam.gate.weights.m", gm[0].first.size());
    gm[0].second = take("adam.gate.weights.v", gm[0].second.size());
    gm[1].first = take("adam.gate.bias.m", gm[1].first.size());
    gm[1].second = take("adam.gate.bias.v", gm[1].second.size());
    s.gate_moments = std::move(gm);
  }
  s.step = step;
  ck.state = std::move(s);
  return ck;
}

inline void save_checkpoint(const std::string& path, const TrainConfig& config, const TrainState& state) {
  io::write_file(path, encode_checkpoint(config, state));
}

inline Checkpoint load_checkpoint(const std::string& path) { return decode_checkpoint(io::read_file(path)); }

}  // namespace mram

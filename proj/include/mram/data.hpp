#pragma once

// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The MRAM Authors

// Synthetic scenario datasets standing in for frozen-backbone features, and
// the MRDS binary format used both for generated sets and for ingesting
// features exported by external tools.
//
// MRDS layout (little-endian):
//   "MRDS" | u32 version | u32 n_samples | u32 d | u32 pixels | u32 classes | u8 has_scenario
//   per sample: d x f32 feature | pixels x u8 label | [u16 scenario id]

#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "mram/binary_io.hpp"
#include "mram/error.hpp"
#include "mram/matrix.hpp"
#include "mram/numeric.hpp"
#include "mram/rng.hpp"

namespace mram {

struct Sample {
  std::vector<float> feature;
  std::vector<std::uint8_t> labels;
  std::optional<std::uint16_t> scenario_id;

  [[nodiscard]] Vector feature_f64() const { return {feature.begin(), feature.end()}; }

  bool operator==(const Sample&) const = default;
};

struct Dataset {
  std::size_t dim = 0;
  std::size_t pixels = 0;
  std::size_t classes = 0;
  std::vector<Sample> samples;

  [[nodiscard]] bool empty() const noexcept { return samples.empty(); }
  [[nodiscard]] std::size_t size() const noexcept { return samples.size(); }
  [[nodiscard]] bool has_scenarios() const noexcept {
    return !samples.empty() && samples.front().scenario_id.has_value();
  }

  bool operator==(const Dataset&) const = default;
};

/// One synthetic scenario: a Gaussian feature cloud and a per-pixel linear
/// labelling rule.
struct ScenarioSpec {
  Vector mean;               // d
  double feature_noise = 1;  // per-coordinate std
  Matrix label_map;          // (pixels * classes) x d
  std::size_t pixels = 0;
  std::size_t classes = 0;
  std::size_t count = 0;

  [[nodiscard]] std::size_t dim() const noexcept { return mean.size(); }
};

/// Per-pixel argmax of label_map applied to the (float-rounded) feature.
inline std::vector<std::uint8_t> derive_labels(const ScenarioSpec& spec, std::span<const float> feature) {
  const Vector x(feature.begin(), feature.end());
  const Vector logits = mat_vec(spec.label_map, x);
  std::vector<std::uint8_t> labels(spec.pixels);
  for (std::size_t p = 0; p < spec.pixels; ++p)
    labels[p] = static_cast<std::uint8_t>(argmax(std::span<const double>(logits).subspan(p * spec.classes, spec.classes)));
  return labels;
}

inline void validate(const ScenarioSpec& spec, std::size_t dim, std::size_t pixels, std::size_t classes) {
  detail::require_config(spec.feature_noise > 0.0 && std::isfinite(spec.feature_noise), "scenario noise must be > 0");
  detail::require_config(spec.mean.size() == dim, "scenario mean has dimension " + std::to_string(spec.mean.size()) +
                                                      ", expected " + std::to_string(dim));
  detail::require_config(spec.pixels == pixels && spec.classes == classes, "scenario pixel/class counts disagree");
  detail::require_config(spec.label_map.rows == pixels * classes && spec.label_map.cols == dim,
                         "scenario label map must be (pixels*classes) x d");
  detail::require_config(classes >= 2 && classes <= 256, "class count must lie in [2, 256]");
  detail::require_config(all_finite(spec.mean) && all_finite(spec.label_map.data), "scenario has non-finite values");
}

/// Draws `count` samples per scenario, in scenario order. Deterministic in `seed`.
inline Dataset generate_synthetic(const std::vector<ScenarioSpec>& specs, std::uint64_t seed) {
  detail::require_config(!specs.empty(), "generate_synthetic needs at least one scenario");
  Dataset ds;
  ds.dim = specs.front().dim();
  ds.pixels = specs.front().pixels;
  ds.classes = specs.front().classes;
  for (const auto& spec : specs) validate(spec, ds.dim, ds.pixels, ds.classes);
  detail::require_config(specs.size() <= 65536, "at most 65536 scenarios");

  for (std::size_t s = 0; s < specs.size(); ++s) {
    const auto& spec = specs[s];
    auto rng = make_stream(seed, Stream::scenario_samples, s);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (std::size_t n = 0; n < spec.count; ++n) {
      Sample sample;
      sample.feature.resize(ds.dim);
      for (std::size_t c = 0; c < ds.dim; ++c)
        sample.feature[c] = static_cast<float>(spec.mean[c] + spec.feature_noise * normal(rng));
      sample.labels = derive_labels(spec, sample.feature);
      sample.scenario_id = static_cast<std::uint16_t>(s);
      ds.samples.push_back(std::move(sample));
    }
  }
  return ds;
}

/// Knobs for building a family of well-separated scenarios.
struct ScenarioDesign {
  std::size_t scenarios = 3;
  std::size_t per_scenario = 300;
  std::size_t dim = 32;
  std::size_t pixels = 64;
  std::size_t classes = 6;
  double noise = 1.0;
  /// Minimum pairwise distance between scenario means, in units of noise.
  double separation = 36.0;
  /// Std of the label-map component orthogonal to the scenario mean. This
  /// part makes labels depend on the within-scenario deviation, with a
  /// different rule per scenario.
  double label_scale = 1.0;
  /// Std of the per-pixel, per-class logit offset contributed by the
  /// component along the scenario mean (constant within a scenario).
  double scenario_logit_scale = 20.0;
};

/// Random scenario means at radius separation*noise (redrawn until every pair
/// is at least that far apart). Each label-map row is a Gaussian vector with
/// its component along the scenario mean replaced by one that contributes a
/// fixed logit offset at the mean, so for x = mean + n the logit is
/// offset + row . n.
inline std::vector<ScenarioSpec> make_scenario_specs(const ScenarioDesign& design, std::uint64_t seed) {
  detail::require_config(design.scenarios >= 1, "need at least one scenario");
  detail::require_config(design.dim >= 2, "feature dimension must be >= 2");
  detail::require_config(design.pixels >= 1, "pixel count must be >= 1");
  detail::require_config(design.classes >= 2 && design.classes <= 256, "class count must lie in [2, 256]");
  detail::require_config(design.noise > 0.0, "noise must be > 0");
  detail::require_config(design.separation >= 0.0, "separation must be >= 0");

  auto rng = make_stream(seed, Stream::scenario_design);
  std::normal_distribution<double> normal(0.0, 1.0);
  const double radius = design.separation * design.noise;
  const double min_dist = design.separation * design.noise;

  std::vector<Vector> means;
  for (int attempt = 0;; ++attempt) {
    detail::require_config(attempt < 10000, "could not place scenario means far enough apart");
    means.assign(design.scenarios, Vector(design.dim));
    for (auto& m : means) {
      double norm = 0.0;
      for (double& v : m) v = normal(rng);
      norm = std::sqrt(dot(m, m));
      for (double& v : m) v *= radius / norm;
    }
    bool ok = true;
    for (std::size_t a = 0; a < means.size() && ok; ++a)
      for (std::size_t b = a + 1; b < means.size() && ok; ++b) {
        double d2 = 0.0;
        for (std::size_t c = 0; c < design.dim; ++c) d2 += (means[a][c] - means[b][c]) * (means[a][c] - means[b][c]);
        ok = std::sqrt(d2) >= min_dist;
      }
    if (ok) break;
  }

  std::vector<ScenarioSpec> specs(design.scenarios);
  for (std::size_t s = 0; s < specs.size(); ++s) {
    auto& spec = specs[s];
    spec.mean = means[s];
    spec.feature_noise = design.noise;
    spec.pixels = design.pixels;
    spec.classes = design.classes;
    spec.count = design.per_scenario;
    spec.label_map = Matrix(design.pixels * design.classes, design.dim);
    const double mean_norm = std::sqrt(dot(spec.mean, spec.mean));
    for (std::size_t r = 0; r < spec.label_map.rows; ++r) {
      auto row = spec.label_map.row(r);
      for (double& v : row) v = design.label_scale * normal(rng);
      const double offset = design.scenario_logit_scale * normal(rng);
      if (mean_norm == 0.0) continue;
      const double along = dot(row, spec.mean) / (mean_norm * mean_norm);
      for (std::size_t c = 0; c < row.size(); ++c)
        row[c] += (offset / (mean_norm * mean_norm) - along) * spec.mean[c];
    }
  }
  return specs;
}

inline constexpr std::uint32_t kDatasetVersion = 1;

inline std::vector<char> encode_dataset(const Dataset& ds) {
  detail::require_config(ds.classes <= 256, "MRDS stores labels as u8; at most 256 classes");
  io::Writer w;
  w.bytes("MRDS");
  w.u32(kDatasetVersion);
  w.u32(static_cast<std::uint32_t>(ds.samples.size()));
  w.u32(static_cast<std::uint32_t>(ds.dim));
  w.u32(static_cast<std::uint32_t>(ds.pixels));
  w.u32(static_cast<std::uint32_t>(ds.classes));
  const bool has_scenario = ds.has_scenarios();
  w.u8(has_scenario ? 1 : 0);
  for (const auto& s : ds.samples) {
    detail::require_dim(s.feature.size() == ds.dim && s.labels.size() == ds.pixels, "sample shape disagrees with dataset");
    detail::require_input(s.scenario_id.has_value() == has_scenario,
                          "scenario ids must be present on all samples or none");
    for (float f : s.feature) w.f32(f);
    for (auto l : s.labels) w.u8(l);
    if (has_scenario) w.u16(*s.scenario_id);
  }
  return w.buffer();
}

inline Dataset decode_dataset(std::string_view bytes) {
  io::Reader r(bytes);
  if (r.bytes(4, "magic") != "MRDS") throw FormatError("bad magic, expected MRDS", 0);
  const auto version = r.u32("version");
  if (version != kDatasetVersion) throw FormatError("unsupported MRDS version " + std::to_string(version), 4);
  Dataset ds;
  const auto n = r.u32("sample count");
  ds.dim = r.u32("feature dimension");
  ds.pixels = r.u32("pixel count");
  ds.classes = r.u32("class count");
  const auto flag_offset = r.offset();
  const auto has_scenario = r.u8("scenario flag");
  if (has_scenario > 1) throw FormatError("scenario flag must be 0 or 1", flag_offset);
  if (ds.classes < 1 || ds.classes > 256) throw FormatError("class count outside [1, 256]", 20);

  const std::uint64_t per_sample = ds.dim * 4ULL + ds.pixels + (has_scenario ? 2ULL : 0ULL);
  if (per_sample * n > r.remaining())
    throw FormatError("truncated file: header promises " + std::to_string(n) + " samples", r.offset());

  ds.samples.resize(n);
  for (auto& s : ds.samples) {
    s.feature.resize(ds.dim);
    for (auto& f : s.feature) {
      const auto at = r.offset();
      f = r.f32("feature");
      if (!std::isfinite(f)) throw FormatError("non-finite feature value", at);
    }
    s.labels.resize(ds.pixels);
    for (auto& l : s.labels) {
      const auto at = r.offset();
      l = r.u8("label");
      if (l >= ds.classes) throw FormatError("label " + std::to_string(l) + " out of range", at);
    }
    if (has_scenario) s.scenario_id = r.u16("scenario id");
  }
  if (r.remaining() != 0) throw FormatError("trailing bytes after last sample", r.offset());
  return ds;
}

inline void save_dataset(const Dataset& ds, const std::string& path) { io::write_file(path, encode_dataset(ds)); }

inline Dataset load_dataset(const std::string& path) { return decode_dataset(io::read_file(path)); }

}  // namespace mram

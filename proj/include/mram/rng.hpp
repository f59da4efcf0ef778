#pragma once

// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The MRAM Authors

#include <cstdint>
#include <random>

namespace mram {

/// Named consumers of randomness. Each one gets an independent generator
/// derived from the root seed, so enabling or disabling one consumer never
/// shifts the numbers another one sees.
enum class Stream : std::uint64_t {
  data_order = 1,
  expert_init = 2,
  prototype_init = 3,
  projection_init = 4,
  gate_init = 5,
  scenario_design = 6,
  scenario_samples = 7,
};

inline std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Generator for `stream`, sub-indexed by `index` (e.g. the expert number).
inline std::mt19937_64 make_stream(std::uint64_t root_seed, Stream stream, std::uint64_t index = 0) {
  std::uint64_t s = splitmix64(root_seed);
  s = splitmix64(s ^ static_cast<std::uint64_t>(stream));
  s = splitmix64(s ^ (index * 0xd1b54a32d192ed03ULL));
  return std::mt19937_64(s);
}

}  // namespace mram

#pragma once

// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The MRAM Authors

// Random instance generators shared by the unit and acceptance suites.

#include <cmath>
#include <random>
#include <vector>

#include "mram/matrix.hpp"

namespace mram::testing {

inline std::vector<double> random_vector(std::mt19937_64& rng, std::size_t n, double scale = 1.0) {
  std::normal_distribution<double> normal(0.0, scale);
  std::vector<double> v(n);
  for (double& x : v) x = normal(rng);
  return v;
}

/// Probability vector with a random concentration: sometimes near uniform,
/// sometimes with entries many orders of magnitude apart.
inline std::vector<double> random_probs(std::mt19937_64& rng, std::size_t n) {
  std::uniform_real_distribution<double> spread(0.1, 12.0);
  const double scale = spread(rng);
  std::vector<double> v = random_vector(rng, n, scale);
  double top = v[0];
  for (double x : v) top = std::max(top, x);
  double total = 0.0;
  for (double& x : v) {
    x = std::exp(x - top);
    total += x;
  }
  for (double& x : v) x /= total;
  return v;
}

inline Matrix random_matrix(std::mt19937_64& rng, std::size_t rows, std::size_t cols, double scale = 1.0) {
  Matrix m(rows, cols);
  m.data = random_vector(rng, rows * cols, scale);
  return m;
}

}  // namespace mram::testing

#pragma once

// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The MRAM Authors

#include <cstddef>
#include <span>
#include <vector>

namespace mram {

using Vector = std::vector<double>;

/// Dense row-major matrix of doubles.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double value = 0.0) : rows(r), cols(c), data(r * c, value) {}

  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

  std::span<double> row(std::size_t r) { return {data.data() + r * cols, cols}; }
  std::span<const double> row(std::size_t r) const { return {data.data() + r * cols, cols}; }

  [[nodiscard]] std::size_t size() const noexcept { return data.size(); }

  bool operator==(const Matrix&) const = default;
};

/// out = m * x
inline Vector mat_vec(const Matrix& m, std::span<const double> x) {
  Vector out(m.rows, 0.0);
  for (std::size_t r = 0; r < m.rows; ++r) {
    const double* w = m.data.data() + r * m.cols;
    double acc = 0.0;
    for (std::size_t c = 0; c < m.cols; ++c) acc += w[c] * x[c];
    out[r] = acc;
  }
  return out;
}

/// out = m^T * y
inline Vector mat_t_vec(const Matrix& m, std::span<const double> y) {
  Vector out(m.cols, 0.0);
  for (std::size_t r = 0; r < m.rows; ++r) {
    const double* w = m.data.data() + r * m.cols;
    const double yr = y[r];
    if (yr == 0.0) continue;
    for (std::size_t c = 0; c < m.cols; ++c) out[c] += w[c] * yr;
  }
  return out;
}

}  // namespace mram

#pragma once

// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The MRAM Authors

#include <cstdint>
#include <stdexcept>
#include <string>

namespace mram {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Mismatched vector, matrix or distribution extents.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Non-finite values, out-of-range labels, empty sets and similar bad data.
class InvalidInputError : public Error {
 public:
  using Error::Error;
};

/// A hyperparameter or flag outside its admissible range.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Metric requested on a confusion matrix where every class is absent.
class UndefinedMetricError : public Error {
 public:
  using Error::Error;
};

/// File could not be opened, read or written.
class IoError : public Error {
 public:
  using Error::Error;
};

/// Malformed binary file. Carries the byte offset where decoding failed.
class FormatError : public Error {
 public:
  FormatError(const std::string& what, std::uint64_t offset)
      : Error(what + " (at byte offset " + std::to_string(offset) + ")"), offset_(offset) {}

  [[nodiscard]] std::uint64_t offset() const noexcept { return offset_; }

 private:
  std::uint64_t offset_;
};

namespace detail {

inline void require_dim(bool ok, const std::string& what) {
  if (!ok) throw DimensionError(what);
}

inline void require_input(bool ok, const std::string& what) {
  if (!ok) throw InvalidInputError(what);
}

inline void require_config(bool ok, const std::string& what) {
  if (!ok) throw ConfigError(what);
}

}  // namespace detail
}  // namespace mram

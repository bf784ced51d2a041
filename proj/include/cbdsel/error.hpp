#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace cbdsel {

/// Base class for every error raised by the library. The CLI maps any
/// `Error` to exit code 2 (data/validation failure).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// File could not be opened, read, or written.
class IoError : public Error {
 public:
  using Error::Error;
};

/// Malformed persisted data. Carries the byte offset where parsing failed.
class FormatError : public Error {
 public:
  FormatError(const std::string& what, std::uint64_t offset)
      : Error(what + " (at byte offset " + std::to_string(offset) + ")"), offset_(offset) {}

  std::uint64_t offset() const noexcept { return offset_; }

 private:
  std::uint64_t offset_;
};

/// A value violates a type invariant (NaN, bad probability row, label >= C).
class InvariantError : public Error {
 public:
  using Error::Error;
};

/// Incompatible dimensions or row counts.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Normal matrix of the aligner fit is singular at lambda = 0.
class RankDeficiencyError : public Error {
 public:
  using Error::Error;
};

/// A vector with zero norm where a direction is required.
class DegenerateVectorError : public Error {
 public:
  DegenerateVectorError(const std::string& what, std::size_t row)
      : Error(what + " (row " + std::to_string(row) + ")"), row_(row) {}

  std::size_t row() const noexcept { return row_; }

 private:
  std::size_t row_;
};

/// Diversity of an empty subset, histogram accounting mismatch, etc.
class DiversityError : public Error {
 public:
  using Error::Error;
};

/// Bad parameters: k larger than the training set, too few classes, infeasible plans.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Selection budget larger than the candidate pool.
class BudgetError : public Error {
 public:
  using Error::Error;
};

/// Correlation or ratio whose denominator vanishes.
class DegenerateError : public Error {
 public:
  using Error::Error;
};

}  // namespace cbdsel

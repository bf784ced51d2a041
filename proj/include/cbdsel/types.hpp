#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "cbdsel/error.hpp"

namespace cbdsel {

template <typename Scalar>
using RowMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// n x d feature vectors, one per row. Stored at the on-disk precision.
using EmbeddingMatrix = RowMatrix<float>;

using Index = std::size_t;

/// Returns the first non-finite entry as (row, col), or (-1, -1).
template <typename Derived>
std::pair<Eigen::Index, Eigen::Index> first_non_finite(const Eigen::MatrixBase<Derived>& m) {
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c)
      if (!std::isfinite(static_cast<double>(m(r, c)))) return {r, c};
  return {-1, -1};
}

/// Throws InvariantError if any entry is NaN or infinite.
template <typename Derived>
void require_finite(const Eigen::MatrixBase<Derived>& m, const char* what) {
  auto [r, c] = first_non_finite(m);
  if (r >= 0)
    throw InvariantError(std::string(what) + ": non-finite value at (" + std::to_string(r) + ", " +
                         std::to_string(c) + ")");
}

/// Class identifiers in [0, num_classes).
class LabelVector {
 public:
  LabelVector() = default;
  LabelVector(std::vector<std::uint32_t> labels, std::uint32_t num_classes);

  std::size_t size() const noexcept { return labels_.size(); }
  std::uint32_t num_classes() const noexcept { return num_classes_; }
  std::uint32_t operator[](std::size_t i) const { return labels_[i]; }
  const std::vector<std::uint32_t>& values() const noexcept { return labels_; }

 private:
  std::vector<std::uint32_t> labels_;
  std::uint32_t num_classes_ = 0;
};

/// Per-input class probabilities; every row is a distribution.
class ProbabilityMatrix {
 public:
  static constexpr double kRowSumTolerance = 1e-5;

  ProbabilityMatrix() = default;
  explicit ProbabilityMatrix(RowMatrix<float> values);

  Eigen::Index rows() const noexcept { return values_.rows(); }
  Eigen::Index classes() const noexcept { return values_.cols(); }
  const RowMatrix<float>& values() const noexcept { return values_; }

  /// Index of the first row violating the distribution invariant, or -1.
  static Eigen::Index first_invalid_row(const RowMatrix<float>& values);

 private:
  RowMatrix<float> values_;
};

/// Named concepts with one embedding row per name.
struct ConceptSpace {
  std::vector<std::string> names;
  EmbeddingMatrix embeddings;

  std::size_t size() const noexcept { return names.size(); }
};

}  // namespace cbdsel

#pragma once

// Concept-Based Diversity (entropy of pooled concept frequencies) and the
// Geometric Diversity baseline (log-determinant of the normalised Gram matrix).

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include "cbdsel/concept_space.hpp"
#include "cbdsel/types.hpp"

namespace cbdsel {

/// Concept frequencies of a subset with its entropy (bits) kept up to date.
///
/// Entropy is maintained through H = log2 T - (1/T) sum_c fq_c log2 fq_c.
/// The sum is held in fixed point (2^-32 resolution), so add/remove are exact
/// inverses and the cached value does not depend on insertion order.
class ConceptHistogram {
 public:
  ConceptHistogram() = default;

  /// O(m): increments the frequency of each concept in `a`.
  void add(const ConceptAssignment& a);
  /// O(m) inverse of add(). Throws DiversityError, leaving the histogram
  /// untouched, if a concept is missing.
  void remove(const ConceptAssignment& a);

  bool empty() const noexcept { return total_ == 0; }
  /// Entropy in bits; empty when the histogram holds nothing.
  std::optional<double> entropy() const noexcept {
    if (empty()) return std::nullopt;
    return entropy_;
  }
  /// Entropy the histogram would have after add(a), without modifying it.
  double entropy_with(const ConceptAssignment& a) const;

  /// entropy() or 0 when empty.
  double entropy_or_zero() const noexcept { return empty() ? 0.0 : entropy_; }

  std::uint64_t total() const noexcept { return total_; }
  std::size_t distinct() const noexcept { return distinct_; }
  std::uint32_t frequency(std::uint32_t concept_index) const noexcept {
    return concept_index < freq_.size() ? freq_[concept_index] : 0;
  }

  friend bool operator==(const ConceptHistogram& a, const ConceptHistogram& b) noexcept;

 private:
  static double entropy_from(std::uint64_t total, std::int64_t weighted_fixed, std::size_t distinct) noexcept;
  void refresh_entropy() noexcept;

  std::vector<std::uint32_t> freq_;
  std::uint64_t total_ = 0;
  std::size_t distinct_ = 0;
  std::int64_t weighted_fixed_ = 0;
  double entropy_ = 0.0;
};

ConceptHistogram histogram_add(ConceptHistogram h, const ConceptAssignment& a);
ConceptHistogram histogram_remove(ConceptHistogram h, const ConceptAssignment& a);

/// Shannon entropy (bits) of the pooled concept frequencies of a subset,
/// computed from scratch as -sum p log2 p.
double cbd_score(std::span<const ConceptAssignment> assignments);
/// Same, over assignments[subset[i]].
double cbd_score(std::span<const ConceptAssignment> assignments, std::span<const std::size_t> subset);

inline constexpr double kDefaultGdJitter = 1e-8;

/// log det(V V^T + eps I) where V holds the rows of `features` scaled to unit
/// norm. Returns -infinity when the jittered Gram matrix is singular.
template <typename Derived>
double gd_score(const Eigen::MatrixBase<Derived>& features, double eps = kDefaultGdJitter) {
  if (features.rows() < 1) throw DiversityError("gd_score: subset is empty");
  if (!(eps >= 0.0)) throw ConfigError("gd_score: eps must be >= 0");
  RowMatrix<double> v = features.template cast<double>();
  for (Eigen::Index r = 0; r < v.rows(); ++r) {
    const double norm = v.row(r).norm();
    if (!(norm > 0.0)) throw DegenerateVectorError("gd_score: feature vector has zero norm", static_cast<std::size_t>(r));
    v.row(r) /= norm;
  }
  Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(v.rows(), v.rows());
  gram.selfadjointView<Eigen::Lower>().rankUpdate(v);
  gram.diagonal().array() += eps;
  Eigen::LLT<Eigen::MatrixXd, Eigen::Lower> llt(gram);
  if (llt.info() != Eigen::Success) return -std::numeric_limits<double>::infinity();
  return 2.0 * llt.matrixLLT().diagonal().array().log().sum();
}

/// gd_score over the listed rows of `features`.
template <typename Derived>
double gd_score(const Eigen::MatrixBase<Derived>& features, std::span<const std::size_t> subset,
                double eps = kDefaultGdJitter) {
  RowMatrix<double> rows(static_cast<Eigen::Index>(subset.size()), features.cols());
  for (std::size_t i = 0; i < subset.size(); ++i) {
    if (subset[i] >= static_cast<std::size_t>(features.rows())) throw ShapeError("gd_score: subset index out of range");
    rows.row(static_cast<Eigen::Index>(i)) = features.row(static_cast<Eigen::Index>(subset[i])).template cast<double>();
  }
  return gd_score(rows, eps);
}

}  // namespace cbdsel

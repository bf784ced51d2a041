#pragma once

// Cosine-similarity concept extraction and Representative Concept Set (RCS)
// construction.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <numeric>
#include <string>
#include <vector>

#include "cbdsel/detail/parallel.hpp"
#include "cbdsel/types.hpp"

namespace cbdsel {

inline constexpr std::size_t kDefaultTopM = 10;

struct ScoredConcept {
  std::uint32_t concept_index;
  double score;

  friend bool operator==(const ScoredConcept&, const ScoredConcept&) = default;
};

/// The top-m concepts of one image, ordered by (score desc, concept index asc).
struct ConceptAssignment {
  std::size_t image = 0;
  std::vector<ScoredConcept> concepts;

  friend bool operator==(const ConceptAssignment&, const ConceptAssignment&) = default;
};

/// Concept rows pre-normalised for repeated cosine queries.
class CosineIndex {
 public:
  /// Throws DegenerateVectorError naming the first zero-norm concept row.
  template <typename Derived>
  explicit CosineIndex(const Eigen::MatrixBase<Derived>& concepts) : concepts_(concepts.template cast<double>()) {
    norms_ = concepts_.rowwise().norm();
    for (Eigen::Index j = 0; j < norms_.size(); ++j)
      if (!(norms_[j] > 0.0)) throw DegenerateVectorError("concept embedding has zero norm", static_cast<std::size_t>(j));
  }

  Eigen::Index size() const noexcept { return concepts_.rows(); }
  Eigen::Index dim() const noexcept { return concepts_.cols(); }

  /// Entry j is <image, c_j> / (||image|| ||c_j||), clamped to [-1, 1].
  template <typename Derived>
  Vector<double> similarities(const Eigen::MatrixBase<Derived>& image, std::size_t image_row = 0) const {
    if (image.size() != dim())
      throw ShapeError("image has dimension " + std::to_string(image.size()) + ", concepts have " +
                       std::to_string(dim()));
    const Vector<double> x = image.template cast<double>();
    const double norm = x.norm();
    if (!(norm > 0.0)) throw DegenerateVectorError("image embedding has zero norm", image_row);
    Vector<double> s = concepts_ * x;
    for (Eigen::Index j = 0; j < s.size(); ++j) s[j] = std::clamp(s[j] / (norm * norms_[j]), -1.0, 1.0);
    return s;
  }

  template <typename Derived>
  ConceptAssignment top_m(const Eigen::MatrixBase<Derived>& image, std::size_t m, std::size_t image_row = 0) const;

 private:
  RowMatrix<double> concepts_;
  Vector<double> norms_;
};

/// Picks min(m, |scores|) entries by (score desc, index asc).
std::vector<ScoredConcept> top_scored(const Vector<double>& scores, std::size_t m);

template <typename Derived>
ConceptAssignment CosineIndex::top_m(const Eigen::MatrixBase<Derived>& image, std::size_t m,
                                     std::size_t image_row) const {
  if (m == 0) throw ConfigError("top_m: m must be >= 1");
  return ConceptAssignment{image_row, top_scored(similarities(image, image_row), m)};
}

template <typename DI, typename DC>
Vector<double> cosine_similarity_row(const Eigen::MatrixBase<DI>& image, const Eigen::MatrixBase<DC>& concepts) {
  return CosineIndex(concepts).similarities(image);
}

template <typename Derived>
ConceptAssignment top_m(const Eigen::MatrixBase<Derived>& image, const ConceptSpace& concepts, std::size_t m) {
  return CosineIndex(concepts.embeddings).top_m(image, m);
}

/// Top-m assignment for every row of `images`; row i produces assignment i.
template <typename Derived>
std::vector<ConceptAssignment> assign_concepts(const Eigen::MatrixBase<Derived>& images, const CosineIndex& index,
                                               std::size_t m, unsigned threads = 1);

/// A filtered ConceptSpace plus the parameters it was built with.
struct Rcs {
  ConceptSpace space;
  /// Row in the knowledge base each RCS concept came from, ascending.
  std::vector<std::uint32_t> knb_indices;
  std::size_t m = kDefaultTopM;
  std::size_t source_size = 0;
  std::size_t knb_size = 0;

  std::size_t size() const noexcept { return space.size(); }
};

/// Union of every training image's top-m knowledge-base concepts, kept in
/// knowledge-base order. Duplicate names in the knowledge base collapse to
/// their first occurrence before scoring.
Rcs build_rcs(const EmbeddingMatrix& train_shared, const ConceptSpace& knb, std::size_t m = kDefaultTopM,
              unsigned threads = 1);

/// Writes concepts.txt, concepts.ebin and rcs.meta into `dir`.
void save_rcs(const Rcs& rcs, const std::filesystem::path& dir);
Rcs load_rcs(const std::filesystem::path& dir);

template <typename Derived>
std::vector<ConceptAssignment> assign_concepts(const Eigen::MatrixBase<Derived>& images, const CosineIndex& index,
                                               std::size_t m, unsigned threads) {
  if (m == 0) throw ConfigError("assign_concepts: m must be >= 1");
  if (images.rows() > 0 && images.cols() != index.dim())
    throw ShapeError("assign_concepts: images have dimension " + std::to_string(images.cols()) +
                     ", concepts have " + std::to_string(index.dim()));
  std::vector<ConceptAssignment> out(static_cast<std::size_t>(images.rows()));
  detail::parallel_for(out.size(), threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i)
      out[i] = index.top_m(images.row(static_cast<Eigen::Index>(i)), m, i);
  });
  return out;
}

}  // namespace cbdsel

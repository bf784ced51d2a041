#pragma once

// Persistence for matrices, labels and concept lists.
//
// EMB1 / PRB1:  "EMB1"|"PRB1", u32 n, u32 d, n*d binary32, all little-endian, row-major.
// LBL1:         "LBL1", u32 n, u32 C, n u32 labels.
// Concept names: UTF-8 text, one name per LF-terminated line (final LF optional).
//
// Loaders never repair data; every invariant violation is reported.

#include <cstdint>
#include <filesystem>
#include <string_view>
#include <vector>

#include "cbdsel/types.hpp"

namespace cbdsel {

enum class MatrixKind { embedding, probability };

std::string_view magic_of(MatrixKind kind) noexcept;

std::vector<std::uint8_t> encode_matrix(const RowMatrix<float>& m, MatrixKind kind);
RowMatrix<float> decode_matrix(const std::vector<std::uint8_t>& bytes, MatrixKind kind,
                               const std::string& source = "<memory>");

void save_matrix(const EmbeddingMatrix& m, const std::filesystem::path& path);
void save_matrix(const ProbabilityMatrix& m, const std::filesystem::path& path);

/// Reads an EMB1 or PRB1 file and checks the invariants of `kind`.
RowMatrix<float> load_matrix(const std::filesystem::path& path, MatrixKind kind);

inline EmbeddingMatrix load_embeddings(const std::filesystem::path& path) {
  return load_matrix(path, MatrixKind::embedding);
}
inline ProbabilityMatrix load_probabilities(const std::filesystem::path& path) {
  return ProbabilityMatrix(load_matrix(path, MatrixKind::probability));
}

std::vector<std::uint8_t> encode_labels(const LabelVector& labels);
LabelVector decode_labels(const std::vector<std::uint8_t>& bytes, const std::string& source = "<memory>");
void save_labels(const LabelVector& labels, const std::filesystem::path& path);
LabelVector load_labels(const std::filesystem::path& path);

std::vector<std::string> parse_concept_names(const std::string& text);
std::vector<std::string> load_concept_names(const std::filesystem::path& path);
void save_concept_names(const std::vector<std::string>& names, const std::filesystem::path& path);

/// Pairs line i of the names file with row i of the embedding file.
/// Duplicate names are accepted here.
ConceptSpace load_concepts(const std::filesystem::path& names_path, const std::filesystem::path& emb_path);
void save_concepts(const ConceptSpace& space, const std::filesystem::path& names_path,
                   const std::filesystem::path& emb_path);

}  // namespace cbdsel

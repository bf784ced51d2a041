#include "cbdsel/embstore.hpp"

#include <cmath>
#include <fstream>
#include <iterator>
#include <limits>
#include <sstream>

#include "cbdsel/detail/binary_io.hpp"

namespace cbdsel {

namespace detail {

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("read failure on '" + path.string() + "'");
  return bytes;
}

void write_file(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  out.flush();
  if (!out) throw IoError("write failure on '" + path.string() + "'");
}

std::string read_text_file(const std::filesystem::path& path) {
  auto bytes = read_file(path);
  return std::string(bytes.begin(), bytes.end());
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  write_file(path, std::vector<std::uint8_t>(text.begin(), text.end()));
}

}  // namespace detail

// ---------------------------------------------------------------------------
// LabelVector / ProbabilityMatrix

LabelVector::LabelVector(std::vector<std::uint32_t> labels, std::uint32_t num_classes)
    : labels_(std::move(labels)), num_classes_(num_classes) {
  for (std::size_t i = 0; i < labels_.size(); ++i)
    if (labels_[i] >= num_classes_)
      throw InvariantError("label " + std::to_string(labels_[i]) + " at index " + std::to_string(i) +
                           " is not below the class count " + std::to_string(num_classes_));
}

Eigen::Index ProbabilityMatrix::first_invalid_row(const RowMatrix<float>& values) {
  for (Eigen::Index r = 0; r < values.rows(); ++r) {
    double sum = 0.0;
    for (Eigen::Index c = 0; c < values.cols(); ++c) {
      const double p = values(r, c);
      if (!(p >= 0.0 && p <= 1.0)) return r;
      sum += p;
    }
    if (std::abs(sum - 1.0) > kRowSumTolerance) return r;
  }
  return -1;
}

ProbabilityMatrix::ProbabilityMatrix(RowMatrix<float> values) : values_(std::move(values)) {
  if (values_.cols() < 1 && values_.rows() > 0) throw InvariantError("probability matrix needs at least one class");
  Eigen::Index bad = first_invalid_row(values_);
  if (bad >= 0)
    throw InvariantError("probability row " + std::to_string(bad) + " is not a distribution (entries in [0,1], sum 1 +/- 1e-5)");
}

// ---------------------------------------------------------------------------
// Matrices

std::string_view magic_of(MatrixKind kind) noexcept {
  return kind == MatrixKind::embedding ? "EMB1" : "PRB1";
}

namespace {

constexpr std::uint64_t kHeaderBytes = 12;

void check_encodable(const RowMatrix<float>& m, MatrixKind kind) {
  if (m.cols() < 1) throw ShapeError("matrix must have at least one column");
  if (static_cast<std::uint64_t>(m.rows()) > std::numeric_limits<std::uint32_t>::max() ||
      static_cast<std::uint64_t>(m.cols()) > std::numeric_limits<std::uint32_t>::max())
    throw ShapeError("matrix dimensions exceed the u32 header range");
  require_finite(m, "matrix");
  if (kind == MatrixKind::probability) {
    Eigen::Index bad = ProbabilityMatrix::first_invalid_row(m);
    if (bad >= 0) throw InvariantError("probability row " + std::to_string(bad) + " is not a distribution");
  }
}

}  // namespace

std::vector<std::uint8_t> encode_matrix(const RowMatrix<float>& m, MatrixKind kind) {
  check_encodable(m, kind);
  detail::ByteWriter w;
  w.reserve(kHeaderBytes + 4 * static_cast<std::size_t>(m.size()));
  w.magic(magic_of(kind));
  w.u32(static_cast<std::uint32_t>(m.rows()));
  w.u32(static_cast<std::uint32_t>(m.cols()));
  const float* data = m.data();
  for (Eigen::Index i = 0; i < m.size(); ++i) w.f32(data[i]);
  return w.bytes();
}

RowMatrix<float> decode_matrix(const std::vector<std::uint8_t>& bytes, MatrixKind kind, const std::string& source) {
  detail::ByteReader r(bytes, source);
  r.expect_magic(magic_of(kind));
  const std::uint32_t n = r.u32("row count");
  const std::uint64_t d_offset = r.offset();
  const std::uint32_t d = r.u32("column count");
  if (d == 0) throw FormatError(source + ": column count must be >= 1", d_offset);

  const std::uint64_t payload = static_cast<std::uint64_t>(n) * d * 4;
  r.need(payload, "payload");

  RowMatrix<float> m(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  float* data = m.data();
  for (std::uint64_t i = 0; i < static_cast<std::uint64_t>(n) * d; ++i) {
    const std::uint64_t at = r.offset();
    data[i] = r.f32("value");
    if (!std::isfinite(data[i])) throw FormatError(source + ": non-finite value", at);
  }
  r.expect_end();

  if (kind == MatrixKind::probability) {
    Eigen::Index bad = ProbabilityMatrix::first_invalid_row(m);
    if (bad >= 0)
      throw FormatError(source + ": probability row " + std::to_string(bad) +
                            " violates the distribution invariant (entries in [0,1], sum 1 +/- 1e-5)",
                        kHeaderBytes + static_cast<std::uint64_t>(bad) * d * 4);
  }
  return m;
}

void save_matrix(const EmbeddingMatrix& m, const std::filesystem::path& path) {
  detail::write_file(path, encode_matrix(m, MatrixKind::embedding));
}

void save_matrix(const ProbabilityMatrix& m, const std::filesystem::path& path) {
  detail::write_file(path, encode_matrix(m.values(), MatrixKind::probability));
}

RowMatrix<float> load_matrix(const std::filesystem::path& path, MatrixKind kind) {
  return decode_matrix(detail::read_file(path), kind, path.string());
}

// ---------------------------------------------------------------------------
// Labels

std::vector<std::uint8_t> encode_labels(const LabelVector& labels) {
  detail::ByteWriter w;
  w.magic("LBL1");
  w.u32(static_cast<std::uint32_t>(labels.size()));
  w.u32(labels.num_classes());
  for (auto v : labels.values()) w.u32(v);
  return w.bytes();
}

LabelVector decode_labels(const std::vector<std::uint8_t>& bytes, const std::string& source) {
  detail::ByteReader r(bytes, source);
  r.expect_magic("LBL1");
  const std::uint32_t n = r.u32("label count");
  const std::uint32_t classes = r.u32("class count");
  r.need(static_cast<std::uint64_t>(n) * 4, "payload");
  std::vector<std::uint32_t> labels(n);
  for (std::uint32_t i = 0; i < n; ++i) {
    const std::uint64_t at = r.offset();
    labels[i] = r.u32("label");
    if (labels[i] >= classes)
      throw FormatError(source + ": label " + std::to_string(labels[i]) + " is not below the class count " +
                            std::to_string(classes),
                        at);
  }
  r.expect_end();
  return LabelVector(std::move(labels), classes);
}

void save_labels(const LabelVector& labels, const std::filesystem::path& path) {
  detail::write_file(path, encode_labels(labels));
}

LabelVector load_labels(const std::filesystem::path& path) {
  return decode_labels(detail::read_file(path), path.string());
}

// ---------------------------------------------------------------------------
// Concepts

std::vector<std::string> parse_concept_names(const std::string& text) {
  std::vector<std::string> names;
  std::size_t start = 0;
  while (start < text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string::npos) end = text.size();
    names.emplace_back(text.substr(start, end - start));
    start = end + 1;
  }
  return names;
}

std::vector<std::string> load_concept_names(const std::filesystem::path& path) {
  return parse_concept_names(detail::read_text_file(path));
}

void save_concept_names(const std::vector<std::string>& names, const std::filesystem::path& path) {
  std::string text;
  for (const auto& name : names) {
    if (name.find('\n') != std::string::npos) throw InvariantError("concept name contains a line feed: " + name);
    text += name;
    text += '\n';
  }
  detail::write_text_file(path, text);
}

ConceptSpace load_concepts(const std::filesystem::path& names_path, const std::filesystem::path& emb_path) {
  ConceptSpace space;
  space.names = load_concept_names(names_path);
  space.embeddings = load_embeddings(emb_path);
  if (static_cast<Eigen::Index>(space.names.size()) != space.embeddings.rows())
    throw ShapeError("concept alignment: " + std::to_string(space.names.size()) + " names in '" +
                     names_path.string() + "' but " + std::to_string(space.embeddings.rows()) +
                     " embedding rows in '" + emb_path.string() + "'");
  return space;
}

void save_concepts(const ConceptSpace& space, const std::filesystem::path& names_path,
                   const std::filesystem::path& emb_path) {
  if (static_cast<Eigen::Index>(space.names.size()) != space.embeddings.rows())
    throw ShapeError("concept space names and embeddings disagree in size");
  save_concept_names(space.names, names_path);
  save_matrix(space.embeddings, emb_path);
}

}  // namespace cbdsel

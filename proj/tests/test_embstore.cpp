#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <random>

#include "cbdsel/detail/binary_io.hpp"
#include "cbdsel/embstore.hpp"
#include "test_util.hpp"

using namespace cbdsel;

namespace {

RowMatrix<float> two_by_three() {
  RowMatrix<float> m(2, 3);
  m << 1, 2, 3, 4, 5, 6;
  return m;
}

}  // namespace

TEST(Embstore, EncodesHeaderAndPayloadLittleEndian) {
  const auto bytes = encode_matrix(two_by_three(), MatrixKind::embedding);
  ASSERT_EQ(bytes.size(), 12u + 24u);
  EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 4), "EMB1");
  EXPECT_EQ(bytes[4], 2);
  EXPECT_EQ(bytes[5], 0);
  EXPECT_EQ(bytes[8], 3);
  // 1.0f = 0x3F800000, little-endian.
  EXPECT_EQ(bytes[12], 0x00);
  EXPECT_EQ(bytes[14], 0x80);
  EXPECT_EQ(bytes[15], 0x3F);
}

TEST(Embstore, RoundTripThroughFile) {
  testutil::TempDir dir;
  const auto path = dir.path() / "m.ebin";
  save_matrix(EmbeddingMatrix(two_by_three()), path);
  EXPECT_EQ(std::filesystem::file_size(path), 36u);
  const auto back = load_embeddings(path);
  EXPECT_EQ(back, two_by_three());
}

TEST(Embstore, EmptyMatrixIsHeaderOnly) {
  testutil::TempDir dir;
  const auto path = dir.path() / "empty.ebin";
  save_matrix(EmbeddingMatrix(0, 5), path);
  EXPECT_EQ(std::filesystem::file_size(path), 12u);
  const auto back = load_embeddings(path);
  EXPECT_EQ(back.rows(), 0);
  EXPECT_EQ(back.cols(), 5);
}

TEST(Embstore, RejectsNanBeforeWriting) {
  testutil::TempDir dir;
  auto m = two_by_three();
  m(1, 2) = std::numeric_limits<float>::quiet_NaN();
  EXPECT_THROW(save_matrix(EmbeddingMatrix(m), dir.path() / "nan.ebin"), InvariantError);
  EXPECT_FALSE(std::filesystem::exists(dir.path() / "nan.ebin"));
}

TEST(Embstore, TruncatedPayloadNamesOffset) {
  auto bytes = encode_matrix(two_by_three(), MatrixKind::embedding);
  bytes.resize(bytes.size() - 5);
  try {
    decode_matrix(bytes, MatrixKind::embedding);
    FAIL() << "expected truncation error";
  } catch (const FormatError& e) {
    EXPECT_EQ(e.offset(), 12u);
    EXPECT_NE(std::string(e.what()).find("truncated"), std::string::npos);
  }
}

TEST(Embstore, WrongMagicIsFormatError) {
  const auto bytes = encode_matrix(two_by_three(), MatrixKind::embedding);
  EXPECT_THROW(decode_matrix(bytes, MatrixKind::probability), FormatError);
}

TEST(Embstore, TrailingBytesAreRejected) {
  auto bytes = encode_matrix(two_by_three(), MatrixKind::embedding);
  bytes.push_back(0);
  EXPECT_THROW(decode_matrix(bytes, MatrixKind::embedding), FormatError);
}

TEST(Embstore, NonFiniteOnDiskNamesOffset) {
  auto bytes = encode_matrix(two_by_three(), MatrixKind::embedding);
  const auto inf = std::bit_cast<std::uint32_t>(std::numeric_limits<float>::infinity());
  const std::size_t at = 12 + 4 * 4;
  for (int i = 0; i < 4; ++i) bytes[at + i] = static_cast<std::uint8_t>(inf >> (8 * i));
  try {
    decode_matrix(bytes, MatrixKind::embedding);
    FAIL();
  } catch (const FormatError& e) {
    EXPECT_EQ(e.offset(), at);
  }
}

TEST(Embstore, ProbabilityRowMustSumToOne) {
  RowMatrix<float> bad(1, 2);
  bad << 0.6f, 0.6f;
  EXPECT_THROW(ProbabilityMatrix{bad}, InvariantError);

  // Forge a PRB1 file with the bad row; the loader must refuse it.
  detail::ByteWriter w;
  w.magic("PRB1");
  w.u32(1);
  w.u32(2);
  w.f32(0.6f);
  w.f32(0.6f);
  EXPECT_THROW(decode_matrix(w.bytes(), MatrixKind::probability), FormatError);
}

TEST(Embstore, ProbabilityRoundTrip) {
  testutil::TempDir dir;
  RowMatrix<float> p(2, 3);
  p << 0.7f, 0.2f, 0.1f, 0.0f, 1.0f, 0.0f;
  save_matrix(ProbabilityMatrix(p), dir.path() / "p.prb");
  EXPECT_EQ(load_probabilities(dir.path() / "p.prb").values(), p);
}

TEST(Embstore, LabelsRoundTripAndRangeCheck) {
  testutil::TempDir dir;
  LabelVector labels({0, 2, 1, 2}, 3);
  save_labels(labels, dir.path() / "y.lbl");
  const auto back = load_labels(dir.path() / "y.lbl");
  EXPECT_EQ(back.values(), labels.values());
  EXPECT_EQ(back.num_classes(), 3u);

  EXPECT_THROW(LabelVector({0, 3}, 3), InvariantError);
  detail::ByteWriter w;
  w.magic("LBL1");
  w.u32(1);
  w.u32(2);
  w.u32(5);
  EXPECT_THROW(decode_labels(w.bytes()), FormatError);
}

TEST(Embstore, ConceptNamesParsing) {
  EXPECT_EQ(parse_concept_names("cat\ndog\n"), (std::vector<std::string>{"cat", "dog"}));
  EXPECT_EQ(parse_concept_names("cat\ndog"), (std::vector<std::string>{"cat", "dog"}));
  EXPECT_EQ(parse_concept_names(""), std::vector<std::string>{});
  EXPECT_EQ(parse_concept_names("caf\xc3\xa9\n"), std::vector<std::string>{"caf\xc3\xa9"});
}

TEST(Embstore, LoadConceptsAlignsNamesAndRows) {
  testutil::TempDir dir;
  detail::write_text_file(dir.path() / "c.txt", "cat\ndog\nbird\n");
  save_matrix(EmbeddingMatrix(EmbeddingMatrix::Ones(3, 512)), dir.path() / "c3.ebin");
  save_matrix(EmbeddingMatrix(EmbeddingMatrix::Ones(2, 512)), dir.path() / "c2.ebin");

  const auto space = load_concepts(dir.path() / "c.txt", dir.path() / "c3.ebin");
  EXPECT_EQ(space.size(), 3u);
  EXPECT_EQ(space.names[2], "bird");
  EXPECT_THROW(load_concepts(dir.path() / "c.txt", dir.path() / "c2.ebin"), ShapeError);
}

TEST(Embstore, DuplicateConceptNamesAcceptedAtLoad) {
  testutil::TempDir dir;
  detail::write_text_file(dir.path() / "c.txt", "cat\ncat\ndog\n");
  save_matrix(EmbeddingMatrix(EmbeddingMatrix::Ones(3, 4)), dir.path() / "c.ebin");
  EXPECT_EQ(load_concepts(dir.path() / "c.txt", dir.path() / "c.ebin").size(), 3u);
}

TEST(Embstore, MissingFileIsIoError) {
  EXPECT_THROW(load_embeddings("/nonexistent/dir/x.ebin"), IoError);
}

// Property: any finite matrix survives encode/decode bit-exactly, including
// signed zeros, subnormals and extreme magnitudes.
TEST(EmbstoreProperty, BitExactRoundTrip) {
  std::mt19937_64 rng(7);
  std::uniform_int_distribution<std::uint32_t> bits;
  std::uniform_int_distribution<int> dim(0, 9);
  for (int trial = 0; trial < 200; ++trial) {
    RowMatrix<float> m(dim(rng), dim(rng) + 1);
    for (Eigen::Index i = 0; i < m.size(); ++i) {
      float v;
      do {
        v = std::bit_cast<float>(bits(rng));
      } while (!std::isfinite(v));
      m.data()[i] = v;
    }
    const auto back = decode_matrix(encode_matrix(m, MatrixKind::embedding), MatrixKind::embedding);
    ASSERT_EQ(back.rows(), m.rows());
    ASSERT_EQ(back.cols(), m.cols());
    ASSERT_EQ(std::memcmp(back.data(), m.data(), sizeof(float) * static_cast<std::size_t>(m.size())), 0);
  }
}

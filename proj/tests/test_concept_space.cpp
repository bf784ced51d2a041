#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include "cbdsel/concept_space.hpp"
#include "cbdsel/detail/binary_io.hpp"
#include "cbdsel/synthetic.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace cbdsel;

namespace {

ConceptSpace random_space(Eigen::Index k, Eigen::Index d, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  ConceptSpace space;
  space.embeddings = synthetic::gaussian_matrix(k, d, rng).cast<float>();
  for (Eigen::Index j = 0; j < k; ++j) space.names.push_back("concept" + std::to_string(j));
  return space;
}

std::vector<std::uint32_t> indices_of(const ConceptAssignment& a) {
  std::vector<std::uint32_t> out;
  for (const auto& c : a.concepts) out.push_back(c.concept_index);
  return out;
}

}  // namespace

TEST(CosineSimilarity, HandExamples) {
  RowMatrix<double> concepts(2, 2);
  concepts << 1, 0, 0, 1;
  Vector<double> image(2);
  image << 1, 1;
  const auto s = cosine_similarity_row(image, concepts);
  EXPECT_NEAR(s[0], std::sqrt(2.0) / 2.0, 1e-15);
  EXPECT_NEAR(s[1], std::sqrt(2.0) / 2.0, 1e-15);

  Vector<double> same(2);
  same << 1, 0;
  EXPECT_EQ(cosine_similarity_row(same, concepts)[0], 1.0);
  EXPECT_EQ(cosine_similarity_row(same, concepts)[1], 0.0);
}

TEST(CosineSimilarity, ZeroNormNamesRow) {
  RowMatrix<double> concepts(3, 2);
  concepts << 1, 0, 0, 0, 0, 1;
  try {
    CosineIndex index(concepts);
    FAIL();
  } catch (const DegenerateVectorError& e) {
    EXPECT_EQ(e.row(), 1u);
  }
  const CosineIndex ok(RowMatrix<double>::Identity(2, 2));
  try {
    ok.similarities(Vector<double>::Zero(2), 7);
    FAIL();
  } catch (const DegenerateVectorError& e) {
    EXPECT_EQ(e.row(), 7u);
  }
  EXPECT_THROW(ok.similarities(Vector<double>::Ones(3)), ShapeError);
}

TEST(TopM, TieBrokenByIndex) {
  // Similarities [0.2, 0.9, 0.9].
  RowMatrix<double> concepts(3, 2);
  const double a = std::acos(0.2), b = std::acos(0.9);
  concepts << std::cos(a), std::sin(a), std::cos(b), std::sin(b), std::cos(b), -std::sin(b);
  Vector<double> image(2);
  image << 1, 0;
  const auto got = CosineIndex(concepts).top_m(image, 2);
  EXPECT_EQ(indices_of(got), (std::vector<std::uint32_t>{1, 2}));

  // Exact ties from top_scored directly.
  Vector<double> scores(3);
  scores << 0.2, 0.9, 0.9;
  const auto top = top_scored(scores, 2);
  EXPECT_EQ(top[0].concept_index, 1u);
  EXPECT_EQ(top[1].concept_index, 2u);
}

TEST(TopM, MAtLeastKReturnsAllSorted) {
  const auto space = random_space(6, 4, 1);
  Vector<double> image = Vector<double>::Ones(4);
  const auto got = top_m(image, space, 50);
  ASSERT_EQ(got.concepts.size(), 6u);
  for (std::size_t i = 1; i < got.concepts.size(); ++i) EXPECT_GE(got.concepts[i - 1].score, got.concepts[i].score);
  EXPECT_THROW(top_m(image, space, 0), ConfigError);
}

TEST(TopM, MatchesFullSortOracle) {
  const auto space = random_space(50, 16, 2);
  std::mt19937_64 rng(3);
  const CosineIndex index(space.embeddings);
  for (int trial = 0; trial < 100; ++trial) {
    const Vector<double> image = synthetic::gaussian_matrix(16, 1, rng);
    EXPECT_EQ(indices_of(index.top_m(image, 10)), oracle::top_m_by_full_sort(image, space.embeddings, 10));
  }
}

TEST(TopMProperty, AssignmentInvariantsAndScaleInvariance) {
  std::mt19937_64 rng(4);
  std::uniform_int_distribution<int> kdist(1, 40), mdist(1, 15);
  std::uniform_real_distribution<double> alpha(1e-3, 1e3);
  for (int trial = 0; trial < 200; ++trial) {
    const auto k = kdist(rng);
    const auto m = static_cast<std::size_t>(mdist(rng));
    const auto space = random_space(k, 8, 1000 + trial);
    const CosineIndex index(space.embeddings);
    const Vector<double> image = synthetic::gaussian_matrix(8, 1, rng);
    const auto a = index.top_m(image, m);
    ASSERT_EQ(a.concepts.size(), std::min<std::size_t>(m, static_cast<std::size_t>(k)));
    for (std::size_t i = 0; i < a.concepts.size(); ++i) {
      EXPECT_GE(a.concepts[i].score, -1.0);
      EXPECT_LE(a.concepts[i].score, 1.0);
      if (i > 0) {
        const auto& p = a.concepts[i - 1];
        const auto& c = a.concepts[i];
        EXPECT_TRUE(p.score > c.score || (p.score == c.score && p.concept_index < c.concept_index));
      }
    }
    const Vector<double> scaled = alpha(rng) * image;
    EXPECT_EQ(indices_of(index.top_m(scaled, m)), indices_of(a));
  }
}

TEST(AssignConcepts, ParallelMatchesSerial) {
  const auto space = random_space(120, 32, 5);
  std::mt19937_64 rng(6);
  const auto images = synthetic::gaussian_matrix(333, 32, rng);
  const CosineIndex index(space.embeddings);
  const auto serial = assign_concepts(images, index, 10, 1);
  const auto parallel = assign_concepts(images, index, 10, 4);
  EXPECT_EQ(serial, parallel);
  for (std::size_t i = 0; i < serial.size(); ++i) EXPECT_EQ(serial[i].image, i);
}

TEST(BuildRcs, SingleImageGivesExactlyM) {
  const auto knb = random_space(100, 16, 7);
  std::mt19937_64 rng(8);
  const EmbeddingMatrix one = synthetic::gaussian_matrix(1, 16, rng).cast<float>();
  const auto rcs = build_rcs(one, knb, 5);
  EXPECT_EQ(rcs.size(), 5u);
  EXPECT_EQ(rcs.m, 5u);
  EXPECT_EQ(rcs.source_size, 1u);
  EXPECT_EQ(rcs.knb_size, 100u);
}

TEST(BuildRcs, DuplicateImagesCollapse) {
  const auto knb = random_space(100, 16, 7);
  std::mt19937_64 rng(9);
  const EmbeddingMatrix one = synthetic::gaussian_matrix(1, 16, rng).cast<float>();
  EmbeddingMatrix two(2, 16);
  two.row(0) = one.row(0);
  two.row(1) = one.row(0);
  EXPECT_EQ(build_rcs(two, knb, 10).knb_indices, build_rcs(one, knb, 10).knb_indices);
}

TEST(BuildRcs, MatchesBruteForceUnion) {
  const auto knb = random_space(300, 24, 10);
  std::mt19937_64 rng(11);
  const EmbeddingMatrix train = synthetic::gaussian_matrix(200, 24, rng).cast<float>();
  std::set<std::uint32_t> expected;
  for (Eigen::Index i = 0; i < train.rows(); ++i)
    for (auto j : oracle::top_m_by_full_sort(train.row(i), knb.embeddings, 10)) expected.insert(j);

  const auto rcs = build_rcs(train, knb, 10, 3);
  EXPECT_EQ(rcs.knb_indices, std::vector<std::uint32_t>(expected.begin(), expected.end()));
  ASSERT_EQ(rcs.space.embeddings.rows(), static_cast<Eigen::Index>(rcs.size()));
  for (std::size_t r = 0; r < rcs.size(); ++r) {
    EXPECT_EQ(rcs.space.names[r], knb.names[rcs.knb_indices[r]]);
    EXPECT_EQ(rcs.space.embeddings.row(static_cast<Eigen::Index>(r)), knb.embeddings.row(rcs.knb_indices[r]));
  }
}

TEST(BuildRcs, DuplicateKnowledgeBaseNamesKeepFirst) {
  ConceptSpace knb;
  knb.names = {"cat", "dog", "cat"};
  knb.embeddings = EmbeddingMatrix(3, 2);
  knb.embeddings << 1, 0, 0, 1, 1, 0.01f;
  EmbeddingMatrix train(1, 2);
  train << 1, 0;
  const auto rcs = build_rcs(train, knb, 3);
  EXPECT_EQ(rcs.space.names, (std::vector<std::string>{"cat", "dog"}));
  EXPECT_EQ(rcs.knb_indices, (std::vector<std::uint32_t>{0, 1}));
}

TEST(BuildRcs, Errors) {
  const auto knb = random_space(10, 4, 12);
  EXPECT_THROW(build_rcs(EmbeddingMatrix(0, 4), knb, 3), ConfigError);
  EXPECT_THROW(build_rcs(EmbeddingMatrix::Ones(2, 4), ConceptSpace{}, 3), ConfigError);
  EmbeddingMatrix with_zero = EmbeddingMatrix::Ones(3, 4);
  with_zero.row(2).setZero();
  try {
    build_rcs(with_zero, knb, 3);
    FAIL();
  } catch (const DegenerateVectorError& e) {
    EXPECT_EQ(e.row(), 2u);
  }
}

TEST(BuildRcsProperty, SizeBoundsOrderInvarianceAndReproduction) {
  std::mt19937_64 rng(13);
  std::uniform_int_distribution<int> ndist(1, 30), kdist(1, 60), mdist(1, 8);
  for (int trial = 0; trial < 60; ++trial) {
    const auto n = ndist(rng);
    const auto k = kdist(rng);
    const auto m = static_cast<std::size_t>(mdist(rng));
    const auto knb = random_space(k, 6, 2000 + trial);
    EmbeddingMatrix train = synthetic::gaussian_matrix(n, 6, rng).cast<float>();
    const auto rcs = build_rcs(train, knb, m);
    const auto ku = static_cast<std::size_t>(k);
    EXPECT_LE(rcs.size(), std::min(static_cast<std::size_t>(n) * m, ku));
    EXPECT_GE(rcs.size(), std::min(m, ku));

    std::vector<Eigen::Index> perm(static_cast<std::size_t>(n));
    std::iota(perm.begin(), perm.end(), Eigen::Index{0});
    std::shuffle(perm.begin(), perm.end(), rng);
    EmbeddingMatrix shuffled(n, 6);
    for (Eigen::Index i = 0; i < n; ++i) shuffled.row(i) = train.row(perm[static_cast<std::size_t>(i)]);
    EXPECT_EQ(build_rcs(shuffled, knb, m, 2).knb_indices, rcs.knb_indices);

    // Each training image's top-m over the RCS maps back to its top-m over the knowledge base.
    const CosineIndex full(knb.embeddings), reduced(rcs.space.embeddings);
    for (Eigen::Index i = 0; i < n; ++i) {
      auto via_rcs = indices_of(reduced.top_m(train.row(i), m));
      for (auto& j : via_rcs) j = rcs.knb_indices[j];
      EXPECT_EQ(via_rcs, indices_of(full.top_m(train.row(i), m)));
    }
  }
}

TEST(Rcs, PersistenceRoundTrip) {
  const auto knb = random_space(40, 8, 14);
  std::mt19937_64 rng(15);
  const EmbeddingMatrix train = synthetic::gaussian_matrix(12, 8, rng).cast<float>();
  const auto rcs = build_rcs(train, knb, 4);
  testutil::TempDir dir;
  save_rcs(rcs, dir.path() / "rcs");
  EXPECT_TRUE(std::filesystem::exists(dir.path() / "rcs" / "concepts.txt"));
  EXPECT_TRUE(std::filesystem::exists(dir.path() / "rcs" / "concepts.ebin"));
  EXPECT_TRUE(std::filesystem::exists(dir.path() / "rcs" / "rcs.meta"));
  const auto back = load_rcs(dir.path() / "rcs");
  EXPECT_EQ(back.space.names, rcs.space.names);
  EXPECT_EQ(back.space.embeddings, rcs.space.embeddings);
  EXPECT_EQ(back.knb_indices, rcs.knb_indices);
  EXPECT_EQ(back.m, 4u);
  EXPECT_EQ(back.source_size, 12u);
  EXPECT_EQ(back.knb_size, 40u);
}

TEST(Rcs, MalformedMetaIsRejected) {
  const auto knb = random_space(10, 4, 16);
  const auto rcs = build_rcs(EmbeddingMatrix::Ones(1, 4), knb, 2);
  testutil::TempDir dir;
  save_rcs(rcs, dir.path());
  detail::write_text_file(dir.path() / "rcs.meta", "m=abc\n");
  EXPECT_THROW(load_rcs(dir.path()), InvariantError);
}
